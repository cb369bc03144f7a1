#include "cotkd/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace cotkd::supervision {

SupervisionRegime regime_from_string(const std::string& s) {
  if (s == "a") return SupervisionRegime::A;
  if (s == "p+a") return SupervisionRegime::P_A;
  if (s == "cot") return SupervisionRegime::COT;
  if (s == "cot+a") return SupervisionRegime::COT_A;
  if (s == "p+cot") return SupervisionRegime::P_COT;
  if (s == "p+cot+a") return SupervisionRegime::P_COT_A;
  throw ConfigError("unknown supervision regime '" + s +
                    "' (expected a, p+a, cot, cot+a, p+cot, p+cot+a)");
}

std::string to_string(SupervisionRegime regime) {
  switch (regime) {
    case SupervisionRegime::A: return "a";
    case SupervisionRegime::P_A: return "p+a";
    case SupervisionRegime::COT: return "cot";
    case SupervisionRegime::COT_A: return "cot+a";
    case SupervisionRegime::P_COT: return "p+cot";
    case SupervisionRegime::P_COT_A: return "p+cot+a";
  }
  throw ConfigError("invalid supervision regime value");
}

const std::vector<SupervisionRegime>& all_regimes() {
  static const std::vector<SupervisionRegime> r = {
      SupervisionRegime::A,     SupervisionRegime::P_A,   SupervisionRegime::COT,
      SupervisionRegime::COT_A, SupervisionRegime::P_COT, SupervisionRegime::P_COT_A};
  return r;
}

std::size_t SupervisionMask::n_supervised() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

TruncationPolicy TruncationPolicy::lsp(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("LSP fraction must lie in (0,1]");
  return {Kind::LSP, p};
}

TruncationPolicy TruncationPolicy::from_string(const std::string& s) {
  if (s == "none") return none();
  if (s == "left") return left_half();
  if (s == "right") return right_half();
  if (s.rfind("lsp:", 0) == 0) {
    double p = 0.0;
    try {
      p = std::stod(s.substr(4));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse LSP fraction in '" + s + "'");
    }
    return lsp(p);
  }
  throw ConfigError("unknown truncation policy '" + s +
                    "' (expected none, lsp:<p>, left, right)");
}

std::string TruncationPolicy::to_string() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::LeftHalf: return "left";
    case Kind::RightHalf: return "right";
    case Kind::LSP: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "lsp:%g", p);
      return buf;
    }
  }
  throw ConfigError("invalid truncation policy value");
}

namespace {

std::vector<corpus::Span> regime_spans(const corpus::SegmentedExample& ex,
                                       SupervisionRegime regime) {
  switch (regime) {
    case SupervisionRegime::A: return {ex.answer_span};
    case SupervisionRegime::P_A: return {ex.prompt_span, ex.answer_span};
    case SupervisionRegime::COT: return {ex.cot_span};
    case SupervisionRegime::COT_A: return {ex.cot_span, ex.answer_span};
    case SupervisionRegime::P_COT: return {ex.prompt_span, ex.cot_span};
    case SupervisionRegime::P_COT_A: return {ex.prompt_span, ex.cot_span, ex.answer_span};
  }
  throw ConfigError("invalid supervision regime value");
}

SupervisionMask mask_from_spans(const std::vector<corpus::Span>& spans, std::size_t T,
                                SupervisionRegime regime) {
  SupervisionMask mask;
  mask.bits.assign(T >= 1 ? T - 1 : 0, 0);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const std::size_t predicted = t + 1;  // label bit follows the predicted token
    for (const auto& s : spans) {
      if (predicted >= s.start && predicted < s.end) {
        mask.bits[t] = 1;
        break;
      }
    }
  }
  if (mask.n_supervised() == 0) {
    throw DegenerateRegime("regime '" + to_string(regime) +
                           "' supervises no label positions on this example");
  }
  return mask;
}

}  // namespace

SupervisionMask build_mask(const corpus::SegmentedExample& example,
                           SupervisionRegime regime) {
  return mask_from_spans(regime_spans(example, regime), example.length(), regime);
}

TruncatedExample truncate(const std::vector<int>& token_ids, TruncationPolicy policy) {
  const std::size_t T = token_ids.size();
  corpus::Span kept{0, T};
  switch (policy.kind) {
    case TruncationPolicy::Kind::None:
      break;
    case TruncationPolicy::Kind::LSP: {
      // ceil(p*T), with slack so float representation error in p*T cannot
      // push an exact product across an integer boundary
      const double raw = policy.p * static_cast<double>(T);
      kept.end = static_cast<std::size_t>(std::ceil(raw - 1e-9));
      break;
    }
    case TruncationPolicy::Kind::LeftHalf:
      kept.end = (T + 1) / 2;  // ceil(T/2)
      break;
    case TruncationPolicy::Kind::RightHalf:
      kept.start = (T + 1) / 2;
      break;
  }
  if (kept.start >= kept.end)
    throw EmptyResult("truncation '" + policy.to_string() + "' keeps no tokens of " +
                      std::to_string(T));

  TruncatedExample out;
  out.token_ids.assign(token_ids.begin() + static_cast<std::ptrdiff_t>(kept.start),
                       token_ids.begin() + static_cast<std::ptrdiff_t>(kept.end));
  out.kept_range = kept;
  out.origin_length = T;
  return out;
}

std::pair<TruncatedExample, SupervisionMask> compose(const corpus::SegmentedExample& example,
                                                     TruncationPolicy policy,
                                                     SupervisionRegime regime) {
  TruncatedExample trunc = truncate(example.token_ids, policy);

  // clip each section to the kept window and shift into truncated coordinates
  std::vector<corpus::Span> clipped;
  for (const auto& s : regime_spans(example, regime)) {
    const std::size_t lo = std::max(s.start, trunc.kept_range.start);
    const std::size_t hi = std::min(s.end, trunc.kept_range.end);
    if (lo < hi) clipped.push_back({lo - trunc.kept_range.start, hi - trunc.kept_range.start});
  }
  SupervisionMask mask = mask_from_spans(clipped, trunc.token_ids.size(), regime);
  return {std::move(trunc), std::move(mask)};
}

void write_masks_jsonl(const std::string& path, const std::vector<SupervisionMask>& masks) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write mask dump: " + path);
  for (const auto& m : masks) {
    nlohmann::json j;
    j["bits"] = m.bits;
    out << j.dump() << "\n";
  }
}

}  // namespace cotkd::supervision

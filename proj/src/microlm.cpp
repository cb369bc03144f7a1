#include "cotkd/microlm.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cotkd/rng.hpp"

namespace cotkd::microlm {

namespace {

using nlohmann::json;

constexpr double kLnEps = 1e-5;
constexpr double kGeluC0 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;

double gelu(double x) {
  const double u = kGeluC0 * (x + kGeluC1 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
  const double u = kGeluC0 * (x + kGeluC1 * x * x * x);
  const double th = std::tanh(u);
  const double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * x * x);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
}

struct LnCache {
  Mat x_hat;                 // T x d, normalized input
  std::vector<double> rstd;  // per row
};

// y = x_hat .* w + b rowwise, with x_hat = (x - mean) * rstd
void ln_forward(const Mat& x, ConstMatMap w, ConstMatMap b, Mat& y, LnCache& c) {
  const auto T = x.rows();
  const auto d = x.cols();
  c.x_hat.resize(T, d);
  c.rstd.assign(static_cast<std::size_t>(T), 0.0);
  for (Eigen::Index i = 0; i < T; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    c.rstd[static_cast<std::size_t>(i)] = rstd;
    c.x_hat.row(i) = (x.row(i).array() - mu) * rstd;
  }
  y = c.x_hat;
  y.array().rowwise() *= w.row(0).array();
  y.rowwise() += b.row(0);
}

// accumulates dw/db, returns dx
Mat ln_backward(const Mat& dy, const LnCache& c, ConstMatMap w, MatMap dw, MatMap db) {
  const auto T = dy.rows();
  const auto d = dy.cols();
  dw.row(0) += (dy.array() * c.x_hat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  Mat dx(T, d);
  for (Eigen::Index i = 0; i < T; ++i) {
    Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(w.row(0));
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(c.x_hat.row(i)).mean();
    dx.row(i) =
        c.rstd[static_cast<std::size_t>(i)] *
        (dxhat.array() - m1 - c.x_hat.row(i).array() * m2);
  }
  return dx;
}

struct LayerCache {
  LnCache ln1, ln2;
  Mat ln1_out;           // T x d
  Mat qkv;               // T x 3d
  std::vector<Mat> att;  // per head, T x T softmax probabilities (causal)
  Mat att_out;           // T x d, heads concatenated, before the projection
  Mat x_mid;             // T x d, after the attention residual
  Mat ln2_out;           // T x d
  Mat fc_pre;            // T x 4d
  Mat fc_act;            // T x 4d
};

struct ForwardCache {
  Mat x0;  // embeddings
  std::vector<LayerCache> layers;
  LnCache lnf;
  Mat lnf_out;  // T x d
  Mat x_final;  // T x d, input of the final norm
};

void append_tensor(ModelParams& p, const std::string& name, std::size_t rows,
                   std::size_t cols) {
  TensorInfo t;
  t.name = name;
  t.offset = p.flat.size();
  t.rows = rows;
  t.cols = cols;
  p.flat.resize(p.flat.size() + rows * cols, 0.0);
  p.tensors.push_back(std::move(t));
}

// Full forward over all T positions; logits has T rows here (the public
// forward() drops the final row, which predicts nothing).
Mat forward_full(const ModelParams& params, const std::vector<int>& token_ids,
                 ForwardCache* cache) {
  const auto& cfg = params.config;
  const auto T = static_cast<Eigen::Index>(token_ids.size());
  const Eigen::Index d = cfg.d_model;
  const int nh = cfg.n_heads;
  const Eigen::Index hd = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  if (token_ids.size() > static_cast<std::size_t>(cfg.max_seq_len)) {
    throw SequenceTooLong("sequence of " + std::to_string(token_ids.size()) +
                          " tokens exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  for (int id : token_ids) {
    if (id < 0 || id >= cfg.vocab_size)
      throw ShapeMismatch("token id " + std::to_string(id) + " outside vocabulary of " +
                          std::to_string(cfg.vocab_size));
  }

  const auto wte = params.view("wte");
  const auto wpe = params.view("wpe");

  Mat x(T, d);
  for (Eigen::Index t = 0; t < T; ++t)
    x.row(t) = wte.row(token_ids[static_cast<std::size_t>(t)]) + wpe.row(t);
  if (cache) {
    cache->x0 = x;
    cache->layers.resize(static_cast<std::size_t>(cfg.n_layers));
  }

  LnCache scratch_ln;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "l" + std::to_string(l) + ".";
    LayerCache local;
    LayerCache& lc = cache ? cache->layers[static_cast<std::size_t>(l)] : local;

    // attention block
    ln_forward(x, params.view(pre + "ln1.w"), params.view(pre + "ln1.b"), lc.ln1_out, lc.ln1);
    lc.qkv.noalias() = lc.ln1_out * params.view(pre + "attn.qkv.w");
    lc.qkv.rowwise() += params.view(pre + "attn.qkv.b").row(0);

    lc.att.assign(static_cast<std::size_t>(nh), Mat());
    lc.att_out.resize(T, d);
    for (int h = 0; h < nh; ++h) {
      const auto Q = lc.qkv.block(0, h * hd, T, hd);
      const auto K = lc.qkv.block(0, d + h * hd, T, hd);
      const auto V = lc.qkv.block(0, 2 * d + h * hd, T, hd);
      Mat& P = lc.att[static_cast<std::size_t>(h)];
      P.setZero(T, T);
      for (Eigen::Index i = 0; i < T; ++i) {
        // causal row: keys 0..i only, max-shifted softmax
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j <= i; ++j) {
          P(i, j) = Q.row(i).dot(K.row(j)) * scale;
          mx = std::max(mx, P(i, j));
        }
        double sum = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          P(i, j) = std::exp(P(i, j) - mx);
          sum += P(i, j);
        }
        for (Eigen::Index j = 0; j <= i; ++j) P(i, j) /= sum;
      }
      lc.att_out.block(0, h * hd, T, hd).noalias() = P * V;
    }
    x.noalias() += lc.att_out * params.view(pre + "attn.proj.w");
    x.rowwise() += params.view(pre + "attn.proj.b").row(0);
    if (cache) lc.x_mid = x;

    // MLP block
    ln_forward(x, params.view(pre + "ln2.w"), params.view(pre + "ln2.b"), lc.ln2_out, lc.ln2);
    lc.fc_pre.noalias() = lc.ln2_out * params.view(pre + "mlp.fc.w");
    lc.fc_pre.rowwise() += params.view(pre + "mlp.fc.b").row(0);
    lc.fc_act = lc.fc_pre.unaryExpr([](double v) { return gelu(v); });
    x.noalias() += lc.fc_act * params.view(pre + "mlp.proj.w");
    x.rowwise() += params.view(pre + "mlp.proj.b").row(0);
  }

  Mat lnf_out;
  LnCache& lnf_cache = cache ? cache->lnf : scratch_ln;
  if (cache) cache->x_final = x;
  ln_forward(x, params.view("lnf.w"), params.view("lnf.b"), lnf_out, lnf_cache);
  if (cache) cache->lnf_out = lnf_out;

  Mat logits;
  logits.noalias() = lnf_out * params.view("head.w");
  return logits;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || max_seq_len <= 0)
    throw ConfigError("d_model, n_layers, n_heads and max_seq_len must be positive");
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
}

std::string ModelConfig::to_json() const {
  json j{{"vocab_size", vocab_size},   {"d_model", d_model},
         {"n_layers", n_layers},       {"n_heads", n_heads},
         {"max_seq_len", max_seq_len}, {"seed", seed},
         {"init_std", init_std}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
  }
  ModelConfig c;
  try {
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("init_std")) c.init_std = j.at("init_std").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config field error: ") + e.what());
  }
  c.validate();
  return c;
}

const TensorInfo& ModelParams::info(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ConfigError("unknown parameter tensor '" + name + "'");
}

MatMap ModelParams::view(const TensorInfo& t) {
  return MatMap(flat.data() + t.offset, static_cast<Eigen::Index>(t.rows),
                static_cast<Eigen::Index>(t.cols));
}

ConstMatMap ModelParams::view(const TensorInfo& t) const {
  return ConstMatMap(flat.data() + t.offset, static_cast<Eigen::Index>(t.rows),
                     static_cast<Eigen::Index>(t.cols));
}

MatMap ModelParams::view(const std::string& name) { return view(info(name)); }
ConstMatMap ModelParams::view(const std::string& name) const { return view(info(name)); }

ModelParams init_model(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;

  const auto V = static_cast<std::size_t>(config.vocab_size);
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto maxT = static_cast<std::size_t>(config.max_seq_len);

  append_tensor(p, "wte", V, d);
  append_tensor(p, "wpe", maxT, d);
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string pre = "l" + std::to_string(l) + ".";
    append_tensor(p, pre + "ln1.w", 1, d);
    append_tensor(p, pre + "ln1.b", 1, d);
    append_tensor(p, pre + "attn.qkv.w", d, 3 * d);
    append_tensor(p, pre + "attn.qkv.b", 1, 3 * d);
    append_tensor(p, pre + "attn.proj.w", d, d);
    append_tensor(p, pre + "attn.proj.b", 1, d);
    append_tensor(p, pre + "ln2.w", 1, d);
    append_tensor(p, pre + "ln2.b", 1, d);
    append_tensor(p, pre + "mlp.fc.w", d, 4 * d);
    append_tensor(p, pre + "mlp.fc.b", 1, 4 * d);
    append_tensor(p, pre + "mlp.proj.w", 4 * d, d);
    append_tensor(p, pre + "mlp.proj.b", 1, d);
  }
  append_tensor(p, "lnf.w", 1, d);
  append_tensor(p, "lnf.b", 1, d);
  append_tensor(p, "head.w", d, V);

  Rng rng(config.seed);
  for (const auto& t : p.tensors) {
    const bool is_ln_weight = t.name.ends_with("ln1.w") || t.name.ends_with("ln2.w") ||
                              t.name == "lnf.w";
    const bool is_bias = t.name.ends_with(".b");
    double* base = p.flat.data() + t.offset;
    if (is_ln_weight) {
      std::fill(base, base + t.size(), 1.0);
    } else if (is_bias) {
      std::fill(base, base + t.size(), 0.0);
    } else {
      for (std::size_t i = 0; i < t.size(); ++i) base[i] = rng.normal() * config.init_std;
    }
  }
  return p;
}

kdloss::LogitsMatrix forward(const ModelParams& params, const std::vector<int>& token_ids) {
  const Mat logits = forward_full(params, token_ids, nullptr);
  const std::size_t T = token_ids.size();
  const std::size_t rows = T >= 1 ? T - 1 : 0;
  kdloss::LogitsMatrix out(rows, static_cast<std::size_t>(params.config.vocab_size));
  for (std::size_t t = 0; t < rows; ++t) {
    const auto* src = logits.row(static_cast<Eigen::Index>(t)).data();
    std::copy(src, src + out.vocab, out.row(t));
  }
  return out;
}

std::pair<kdloss::LossBreakdown, Gradients> loss_and_grads(
    const ModelParams& params, const std::vector<int>& token_ids,
    const std::vector<int>& labels, const supervision::SupervisionMask& mask, double lambda,
    const kdloss::LogitsMatrix& teacher_logits, kdloss::Reduction reduction) {
  const auto& cfg = params.config;
  const std::size_t T = token_ids.size();
  if (T < 1) throw ShapeMismatch("cannot train on an empty sequence");
  const std::size_t L = T - 1;  // label positions
  const auto V = static_cast<std::size_t>(cfg.vocab_size);

  if (labels.size() != L)
    throw ShapeMismatch("got " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(L) + " label positions");
  if (mask.bits.size() != L)
    throw ShapeMismatch("mask has " + std::to_string(mask.bits.size()) + " bits for " +
                        std::to_string(L) + " label positions");
  const bool have_teacher = teacher_logits.positions > 0 || teacher_logits.vocab > 0;
  if (lambda > 0.0 && !have_teacher)
    throw ShapeMismatch("lambda > 0 requires teacher logits");
  if (have_teacher && (teacher_logits.positions != L || teacher_logits.vocab != V))
    throw ShapeMismatch("teacher logits are " + std::to_string(teacher_logits.positions) +
                        "x" + std::to_string(teacher_logits.vocab) + ", need " +
                        std::to_string(L) + "x" + std::to_string(V));

  ForwardCache cache;
  const Mat logits = forward_full(params, token_ids, &cache);

  // loss bookkeeping via the kdloss module, on the label rows only
  kdloss::LogitsMatrix student(L, V);
  for (std::size_t t = 0; t < L; ++t) {
    const auto* src = logits.row(static_cast<Eigen::Index>(t)).data();
    std::copy(src, src + V, student.row(t));
  }
  kdloss::LossBreakdown breakdown;
  if (have_teacher) {
    breakdown = kdloss::combined_loss(teacher_logits, student, labels, mask, lambda, reduction);
  } else {
    breakdown.lambda = lambda;
    breakdown.reduction = reduction;
    breakdown.n_supervised = mask.n_supervised();
    breakdown.soft = 0.0;
    breakdown.hard = kdloss::hard_loss(student, labels, mask, reduction);
    breakdown.combined = breakdown.hard;
  }

  // d(loss)/d(logits): rows for unmasked or final positions stay zero
  const std::size_t n_sup = breakdown.n_supervised;
  const double inv = reduction == kdloss::Reduction::Mean
                         ? (n_sup > 0 ? 1.0 / static_cast<double>(n_sup) : 0.0)
                         : 1.0;
  Mat dlogits = Mat::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(V));
  std::vector<double> row(V), p_t(V);
  for (std::size_t t = 0; t < L; ++t) {
    if (!mask.bits[t]) continue;
    const double* src = student.row(t);
    std::copy(src, src + V, row.begin());
    const std::vector<double> p_s = kdloss::softmax(row);
    auto drow = dlogits.row(static_cast<Eigen::Index>(t));
    for (std::size_t v = 0; v < V; ++v) drow(static_cast<Eigen::Index>(v)) = p_s[v];
    if (lambda > 0.0) {
      const double* tsrc = teacher_logits.row(t);
      std::copy(tsrc, tsrc + V, row.begin());
      const std::vector<double> pt = kdloss::softmax(row);
      for (std::size_t v = 0; v < V; ++v)
        drow(static_cast<Eigen::Index>(v)) -= lambda * pt[v];
    }
    drow(static_cast<Eigen::Index>(labels[t])) -= (1.0 - lambda);
    drow *= inv;
  }

  // backward pass
  ModelParams grads_holder;  // reuse the tensor registry for gradient views
  grads_holder.config = cfg;
  grads_holder.tensors = params.tensors;
  grads_holder.flat.assign(params.flat.size(), 0.0);

  const Eigen::Index Ti = static_cast<Eigen::Index>(T);
  const Eigen::Index d = cfg.d_model;
  const int nh = cfg.n_heads;
  const Eigen::Index hd = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  // head
  grads_holder.view("head.w").noalias() += cache.lnf_out.transpose() * dlogits;
  Mat dx = dlogits * params.view("head.w").transpose();
  dx = ln_backward(dx, cache.lnf, params.view("lnf.w"), grads_holder.view("lnf.w"),
                   grads_holder.view("lnf.b"));

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const std::string pre = "l" + std::to_string(l) + ".";
    LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];

    // MLP block backward
    grads_holder.view(pre + "mlp.proj.w").noalias() += lc.fc_act.transpose() * dx;
    grads_holder.view(pre + "mlp.proj.b").row(0) += dx.colwise().sum();
    Mat dact = dx * params.view(pre + "mlp.proj.w").transpose();
    Mat dfc_pre =
        dact.binaryExpr(lc.fc_pre, [](double g, double x) { return g * gelu_grad(x); });
    grads_holder.view(pre + "mlp.fc.w").noalias() += lc.ln2_out.transpose() * dfc_pre;
    grads_holder.view(pre + "mlp.fc.b").row(0) += dfc_pre.colwise().sum();
    Mat dln2_out = dfc_pre * params.view(pre + "mlp.fc.w").transpose();
    dx += ln_backward(dln2_out, lc.ln2, params.view(pre + "ln2.w"),
                      grads_holder.view(pre + "ln2.w"), grads_holder.view(pre + "ln2.b"));

    // attention block backward
    grads_holder.view(pre + "attn.proj.w").noalias() += lc.att_out.transpose() * dx;
    grads_holder.view(pre + "attn.proj.b").row(0) += dx.colwise().sum();
    Mat datt_out = dx * params.view(pre + "attn.proj.w").transpose();

    Mat dqkv = Mat::Zero(Ti, 3 * d);
    for (int h = 0; h < nh; ++h) {
      const auto Q = lc.qkv.block(0, h * hd, Ti, hd);
      const auto K = lc.qkv.block(0, d + h * hd, Ti, hd);
      const auto V_h = lc.qkv.block(0, 2 * d + h * hd, Ti, hd);
      const Mat& P = lc.att[static_cast<std::size_t>(h)];
      const auto dY = datt_out.block(0, h * hd, Ti, hd);

      dqkv.block(0, 2 * d + h * hd, Ti, hd).noalias() += P.transpose() * dY;
      Mat dP(Ti, Ti);
      dP.noalias() = dY * V_h.transpose();
      Mat dS = Mat::Zero(Ti, Ti);
      for (Eigen::Index i = 0; i < Ti; ++i) {
        double dot = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) dot += dP(i, j) * P(i, j);
        for (Eigen::Index j = 0; j <= i; ++j) dS(i, j) = P(i, j) * (dP(i, j) - dot);
      }
      dqkv.block(0, h * hd, Ti, hd).noalias() += scale * (dS * K);
      dqkv.block(0, d + h * hd, Ti, hd).noalias() += scale * (dS.transpose() * Q);
    }

    grads_holder.view(pre + "attn.qkv.w").noalias() += lc.ln1_out.transpose() * dqkv;
    grads_holder.view(pre + "attn.qkv.b").row(0) += dqkv.colwise().sum();
    Mat dln1_out = dqkv * params.view(pre + "attn.qkv.w").transpose();
    dx += ln_backward(dln1_out, lc.ln1, params.view(pre + "ln1.w"),
                      grads_holder.view(pre + "ln1.w"), grads_holder.view(pre + "ln1.b"));
  }

  // embeddings
  auto dwte = grads_holder.view("wte");
  auto dwpe = grads_holder.view("wpe");
  for (Eigen::Index t = 0; t < Ti; ++t) {
    dwte.row(token_ids[static_cast<std::size_t>(t)]) += dx.row(t);
    dwpe.row(t) += dx.row(t);
  }

  return {breakdown, std::move(grads_holder.flat)};
}

OptimizerState OptimizerState::init(const ModelParams& params, const AdamWConfig& config) {
  OptimizerState s;
  s.config = config;
  s.m.assign(params.n_params(), 0.0);
  s.v.assign(params.n_params(), 0.0);
  s.step = 0;
  return s;
}

void adamw_step(ModelParams& params, const Gradients& grads, OptimizerState& state) {
  if (grads.size() != params.n_params() || state.m.size() != params.n_params())
    throw ShapeMismatch("gradient/optimizer buffers do not match the parameter count");
  const auto& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    // decoupled weight decay: the decay term never touches the moments
    params.flat[i] -= c.lr * (m_hat / (std::sqrt(v_hat) + c.eps) + c.weight_decay * params.flat[i]);
  }
}

// ---- checkpoint IO -----------------------------------------------------------

namespace {
constexpr char kCkptMagic[4] = {'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCkptMagic, 4);
  out.write(reinterpret_cast<const char*>(&kCkptVersion), sizeof kCkptVersion);
  const std::string cfg = params.config.to_json();
  const std::uint64_t len = cfg.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  std::vector<float> buf;
  for (const auto& t : params.tensors) {
    buf.resize(t.size());
    const double* base = params.flat.data() + t.offset;
    for (std::size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(base[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(sizeof(float) * buf.size()));
  }
  if (!out) throw IoError("short write on checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kCkptVersion)
    throw IoError("unsupported checkpoint version: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in) throw IoError("truncated checkpoint: " + path);
  std::string cfg(len, '\0');
  in.read(cfg.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint: " + path);

  ModelParams params = init_model(ModelConfig::from_json(cfg));
  std::vector<float> buf;
  for (const auto& t : params.tensors) {
    buf.resize(t.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(sizeof(float) * buf.size()));
    if (!in) throw IoError("truncated checkpoint: " + path);
    double* base = params.flat.data() + t.offset;
    for (std::size_t i = 0; i < t.size(); ++i) base[i] = static_cast<double>(buf[i]);
  }
  return params;
}

}  // namespace cotkd::microlm

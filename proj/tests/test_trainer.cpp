// Tests for the training orchestrator: example preparation, masked
// evaluation, the accumulate-then-step loop (checked against a hand-rolled
// replica), checkpoint selection, curve smoothing, and relative-difference
// reporting.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "cotkd/corpus.hpp"
#include "cotkd/error.hpp"
#include "cotkd/kdloss.hpp"
#include "cotkd/microlm.hpp"
#include "cotkd/rng.hpp"
#include "cotkd/supervision.hpp"
#include "cotkd/tokenizer.hpp"
#include "cotkd/trainer.hpp"

using namespace cotkd;
using supervision::SupervisionRegime;
using supervision::TruncationPolicy;

namespace {

std::vector<corpus::SegmentedExample> tiny_corpus(std::size_t n, std::uint64_t seed) {
  corpus::SyntheticCorpusConfig cfg;
  cfg.n_examples = n;
  cfg.seed = seed;
  cfg.vocab_seed = 4;
  cfg.mean_prompt_tokens = 30;
  cfg.mean_cot_tokens = 60;
  cfg.mean_answer_tokens = 16;
  cfg.derivation_position = 0.5;
  cfg.n_reflections = 1;
  cfg.chat_template = corpus::ChatTemplate::minimal();
  return corpus::generate_synthetic_corpus(cfg);
}

microlm::ModelConfig student_config(std::uint64_t seed) {
  microlm::ModelConfig cfg;
  cfg.vocab_size = 258;  // byte tokenizer with the two reasoning markers
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.max_seq_len = 1024;
  cfg.seed = seed;
  cfg.init_std = 0.02;
  return cfg;
}

corpus::SegmentedExample segment_text(const std::string& text) {
  static const Tokenizer tok = Tokenizer::byte_level();
  return corpus::segment(text, tok);
}

std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

// ---- smooth_curve -----------------------------------------------------------

TEST_CASE("smooth_curve with window 1 is the identity") {
  const std::vector<double> xs = {3.0, -1.0, 4.5, 0.0};
  CHECK(trainer::smooth_curve(xs, 1) == xs);
}

TEST_CASE("smooth_curve leaves constant series unchanged") {
  const std::vector<double> xs(17, 2.5);
  for (std::size_t w : {2, 5, 100}) {
    auto s = trainer::smooth_curve(xs, w);
    REQUIRE(s.size() == xs.size());
    for (double v : s) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  }
}

TEST_CASE("smooth_curve hand example: prefix warm-up") {
  auto s = trainer::smooth_curve({1.0, 2.0, 3.0, 4.0}, 2);
  REQUIRE(s.size() == 4);
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == doctest::Approx(1.5));
  CHECK(s[2] == doctest::Approx(2.5));
  CHECK(s[3] == doctest::Approx(3.5));
}

TEST_CASE("smooth_curve matches a brute-force prefix-mean reference") {
  Rng rng(12);
  std::vector<double> xs(37);
  for (auto& x : xs) x = rng.uniform() * 10.0 - 5.0;
  for (std::size_t w : {2, 3, 7, 36, 37, 500}) {
    auto got = trainer::smooth_curve(xs, w);
    REQUIRE(got.size() == xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
      double sum = 0.0;
      for (std::size_t j = lo; j <= i; ++j) sum += xs[j];
      const double want = sum / static_cast<double>(i - lo + 1);
      REQUIRE(got[i] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("smooth_curve rejects a zero window") {
  CHECK_THROWS_AS(trainer::smooth_curve({1.0}, 0), ConfigError);
}

// ---- relative_difference ------------------------------------------------------

TEST_CASE("relative_difference of identical curves is zero everywhere") {
  const std::vector<double> ref = {1.0, 2.0, 0.5, 3.25};
  auto stats = trainer::relative_difference(ref, ref);
  CHECK(stats.avg_rel_diff == 0.0);
  CHECK(stats.last_rel_diff == 0.0);
  REQUIRE(stats.series.size() == ref.size());
  for (double v : stats.series) CHECK(v == 0.0);
}

TEST_CASE("relative_difference: uniformly 10 percent below the reference") {
  const std::vector<double> ref(8, 1.0);
  const std::vector<double> cand(8, 0.9);
  auto stats = trainer::relative_difference(cand, ref);
  CHECK(stats.avg_rel_diff == doctest::Approx(-10.0).epsilon(1e-12));
  CHECK(stats.last_rel_diff == doctest::Approx(-10.0).epsilon(1e-12));
  for (double v : stats.series) CHECK(v == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("relative_difference hand example with mixed signs") {
  // (1.2-1.0)/1.0 = +20%, (1.5-2.0)/2.0 = -25%, (4.4-4.0)/4.0 = +10%
  auto stats = trainer::relative_difference({1.2, 1.5, 4.4}, {1.0, 2.0, 4.0});
  REQUIRE(stats.series.size() == 3);
  CHECK(stats.series[0] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(stats.series[1] == doctest::Approx(-25.0).epsilon(1e-12));
  CHECK(stats.series[2] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(stats.avg_rel_diff == doctest::Approx((20.0 - 25.0 + 10.0) / 3.0).epsilon(1e-12));
  CHECK(stats.last_rel_diff == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("relative_difference sign convention: lower candidate loss is negative") {
  auto stats = trainer::relative_difference({0.5}, {1.0});
  CHECK(stats.series[0] < 0.0);
}

TEST_CASE("relative_difference validates lengths and reference positivity") {
  CHECK_THROWS_AS(trainer::relative_difference({1.0, 2.0}, {1.0}), LengthMismatch);
  CHECK_THROWS_AS(trainer::relative_difference({}, {}), LengthMismatch);
  CHECK_THROWS_AS(trainer::relative_difference({1.0}, {0.0}), NonpositiveReference);
  CHECK_THROWS_AS(trainer::relative_difference({1.0}, {-2.0}), NonpositiveReference);
}

// ---- prepare_examples ---------------------------------------------------------

TEST_CASE("prepare_examples shifts labels and tags ids with pre-drop indices") {
  auto corpus = tiny_corpus(6, 21);
  std::size_t skipped = 99;
  auto prep = trainer::prepare_examples(corpus, TruncationPolicy::none(),
                                        SupervisionRegime::P_COT_A, "train", &skipped);
  REQUIRE(prep.size() == corpus.size());
  CHECK(skipped == 0);
  for (std::size_t i = 0; i < prep.size(); ++i) {
    const auto& p = prep[i];
    CHECK(p.id == "train-" + std::to_string(i));
    REQUIRE(p.tokens.size() == corpus[i].token_ids.size());
    REQUIRE(p.labels.size() == p.tokens.size() - 1);
    for (std::size_t t = 0; t < p.labels.size(); ++t)
      REQUIRE(p.labels[t] == p.tokens[t + 1]);
    CHECK(p.mask.bits.size() == p.labels.size());
    CHECK(p.mask.n_supervised() == p.labels.size());  // full supervision
  }
}

TEST_CASE("prepare_examples drops degenerate examples and counts them") {
  // Two hand-built examples with very different prompt lengths: cutting at
  // 30% of the sequence keeps some reasoning tokens only for the short one.
  const std::string short_prompt = "ab<think>cccccccccccccccccccc</think>dd";
  const std::string long_prompt =
      "this prompt occupies far more than thirty percent of the whole sequence"
      "<think>xy</think>zz";
  std::vector<corpus::SegmentedExample> corpus = {segment_text(short_prompt),
                                                  segment_text(long_prompt)};
  std::size_t skipped = 0;
  auto prep = trainer::prepare_examples(corpus, TruncationPolicy::lsp(0.3),
                                        SupervisionRegime::COT, "train", &skipped);
  REQUIRE(prep.size() == 1);
  CHECK(skipped == 1);
  CHECK(prep[0].id == "train-0");  // index before dropping
  CHECK(prep[0].mask.n_supervised() > 0);
}

// ---- mean_masked_loss / token_accuracy ------------------------------------------

TEST_CASE("mean_masked_loss is the position-weighted mean of per-example sums") {
  auto corpus = tiny_corpus(5, 31);
  auto params = microlm::init_model(student_config(11));

  std::size_t skipped = 0;
  auto prep = trainer::prepare_examples(corpus, TruncationPolicy::none(),
                                        SupervisionRegime::COT_A, "e", &skipped);
  REQUIRE(!prep.empty());

  trainer::NullTeacher none;
  const double got = trainer::mean_masked_loss(params, prep, none, 0.0);

  long double total = 0.0L;
  std::size_t positions = 0;
  for (const auto& ex : prep) {
    auto logits = microlm::forward(params, ex.tokens);
    total += kdloss::hard_loss(logits, ex.labels, ex.mask, kdloss::Reduction::Sum);
    positions += ex.mask.n_supervised();
  }
  REQUIRE(positions > 0);
  CHECK(got == doctest::Approx(static_cast<double>(total / positions)).epsilon(1e-12));

  SUBCASE("weighting differs from the naive per-example mean when sizes differ") {
    double naive = 0.0;
    for (const auto& ex : prep) {
      auto logits = microlm::forward(params, ex.tokens);
      naive += kdloss::hard_loss(logits, ex.labels, ex.mask, kdloss::Reduction::Mean);
    }
    naive /= static_cast<double>(prep.size());
    bool same_size = true;
    for (const auto& ex : prep) same_size &= ex.mask.n_supervised() == prep[0].mask.n_supervised();
    if (!same_size) CHECK(got != naive);
  }
}

TEST_CASE("mean_masked_loss blends in the teacher when lambda is positive") {
  auto corpus = tiny_corpus(3, 7);
  auto params = microlm::init_model(student_config(11));
  trainer::ModelTeacher teacher(microlm::init_model(student_config(99)));

  std::size_t skipped = 0;
  auto prep = trainer::prepare_examples(corpus, TruncationPolicy::none(),
                                        SupervisionRegime::P_COT_A, "e", &skipped);

  const double got = trainer::mean_masked_loss(params, prep, teacher, 0.5);

  long double total = 0.0L;
  std::size_t positions = 0;
  for (const auto& ex : prep) {
    auto student = microlm::forward(params, ex.tokens);
    auto tl = teacher.logits_for(ex.tokens, ex.id);
    total += kdloss::combined_loss(tl, student, ex.labels, ex.mask, 0.5,
                                   kdloss::Reduction::Sum)
                 .combined;
    positions += ex.mask.n_supervised();
  }
  CHECK(got == doctest::Approx(static_cast<double>(total / positions)).epsilon(1e-12));

  trainer::NullTeacher none;
  CHECK_THROWS_AS(trainer::mean_masked_loss(params, {}, none, 0.0), EmptyCorpus);
}

TEST_CASE("token_accuracy counts greedy hits over the regime's positions") {
  auto corpus = tiny_corpus(4, 17);
  auto params = microlm::init_model(student_config(5));
  const double got = trainer::token_accuracy(params, corpus, SupervisionRegime::A);

  std::size_t hits = 0, total = 0;
  for (const auto& ex : corpus) {
    auto mask = supervision::build_mask(ex, SupervisionRegime::A);
    auto logits = microlm::forward(params, ex.token_ids);
    for (std::size_t t = 0; t < mask.bits.size(); ++t) {
      if (!mask.bits[t]) continue;
      const double* row = logits.row(static_cast<Eigen::Index>(t));
      int best = 0;
      for (int v = 1; v < logits.vocab; ++v)
        if (row[v] > row[best]) best = v;
      hits += best == ex.token_ids[t + 1] ? 1 : 0;
      ++total;
    }
  }
  REQUIRE(total > 0);
  CHECK(got == doctest::Approx(static_cast<double>(hits) / total).epsilon(1e-15));
  CHECK(got >= 0.0);
  CHECK(got <= 1.0);
}

// ---- the training loop ----------------------------------------------------------

TEST_CASE("train matches a hand-rolled accumulate-then-step replica") {
  auto train_corpus = tiny_corpus(7, 41);
  auto valid_corpus = tiny_corpus(3, 42);
  auto scfg = student_config(13);

  trainer::TrainConfig tc;
  tc.epochs = 2;
  tc.lr = 1e-3;
  tc.weight_decay = 0.01;
  tc.grad_accum_steps = 3;
  tc.micro_batch = 1;
  tc.lambda = 0.0;
  tc.regime = SupervisionRegime::P_COT_A;
  tc.truncation = TruncationPolicy::none();
  tc.seed = 71;

  trainer::NullTeacher none;
  auto report = trainer::train(train_corpus, valid_corpus, none, scfg, tc);

  // Replica: same preparation, same shuffle stream, mean-of-window gradients,
  // one optimizer step per window, validation at each epoch end.
  std::size_t skipped = 0;
  auto prep = trainer::prepare_examples(train_corpus, tc.truncation, tc.regime, "train",
                                        &skipped);
  auto vprep = trainer::prepare_examples(valid_corpus, tc.truncation, tc.regime, "valid",
                                         &skipped);
  auto params = microlm::init_model(scfg);
  microlm::AdamWConfig ocfg;
  ocfg.lr = tc.lr;
  ocfg.weight_decay = tc.weight_decay;
  auto opt = microlm::OptimizerState::init(params, ocfg);

  const int window_size = tc.micro_batch * tc.grad_accum_steps;
  std::vector<double> acc(params.n_params(), 0.0);
  double wsoft = 0, whard = 0, wcomb = 0;
  std::size_t wn = 0;
  int count = 0;
  std::vector<trainer::StepLoss> steps;
  std::vector<double> val_losses;
  kdloss::LogitsMatrix no_teacher;

  auto flush = [&]() {
    if (count == 0) return;
    const double inv = 1.0 / count;
    for (auto& g : acc) g *= inv;
    microlm::adamw_step(params, acc, opt);
    trainer::StepLoss s;
    s.step = static_cast<std::int64_t>(steps.size()) + 1;
    s.soft = wsoft * inv;
    s.hard = whard * inv;
    s.combined = wcomb * inv;
    s.n_supervised = wn;
    steps.push_back(s);
    std::fill(acc.begin(), acc.end(), 0.0);
    wsoft = whard = wcomb = 0;
    wn = 0;
    count = 0;
  };

  Rng order_rng(tc.seed);
  std::vector<std::size_t> order(prep.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t idx : order) {
      const auto& ex = prep[idx];
      auto [breakdown, grads] = microlm::loss_and_grads(params, ex.tokens, ex.labels,
                                                        ex.mask, 0.0, no_teacher);
      for (std::size_t i = 0; i < grads.size(); ++i) acc[i] += grads[i];
      wsoft += breakdown.soft;
      whard += breakdown.hard;
      wcomb += breakdown.combined;
      wn += breakdown.n_supervised;
      if (++count == window_size) flush();
    }
    flush();
    val_losses.push_back(trainer::mean_masked_loss(params, vprep, none, 0.0));
  }

  REQUIRE(report.steps.size() == steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    CHECK(report.steps[i].step == steps[i].step);
    REQUIRE(report.steps[i].combined == doctest::Approx(steps[i].combined).epsilon(1e-12));
    REQUIRE(report.steps[i].hard == doctest::Approx(steps[i].hard).epsilon(1e-12));
    CHECK(report.steps[i].n_supervised == steps[i].n_supervised);
  }
  REQUIRE(report.validations.size() == val_losses.size());
  for (std::size_t i = 0; i < val_losses.size(); ++i)
    REQUIRE(report.validations[i].loss == doctest::Approx(val_losses[i]).epsilon(1e-12));
  REQUIRE(report.final_params.n_params() == params.n_params());
  for (std::size_t i = 0; i < params.n_params(); ++i)
    REQUIRE(report.final_params.flat[i] == doctest::Approx(params.flat[i]).epsilon(1e-12));
}

TEST_CASE("training descends on learnable synthetic data") {
  auto train_corpus = tiny_corpus(40, 51);
  auto valid_corpus = tiny_corpus(6, 52);

  trainer::TrainConfig tc;
  tc.epochs = 2;
  tc.lr = 2e-3;
  tc.weight_decay = 0.0;
  tc.grad_accum_steps = 8;
  tc.lambda = 0.0;
  tc.seed = 3;

  trainer::NullTeacher none;
  auto report = trainer::train(train_corpus, valid_corpus, none, student_config(1), tc);
  REQUIRE(!report.steps.empty());
  for (const auto& s : report.steps) {
    REQUIRE(std::isfinite(s.combined));
    REQUIRE(std::isfinite(s.hard));
  }
  CHECK(report.steps.back().combined <= report.steps.front().combined);
  CHECK(report.trained_examples == 40);
  CHECK(report.skipped_degenerate == 0);
}

TEST_CASE("identical config and seeds reproduce the run exactly") {
  auto train_corpus = tiny_corpus(8, 61);
  auto valid_corpus = tiny_corpus(2, 62);

  trainer::TrainConfig tc;
  tc.epochs = 1;
  tc.lr = 1e-3;
  tc.grad_accum_steps = 4;
  tc.lambda = 0.5;
  tc.seed = 9;

  trainer::ModelTeacher t1(microlm::init_model(student_config(77)));
  trainer::ModelTeacher t2(microlm::init_model(student_config(77)));
  auto r1 = trainer::train(train_corpus, valid_corpus, t1, student_config(2), tc);
  auto r2 = trainer::train(train_corpus, valid_corpus, t2, student_config(2), tc);

  CHECK(trainer::report_to_json(r1) == trainer::report_to_json(r2));
  REQUIRE(r1.final_params.n_params() == r2.final_params.n_params());
  for (std::size_t i = 0; i < r1.final_params.n_params(); ++i)
    REQUIRE(r1.final_params.flat[i] == r2.final_params.flat[i]);
}

TEST_CASE("pure distillation from the student's own initialization stays at zero") {
  auto train_corpus = tiny_corpus(6, 71);
  auto valid_corpus = tiny_corpus(2, 72);
  auto scfg = student_config(33);

  trainer::TrainConfig tc;
  tc.epochs = 1;
  tc.lr = 0.0;  // frozen student: the soft target never moves away
  tc.weight_decay = 0.0;
  tc.grad_accum_steps = 2;
  tc.lambda = 1.0;
  tc.seed = 5;

  trainer::ModelTeacher teacher(microlm::init_model(scfg));  // same seed -> same weights
  auto report = trainer::train(train_corpus, valid_corpus, teacher, scfg, tc);
  REQUIRE(!report.steps.empty());
  for (const auto& s : report.steps) {
    CHECK(s.soft == 0.0);
    CHECK(s.combined == 0.0);
  }
  for (const auto& v : report.validations) CHECK(v.loss == 0.0);
}

TEST_CASE("only the product micro_batch x grad_accum_steps matters") {
  auto train_corpus = tiny_corpus(8, 81);
  auto valid_corpus = tiny_corpus(2, 82);

  trainer::TrainConfig a;
  a.epochs = 1;
  a.lr = 1e-3;
  a.grad_accum_steps = 4;
  a.micro_batch = 1;
  a.lambda = 0.0;
  a.seed = 19;

  trainer::TrainConfig b = a;
  b.grad_accum_steps = 1;
  b.micro_batch = 4;

  trainer::NullTeacher none;
  auto ra = trainer::train(train_corpus, valid_corpus, none, student_config(3), a);
  auto rb = trainer::train(train_corpus, valid_corpus, none, student_config(3), b);
  REQUIRE(ra.steps.size() == rb.steps.size());
  for (std::size_t i = 0; i < ra.final_params.n_params(); ++i)
    REQUIRE(std::fabs(ra.final_params.flat[i] - rb.final_params.flat[i]) <= 1e-6);
}

TEST_CASE("checkpoint selection takes the minimum validation loss, earliest on ties") {
  auto train_corpus = tiny_corpus(10, 91);
  auto valid_corpus = tiny_corpus(3, 92);
  const std::string dir = temp_dir("cotkd_trainer_ckpt_test");

  trainer::TrainConfig tc;
  tc.epochs = 2;
  tc.lr = 5e-3;  // deliberately jumpy so validation wobbles
  tc.grad_accum_steps = 2;
  tc.lambda = 0.0;
  tc.seed = 23;
  tc.validate_every_steps = 1;
  tc.run_dir = dir;

  trainer::NullTeacher none;
  auto report = trainer::train(train_corpus, valid_corpus, none, student_config(4), tc);
  REQUIRE(report.validations.size() >= 2);

  double min_loss = std::numeric_limits<double>::infinity();
  std::string earliest;
  for (const auto& v : report.validations) {
    if (v.loss < min_loss) {
      min_loss = v.loss;
      earliest = v.checkpoint_id;
    }
  }
  CHECK(report.selected_checkpoint == earliest);
  for (const auto& v : report.validations) CHECK(min_loss <= v.loss);

  // the persisted best checkpoint is byte-identical to the selected one
  auto best = read_bytes(dir + "/best.bin");
  auto selected = read_bytes(dir + "/" + report.selected_checkpoint + ".bin");
  CHECK(best == selected);
  CHECK(std::filesystem::exists(dir + "/final.bin"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("validation cadence: once per epoch by default, deduplicated steps") {
  auto train_corpus = tiny_corpus(6, 95);
  auto valid_corpus = tiny_corpus(2, 96);

  trainer::TrainConfig tc;
  tc.epochs = 3;
  tc.lr = 1e-3;
  tc.grad_accum_steps = 2;
  tc.lambda = 0.0;
  tc.seed = 7;

  trainer::NullTeacher none;
  auto report = trainer::train(train_corpus, valid_corpus, none, student_config(6), tc);
  REQUIRE(report.validations.size() == 3);  // one per epoch end

  SUBCASE("per-step cadence never records the same step twice") {
    tc.validate_every_steps = 1;
    auto r2 = trainer::train(train_corpus, valid_corpus, none, student_config(6), tc);
    for (std::size_t i = 1; i < r2.validations.size(); ++i)
      REQUIRE(r2.validations[i].step > r2.validations[i - 1].step);
    CHECK(r2.validations.size() == r2.steps.size());  // epoch ends coincide with steps
  }
}

TEST_CASE("a regime annihilated by truncation aborts the run") {
  auto train_corpus = tiny_corpus(4, 97);
  auto valid_corpus = tiny_corpus(2, 98);

  trainer::TrainConfig tc;
  tc.lambda = 0.0;
  tc.seed = 1;
  tc.regime = SupervisionRegime::A;           // answers sit at the very end...
  tc.truncation = TruncationPolicy::lsp(0.2);  // ...and the cut removes them all

  trainer::NullTeacher none;
  CHECK_THROWS_AS(trainer::train(train_corpus, valid_corpus, none, student_config(8), tc),
                  EmptyCorpus);
}

TEST_CASE("train config validation rejects out-of-range values") {
  trainer::TrainConfig tc;
  SUBCASE("epochs") { tc.epochs = 0; }
  SUBCASE("lambda") { tc.lambda = 1.5; }
  SUBCASE("accum") { tc.grad_accum_steps = 0; }
  SUBCASE("micro batch") { tc.micro_batch = 0; }
  SUBCASE("lr") { tc.lr = -1.0; }
  SUBCASE("weight decay") { tc.weight_decay = -0.1; }
  SUBCASE("cadence") { tc.validate_every_steps = -1; }
  CHECK_THROWS_AS(tc.validate(), ConfigError);
}

TEST_CASE("distillation without a teacher fails loudly") {
  auto train_corpus = tiny_corpus(3, 99);
  auto valid_corpus = tiny_corpus(2, 100);
  trainer::TrainConfig tc;
  tc.lambda = 0.5;
  tc.seed = 1;
  trainer::NullTeacher none;
  CHECK_THROWS_AS(trainer::train(train_corpus, valid_corpus, none, student_config(9), tc),
                  ShapeMismatch);
}

// ---- teachers -------------------------------------------------------------------

TEST_CASE("a logits-directory teacher reproduces the frozen model it was dumped from") {
  auto corpus = tiny_corpus(3, 101);
  auto params = microlm::init_model(student_config(55));
  trainer::ModelTeacher model_teacher(microlm::init_model(student_config(77)));

  std::size_t skipped = 0;
  auto prep = trainer::prepare_examples(corpus, TruncationPolicy::none(),
                                        SupervisionRegime::P_COT_A, "train", &skipped);

  const std::string dir = temp_dir("cotkd_logits_dir_test");
  for (const auto& ex : prep) {
    auto logits = model_teacher.logits_for(ex.tokens, ex.id);
    kdloss::write_logits_file(dir + "/" + ex.id + ".kdlg", logits);
  }

  trainer::LogitsDirTeacher dir_teacher(dir);
  const double via_model = trainer::mean_masked_loss(params, prep, model_teacher, 0.7);
  const double via_files = trainer::mean_masked_loss(params, prep, dir_teacher, 0.7);
  CHECK(via_files == doctest::Approx(via_model).epsilon(1e-4));  // float32 storage

  CHECK_THROWS_AS(dir_teacher.logits_for(prep[0].tokens, "no-such-id"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a memoizing model teacher returns identical logits on repeat calls") {
  trainer::ModelTeacher teacher(microlm::init_model(student_config(66)));
  const std::vector<int> tokens = {10, 20, 30, 40, 50};
  auto a = teacher.logits_for(tokens, "x-1");
  auto b = teacher.logits_for(tokens, "x-1");
  REQUIRE(a.data.size() == b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) REQUIRE(a.data[i] == b.data[i]);
}

// ---- report serialization ----------------------------------------------------

TEST_CASE("report JSON is deterministic and wall-clock free; CSVs have stable headers") {
  auto train_corpus = tiny_corpus(4, 111);
  auto valid_corpus = tiny_corpus(2, 112);
  trainer::TrainConfig tc;
  tc.epochs = 1;
  tc.lr = 1e-3;
  tc.grad_accum_steps = 2;
  tc.lambda = 0.0;
  tc.seed = 2;
  trainer::NullTeacher none;
  auto report = trainer::train(train_corpus, valid_corpus, none, student_config(12), tc);

  auto json1 = trainer::report_to_json(report);
  report.wall_seconds = 123456.0;  // must not leak into the serialized report
  auto json2 = trainer::report_to_json(report);
  CHECK(json1 == json2);
  CHECK(json1.find("wall") == std::string::npos);
  CHECK(json1.find("selected_checkpoint") != std::string::npos);

  const std::string dir = temp_dir("cotkd_report_csv_test");
  trainer::write_step_csv(dir + "/steps.csv", report);
  trainer::write_validation_csv(dir + "/validation.csv", report);
  {
    std::ifstream in(dir + "/steps.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,soft,hard,combined,n_supervised");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == report.steps.size());
  }
  {
    std::ifstream in(dir + "/validation.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,loss,checkpoint");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == report.validations.size());
  }
  std::filesystem::remove_all(dir);
}

#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "gatedgeom/checkpoint.hpp"
#include "gatedgeom/data.hpp"
#include "gatedgeom/errors.hpp"
#include "gatedgeom/rng.hpp"
#include "gatedgeom/training.hpp"

using namespace gatedgeom;

namespace {

Mat random_mat(int r, int c, std::uint64_t index, double scale = 1.0) {
  CounterRng rng(31, "test/train", index);
  Mat m(r, c);
  for (int i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
  return m;
}

ModelParams tiny_model(GateVariant v, double alpha, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.d_hidden = 8;
  cfg.variant = v;
  cfg.alpha = alpha;
  ModelParams p = init_params(cfg, seed);
  // Move every tensor off its initial symmetric values so no gradient is
  // structurally zero.
  std::uint64_t k = 0;
  for (auto& t : p.tensors()) *t.tensor += random_mat(static_cast<int>(t.tensor->rows()),
                                                     static_cast<int>(t.tensor->cols()), 500 + 17 * seed + k++, 0.3);
  return p;
}

// Largest entrywise |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
// over every parameter, numeric from central differences with h = 1e-5.
double max_gradient_error(const ModelParams& params, const Mat& x, int seq_len, const std::vector<int>& labels) {
  const LossAndGrad lg = backward(x, seq_len, labels, params);
  ModelParams probe = params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = lg.grads.tensors();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    Mat& w = *probe_tensors[t].tensor;
    const Mat& g = *grad_tensors[t].tensor;
    REQUIRE(g.rows() == w.rows());
    REQUIRE(g.cols() == w.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double orig = w(i);
      w(i) = orig + h;
      const double up = batch_loss(x, seq_len, labels, probe);
      w(i) = orig - h;
      const double down = batch_loss(x, seq_len, labels, probe);
      w(i) = orig;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(g(i) - numeric) / std::max({std::abs(g(i)), std::abs(numeric), 1e-6});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("backward matches central differences for every gate variant") {
  const int seq_len = 3;
  const Mat x = random_mat(5 * seq_len, 2, 1);
  const std::vector<int> labels{0, 1, 1, 0, 1};
  struct Case {
    GateVariant v;
    double alpha;
  };
  for (const Case c : {Case{GateVariant::ungated, 0.0}, Case{GateVariant::silu, 0.0},
                       Case{GateVariant::gated_sigmoid, 0.0}, Case{GateVariant::gated_nonsparse, 0.0},
                       Case{GateVariant::strength, 0.0}, Case{GateVariant::strength, 0.5},
                       Case{GateVariant::strength, 1.5}}) {
    CAPTURE(to_string(c.v));
    CAPTURE(c.alpha);
    const ModelParams p = tiny_model(c.v, c.alpha, 2);
    CHECK(max_gradient_error(p, x, seq_len, labels) < 1e-4);
  }
}

TEST_CASE("gradient check without layernorm") {
  ModelParams p = tiny_model(GateVariant::gated_sigmoid, 0.0, 3);
  p.use_layernorm = false;
  const Mat x = random_mat(4 * 2, 2, 2);
  CHECK(max_gradient_error(p, x, 2, {1, 0, 0, 1}) < 1e-4);
}

TEST_CASE("final bias gradient of a one-sample batch is softmax minus one-hot") {
  const ModelParams p = tiny_model(GateVariant::strength, 1.0, 4);
  const Mat x = Mat::Zero(4, 2);
  const Vec logits = model_forward(x, p);
  const double m = logits.maxCoeff();
  const double z = std::exp(logits[0] - m) + std::exp(logits[1] - m);
  const double p1 = std::exp(logits[1] - m) / z;
  for (int label : {0, 1}) {
    const LossAndGrad lg = backward(x, 4, {label}, p);
    CHECK(lg.grads.mlp_b2(0, 0) == doctest::Approx((1 - p1) - (label == 0 ? 1 : 0)).epsilon(1e-12));
    CHECK(lg.grads.mlp_b2(0, 1) == doctest::Approx(p1 - (label == 1 ? 1 : 0)).epsilon(1e-12));
    const double loss = -std::log(label == 1 ? p1 : 1 - p1);
    CHECK(lg.loss == doctest::Approx(loss).epsilon(1e-12));
  }
}

TEST_CASE("a duplicated sample gives the single-sample gradient") {
  const ModelParams p = tiny_model(GateVariant::silu, 0.0, 5);
  const Mat one = random_mat(3, 2, 3);
  Mat two(6, 2);
  two << one, one;
  const LossAndGrad a = backward(one, 3, {1}, p);
  const LossAndGrad b = backward(two, 3, {1, 1}, p);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
  const auto ta = a.grads.tensors();
  const auto tb = b.grads.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK((*ta[i].tensor - *tb[i].tensor).norm() < 1e-14);
}

TEST_CASE("AdamW") {
  ModelConfig cfg;
  cfg.d_model = 4;
  cfg.d_hidden = 4;
  cfg.variant = GateVariant::gated_sigmoid;
  ModelParams p = ModelParams::zeros(cfg);
  for (auto& t : p.tensors()) t.tensor->setOnes();

  SUBCASE("zero gradient and no decay leave parameters alone") {
    AdamWConfig h;
    h.weight_decay = 0.0;
    OptimizerState s = OptimizerState::init(p, h);
    GradientTape g = ModelParams::zeros(cfg);
    const ModelParams before = p;
    adamw_step(p, g, s);
    for (std::size_t i = 0; i < p.tensors().size(); ++i) CHECK(*p.tensors()[i].tensor == *before.tensors()[i].tensor);
  }
  SUBCASE("one step from p = 1 with g = 1") {
    OptimizerState s = OptimizerState::init(p, AdamWConfig{});
    GradientTape g = p;  // all ones
    adamw_step(p, g, s);
    const double expected = 1.0 - 2e-3 * 1e-4 * 1.0 - 2e-3 * (1.0 / (1.0 + 1e-8));
    for (const auto& t : p.tensors())
      for (Eigen::Index i = 0; i < t.tensor->size(); ++i) CHECK((*t.tensor)(i) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(expected == doctest::Approx(0.9979998).epsilon(1e-7));
    CHECK(s.step == 1);
  }
  SUBCASE("identical step sequences give identical parameters") {
    ModelParams q = p;
    OptimizerState sp = OptimizerState::init(p, AdamWConfig{});
    OptimizerState sq = OptimizerState::init(q, AdamWConfig{});
    for (int step = 0; step < 5; ++step) {
      GradientTape g = ModelParams::zeros(cfg);
      std::uint64_t k = 0;
      for (auto& t : g.tensors())
        *t.tensor = random_mat(static_cast<int>(t.tensor->rows()), static_cast<int>(t.tensor->cols()), 50 * step + k++);
      adamw_step(p, g, sp);
      adamw_step(q, g, sq);
    }
    for (std::size_t i = 0; i < p.tensors().size(); ++i) CHECK(*p.tensors()[i].tensor == *q.tensors()[i].tensor);
  }
}

TEST_CASE("initialization is seeded and bounded") {
  ModelConfig cfg;
  const ModelParams a = init_params(cfg, 0), b = init_params(cfg, 0), c = init_params(cfg, 1);
  CHECK(a.input_proj == b.input_proj);
  CHECK(a.attention.query == b.attention.query);
  CHECK(a.input_proj != c.input_proj);
  CHECK(a.attention.query.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(64.0));
  CHECK(a.input_proj.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(2.0));
  CHECK(a.input_bias.norm() == 0.0);
  CHECK(a.ln_gain == Mat::Ones(1, 64));
  CHECK(a.attention.scale == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("training is deterministic and learns the curved task") {
  DatasetSpec spec;
  spec.n_train = 1000;
  spec.n_test = 400;
  const Dataset data = generate(spec, 0);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.model.d_model = 16;
  cfg.model.d_hidden = 16;
  cfg.model.variant = GateVariant::ungated;
  std::vector<EpochMetrics> seen;
  const TrainResult a = train(cfg, data, 0, [&](const EpochMetrics& m) { seen.push_back(m); });
  const TrainResult b = train(cfg, data, 0);
  REQUIRE(a.epochs.size() == 8);
  CHECK(seen.size() == 8);
  CHECK_FALSE(a.aborted);
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].train_loss == b.epochs[i].train_loss);
    CHECK(a.epochs[i].test_acc == b.epochs[i].test_acc);
  }
  CHECK(a.test_accuracy == b.test_accuracy);
  CHECK(a.test_accuracy > 0.5);
  CHECK(a.epochs.back().train_loss < a.epochs.front().train_loss);
  CHECK(checkpoint_json(a.params) == checkpoint_json(b.params));
}

TEST_CASE("linear control task reaches the reference accuracy band") {
  DatasetSpec spec;
  spec.task = TaskKind::linear;
  const Dataset data = generate(spec, 0);
  TrainConfig cfg;
  cfg.model.variant = GateVariant::strength;
  cfg.model.alpha = 0.0;
  const TrainResult r = train(cfg, data, 0);
  CHECK(r.test_accuracy == doctest::Approx(0.9656).epsilon(0.02 / 0.9656));
}

TEST_CASE("checkpoints round-trip bit for bit") {
  const ModelParams p = tiny_model(GateVariant::gated_nonsparse, 0.0, 6);
  const ModelParams q = checkpoint_from_json(checkpoint_json(p));
  CHECK(q.gate.variant == p.gate.variant);
  CHECK(q.layernorm_eps == p.layernorm_eps);
  for (std::size_t i = 0; i < p.tensors().size(); ++i) CHECK(*p.tensors()[i].tensor == *q.tensors()[i].tensor);
  CHECK(checkpoint_json(q) == checkpoint_json(p));
  CHECK_THROWS_AS(checkpoint_from_json("{\"format\": 1}"), ConfigError);
  CHECK_THROWS_AS(checkpoint_from_json("not json"), ConfigError);
}

TEST_CASE("base64") {
  // Reference vectors.
  auto bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  CHECK(base64_encode(bytes("")) == "");
  CHECK(base64_encode(bytes("f")) == "Zg==");
  CHECK(base64_encode(bytes("fo")) == "Zm8=");
  CHECK(base64_encode(bytes("foo")) == "Zm9v");
  CHECK(base64_encode(bytes("foobar")) == "Zm9vYmFy");
  CHECK(base64_decode("Zm9vYmE=") == bytes("fooba"));
  CHECK_THROWS_AS(base64_decode("Zm9"), ConfigError);
  CHECK_THROWS_AS(base64_decode("Zm9*"), ConfigError);
}

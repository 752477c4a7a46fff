#include "doctest.h"

#include <cmath>

#include "gatedgeom/attention.hpp"
#include "gatedgeom/errors.hpp"
#include "gatedgeom/rng.hpp"
#include "gatedgeom/training.hpp"

using namespace gatedgeom;

namespace {

Mat random_mat(int r, int c, std::uint64_t index, double scale = 1.0) {
  CounterRng rng(21, "test/attn", index);
  Mat m(r, c);
  for (int i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
  return m;
}

AttentionParams random_attention(int d, std::uint64_t index) {
  AttentionParams p;
  p.query = random_mat(d, d, 4 * index);
  p.key = random_mat(d, d, 4 * index + 1);
  p.value = random_mat(d, d, 4 * index + 2);
  p.output = random_mat(d, d, 4 * index + 3);
  p.scale = 1.0 / std::sqrt(static_cast<double>(d));
  return p;
}

ModelParams random_model(GateVariant v, double alpha, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.d_hidden = 8;
  cfg.variant = v;
  cfg.alpha = alpha;
  ModelParams p = init_params(cfg, seed);
  // Non-trivial layernorm and biases.
  p.ln_gain = Mat::Ones(1, 8) + random_mat(1, 8, 900 + seed, 0.1);
  p.ln_bias = random_mat(1, 8, 901 + seed, 0.1);
  p.mlp_b1 = random_mat(1, 8, 902 + seed, 0.1);
  return p;
}

}  // namespace

TEST_CASE("zero query and key weights give uniform attention") {
  AttentionParams p = AttentionParams::zeros(4);
  p.value = random_mat(4, 4, 1);
  p.output = random_mat(4, 4, 2);
  const Mat x = random_mat(5, 4, 3);
  const Mat a = attention_weights(x, p);
  for (int i = 0; i < a.size(); ++i) CHECK(a(i) == 0.2);
  const Mat y = attention_output(x, p);
  const Eigen::RowVectorXd expected = (x * p.value * p.output).colwise().mean();
  for (int r = 0; r < 5; ++r) CHECK((y.row(r) - expected).norm() < 1e-12);
}

TEST_CASE("a single token attends to itself") {
  const AttentionParams p = random_attention(4, 0);
  const Mat x = random_mat(1, 4, 5);
  CHECK(attention_weights(x, p)(0, 0) == 1.0);
  CHECK((attention_output(x, p) - x * p.value * p.output).norm() < 1e-12);
}

TEST_CASE("attention rows are stochastic") {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const AttentionParams p = random_attention(4, k);
    const Mat x = random_mat(6, 4, 1000 + k);
    const Mat a = attention_weights(x, p);
    CHECK(a.minCoeff() >= 0.0);
    CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gate variants") {
  const Mat y = random_mat(3, 4, 7);
  GateSpec spec;
  spec.weight = random_mat(4, 4, 8);

  spec.variant = GateVariant::strength;
  spec.alpha = 0.0;
  CHECK(apply_gate(y, spec) == y);

  spec.alpha = 1.0;
  Mat sig = (y * spec.weight).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  CHECK((apply_gate(y, spec) - y.cwiseProduct(sig)).norm() < 1e-14);
  GateSpec plain = spec;
  plain.variant = GateVariant::gated_sigmoid;
  CHECK(apply_gate(y, spec) == apply_gate(y, plain));

  spec.alpha = 0.5;
  const Mat half = y.cwiseProduct((0.5 + 0.5 * sig.array()).matrix());
  CHECK((apply_gate(y, spec) - half).norm() < 1e-14);

  GateSpec nonsparse;
  nonsparse.variant = GateVariant::gated_nonsparse;
  nonsparse.weight = Mat::Zero(4, 4);
  CHECK((apply_gate(y, nonsparse) - 0.75 * y).norm() < 1e-15);

  GateSpec s;
  s.variant = GateVariant::silu;
  const Mat expected = y.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
  CHECK((apply_gate(y, s) - expected).norm() < 1e-14);

  GateSpec ung;
  CHECK(apply_gate(y, ung) == y);

  spec.weight = Mat::Zero(3, 3);
  spec.variant = GateVariant::gated_sigmoid;
  CHECK_THROWS_AS(apply_gate(y, spec), ConfigError);
}

TEST_CASE("gate variant names round-trip") {
  for (auto v : {GateVariant::ungated, GateVariant::silu, GateVariant::gated_sigmoid, GateVariant::gated_nonsparse,
                 GateVariant::strength}) {
    CHECK(parse_gate_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_gate_variant("softmax"), ConfigError);
}

TEST_CASE("zero model") {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.d_hidden = 8;
  const ModelParams p = ModelParams::zeros(cfg);
  const Mat x = random_mat(8, 2, 9);
  const Vec logits = model_forward(x, p);
  CHECK(logits.size() == 2);
  CHECK(logits.norm() == 0.0);
  // Layernorm of a zero row is the bias.
  ModelParams q = p;
  q.ln_bias = random_mat(1, 8, 10);
  CHECK((pooled_representation(x, q) - q.ln_bias.transpose()).norm() < 1e-12);
}

TEST_CASE("token permutations do not change the output") {
  for (auto v : {GateVariant::ungated, GateVariant::silu, GateVariant::gated_sigmoid, GateVariant::gated_nonsparse,
                 GateVariant::strength}) {
    const ModelParams p = random_model(v, 0.7, 3);
    const Mat x = random_mat(8, 2, 11);
    Mat perm(8, 2);
    for (int i = 0; i < 8; ++i) perm.row(i) = x.row((i * 3 + 5) % 8);
    CHECK((model_forward(x, p) - model_forward(perm, p)).norm() < 1e-10);
    CHECK((pooled_representation(x, p) - pooled_representation(perm, p)).norm() < 1e-10);
  }
}

TEST_CASE("identical tokens give identical attention output rows") {
  const AttentionParams p = random_attention(4, 3);
  const Mat x = constant_sequence(random_mat(4, 1, 12), 6);
  const Mat y = attention_output(x, p);
  for (int r = 1; r < 6; ++r) CHECK((y.row(r) - y.row(0)).norm() < 1e-12);
}

TEST_CASE("ungated model without layernorm is affine in a constant-sequence input") {
  ModelParams p = random_model(GateVariant::ungated, 0.0, 4);
  p.use_layernorm = false;
  const Vec c = random_mat(2, 1, 13);
  const double eps = 1e-2;
  for (std::uint64_t k = 0; k < 20; ++k) {
    Vec dir = random_mat(2, 1, 100 + k);
    dir.normalize();
    const Vec a = pooled_representation(constant_sequence(c + eps * dir, 8), p);
    const Vec b = pooled_representation(constant_sequence(c, 8), p);
    const Vec d = pooled_representation(constant_sequence(c - eps * dir, 8), p);
    CHECK(((a - 2 * b + d) / (eps * eps)).norm() < 1e-6);
  }
}

TEST_CASE("batched forward agrees with the single-sequence path") {
  const ModelParams p = random_model(GateVariant::strength, 0.5, 5);
  const Mat stacked = random_mat(4 * 3, 2, 14);
  const Mat logits = model_forward_batch(stacked, 3, p);
  const Mat pooled = pooled_representation_batch(stacked, 3, p);
  for (int b = 0; b < 4; ++b) {
    const Mat x = stacked.middleRows(3 * b, 3);
    CHECK((logits.row(b).transpose() - model_forward(x, p)).norm() < 1e-12);
    CHECK((pooled.row(b).transpose() - pooled_representation(x, p)).norm() < 1e-12);
  }
}

TEST_CASE("scalar nonlinearities") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(silu(2.0) == doctest::Approx(2.0 / (1.0 + std::exp(-2.0))));
  CHECK(logit(sigmoid(1.3)) == doctest::Approx(1.3));
  CHECK(std::isfinite(logit(0.0)));
  CHECK(std::isfinite(logit(1.0)));
}

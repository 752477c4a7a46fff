#include "gatedgeom/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gatedgeom/errors.hpp"

namespace gatedgeom {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

double logit(double p) {
  const double c = std::clamp(p, kLogitClamp, 1.0 - kLogitClamp);
  return std::log(c) - std::log1p(-c);
}

AttentionParams AttentionParams::zeros(int d_model) {
  AttentionParams p;
  p.query = Mat::Zero(d_model, d_model);
  p.key = Mat::Zero(d_model, d_model);
  p.value = Mat::Zero(d_model, d_model);
  p.output = Mat::Zero(d_model, d_model);
  p.scale = 1.0 / std::sqrt(static_cast<double>(d_model));
  return p;
}

namespace {

void softmax_rows_inplace(Mat& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      s(r, c) = std::exp(s(r, c) - m);
      total += s(r, c);
    }
    s.row(r) /= total;
  }
}

}  // namespace

Mat attention_weights(const Mat& x, const AttentionParams& params) {
  const Mat q = x * params.query;
  const Mat k = x * params.key;
  Mat s = (q * k.transpose()) * params.scale;
  softmax_rows_inplace(s);
  return s;
}

Mat attention_output(const Mat& x, const AttentionParams& params) {
  const Mat a = attention_weights(x, params);
  return (a * (x * params.value)) * params.output;
}

GateVariant parse_gate_variant(std::string_view name) {
  if (name == "ungated") return GateVariant::ungated;
  if (name == "silu") return GateVariant::silu;
  if (name == "gated_sigmoid") return GateVariant::gated_sigmoid;
  if (name == "gated_nonsparse") return GateVariant::gated_nonsparse;
  if (name == "strength") return GateVariant::strength;
  throw ConfigError("unknown gate variant '" + std::string(name) + "'");
}

std::string_view to_string(GateVariant variant) {
  switch (variant) {
    case GateVariant::ungated: return "ungated";
    case GateVariant::silu: return "silu";
    case GateVariant::gated_sigmoid: return "gated_sigmoid";
    case GateVariant::gated_nonsparse: return "gated_nonsparse";
    case GateVariant::strength: return "strength";
  }
  return "unknown";
}

double gate_factor(const GateSpec& spec, double s) {
  switch (spec.variant) {
    case GateVariant::gated_sigmoid: return s;
    case GateVariant::gated_nonsparse: return 0.5 + 0.5 * s;
    case GateVariant::strength: return (1.0 - spec.alpha) + spec.alpha * s;
    case GateVariant::silu: return s;
    case GateVariant::ungated: return 1.0;
  }
  throw ConfigError("unknown gate variant");
}

Mat apply_gate(const Mat& y, const GateSpec& spec) {
  switch (spec.variant) {
    case GateVariant::ungated:
      return y;
    case GateVariant::silu:
      return y.unaryExpr([](double v) { return silu(v); });
    case GateVariant::gated_sigmoid:
    case GateVariant::gated_nonsparse:
    case GateVariant::strength: {
      if (spec.weight.rows() != y.cols() || spec.weight.cols() != y.cols()) {
        throw ConfigError("gate weight must be d_model x d_model");
      }
      const Mat pre = y * spec.weight;
      Mat out(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r)
        for (Eigen::Index c = 0; c < y.cols(); ++c)
          out(r, c) = y(r, c) * gate_factor(spec, sigmoid(pre(r, c)));
      return out;
    }
  }
  throw ConfigError("unknown gate variant");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  const int d = config.d_model;
  ModelParams p;
  p.input_proj = Mat::Zero(config.d_in, d);
  p.input_bias = Mat::Zero(1, d);
  p.attention = AttentionParams::zeros(d);
  p.gate.variant = config.variant;
  p.gate.alpha = config.alpha;
  p.gate.weight = Mat::Zero(d, d);
  p.ln_gain = Mat::Zero(1, d);
  p.ln_bias = Mat::Zero(1, d);
  p.mlp_w1 = Mat::Zero(d, config.d_hidden);
  p.mlp_b1 = Mat::Zero(1, config.d_hidden);
  p.mlp_w2 = Mat::Zero(config.d_hidden, 2);
  p.mlp_b2 = Mat::Zero(1, 2);
  p.layernorm_eps = config.layernorm_eps;
  p.use_layernorm = config.use_layernorm;
  return p;
}

std::vector<ModelParams::Named> ModelParams::tensors() {
  return {{"input_proj", &input_proj}, {"input_bias", &input_bias},
          {"attn_query", &attention.query}, {"attn_key", &attention.key},
          {"attn_value", &attention.value}, {"attn_output", &attention.output},
          {"gate_weight", &gate.weight}, {"ln_gain", &ln_gain},
          {"ln_bias", &ln_bias}, {"mlp_w1", &mlp_w1},
          {"mlp_b1", &mlp_b1}, {"mlp_w2", &mlp_w2},
          {"mlp_b2", &mlp_b2}};
}

std::vector<ModelParams::ConstNamed> ModelParams::tensors() const {
  std::vector<ConstNamed> out;
  for (auto& n : const_cast<ModelParams*>(this)->tensors()) out.push_back({n.name, n.tensor});
  return out;
}

ForwardTrace forward_trace(const Mat& stacked, int seq_len, const ModelParams& params) {
  if (seq_len < 1 || stacked.rows() % seq_len != 0) {
    throw DimensionError("stacked rows must be a multiple of the sequence length");
  }
  if (stacked.cols() != params.d_in()) {
    throw DimensionError("input feature dimension does not match the input projection");
  }
  ForwardTrace t;
  t.seq_len = seq_len;
  t.batch = static_cast<int>(stacked.rows() / seq_len);
  const int n = seq_len;
  const int d = params.d_model();
  t.x = stacked;
  t.h0 = stacked * params.input_proj;
  t.h0.rowwise() += params.input_bias.row(0);

  const auto& at = params.attention;
  t.q = t.h0 * at.query;
  t.k = t.h0 * at.key;
  t.v = t.h0 * at.value;
  t.attn.resize(stacked.rows(), n);
  t.z.resize(stacked.rows(), d);
  for (int b = 0; b < t.batch; ++b) {
    Mat s = (t.q.middleRows(b * n, n) * t.k.middleRows(b * n, n).transpose()) * at.scale;
    softmax_rows_inplace(s);
    t.attn.middleRows(b * n, n) = s;
    t.z.middleRows(b * n, n).noalias() = s * t.v.middleRows(b * n, n);
  }
  t.y = t.z * at.output;

  const GateSpec& gate = params.gate;
  switch (gate.variant) {
    case GateVariant::ungated:
      t.gated = t.y;
      break;
    case GateVariant::silu:
      t.gate_sig = t.y.unaryExpr([](double v) { return sigmoid(v); });
      t.gated = t.y.cwiseProduct(t.gate_sig);
      break;
    default: {
      t.gate_sig = (t.y * gate.weight).unaryExpr([](double v) { return sigmoid(v); });
      t.gated.resize(t.y.rows(), t.y.cols());
      for (Eigen::Index r = 0; r < t.y.rows(); ++r)
        for (Eigen::Index c = 0; c < t.y.cols(); ++c)
          t.gated(r, c) = t.y(r, c) * gate_factor(gate, t.gate_sig(r, c));
    }
  }

  t.resid = t.h0 + t.gated;
  if (params.use_layernorm) {
    const Eigen::Index rows = t.resid.rows();
    t.normed.resize(rows, d);
    t.inv_std.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double mean = t.resid.row(r).mean();
      const double var = (t.resid.row(r).array() - mean).square().mean();
      const double inv = 1.0 / std::sqrt(var + params.layernorm_eps);
      t.inv_std[r] = inv;
      t.normed.row(r) = (t.resid.row(r).array() - mean) * inv;
    }
    t.ln_out = t.normed.array().rowwise() * params.ln_gain.row(0).array();
    t.ln_out.rowwise() += params.ln_bias.row(0);
  } else {
    t.ln_out = t.resid;
  }

  t.pooled.resize(t.batch, d);
  for (int b = 0; b < t.batch; ++b) t.pooled.row(b) = t.ln_out.middleRows(b * n, n).colwise().mean();

  t.hidden_pre = t.pooled * params.mlp_w1;
  t.hidden_pre.rowwise() += params.mlp_b1.row(0);
  t.hidden = t.hidden_pre.unaryExpr([](double v) { return silu(v); });
  t.logits = t.hidden * params.mlp_w2;
  t.logits.rowwise() += params.mlp_b2.row(0);
  return t;
}

Mat model_forward_batch(const Mat& stacked, int seq_len, const ModelParams& params) {
  return forward_trace(stacked, seq_len, params).logits;
}

Mat pooled_representation_batch(const Mat& stacked, int seq_len, const ModelParams& params) {
  return forward_trace(stacked, seq_len, params).pooled;
}

Vec model_forward(const Mat& x, const ModelParams& params) {
  return model_forward_batch(x, static_cast<int>(x.rows()), params).row(0).transpose();
}

Vec pooled_representation(const Mat& x, const ModelParams& params) {
  return pooled_representation_batch(x, static_cast<int>(x.rows()), params).row(0).transpose();
}

Mat constant_sequence(const Vec& token, int seq_len) {
  Mat x(seq_len, token.size());
  for (int i = 0; i < seq_len; ++i) x.row(i) = token.transpose();
  return x;
}

}  // namespace gatedgeom

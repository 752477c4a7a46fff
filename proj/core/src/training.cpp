#include "gatedgeom/training.hpp"

#include <cmath>
#include <numeric>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/rng.hpp"

namespace gatedgeom {

namespace {

double log_sum_exp2(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams g = p;
  for (auto& t : g.tensors()) t.tensor->setZero();
  return g;
}

double silu_derivative(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

double gate_factor_slope(const GateSpec& spec) {
  switch (spec.variant) {
    case GateVariant::gated_sigmoid: return 1.0;
    case GateVariant::gated_nonsparse: return 0.5;
    case GateVariant::strength: return spec.alpha;
    default: return 0.0;
  }
}

}  // namespace

OptimizerState OptimizerState::init(const ModelParams& params, const AdamWConfig& hyper) {
  OptimizerState s;
  s.hyper = hyper;
  for (const auto& t : params.tensors()) {
    s.m.push_back(Mat::Zero(t.tensor->rows(), t.tensor->cols()));
    s.v.push_back(Mat::Zero(t.tensor->rows(), t.tensor->cols()));
  }
  return s;
}

double batch_loss(const Mat& stacked, int seq_len, const std::vector<int>& labels,
                  const ModelParams& params) {
  const Mat logits = model_forward_batch(stacked, seq_len, params);
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw DimensionError("label count does not match batch size");
  }
  double total = 0.0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    total += log_sum_exp2(logits(b, 0), logits(b, 1)) - logits(b, labels[b]);
  }
  return total / static_cast<double>(logits.rows());
}

LossAndGrad backward(const Mat& stacked, int seq_len, const std::vector<int>& labels,
                     const ModelParams& params) {
  const ForwardTrace t = forward_trace(stacked, seq_len, params);
  if (static_cast<std::size_t>(t.batch) != labels.size()) {
    throw DimensionError("label count does not match batch size");
  }
  const int n = seq_len;
  const int batch = t.batch;
  const double inv_batch = 1.0 / batch;

  LossAndGrad out;
  out.grads = zeros_like(params);
  GradientTape& g = out.grads;

  // Cross-entropy head.
  Mat dlogits(batch, 2);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double lse = log_sum_exp2(t.logits(b, 0), t.logits(b, 1));
    loss += lse - t.logits(b, labels[b]);
    for (int c = 0; c < 2; ++c) {
      dlogits(b, c) = (std::exp(t.logits(b, c) - lse) - (labels[b] == c ? 1.0 : 0.0)) * inv_batch;
    }
  }
  out.loss = loss * inv_batch;

  g.mlp_w2.noalias() = t.hidden.transpose() * dlogits;
  g.mlp_b2 = dlogits.colwise().sum();
  Mat dhidden_pre = dlogits * params.mlp_w2.transpose();
  for (Eigen::Index r = 0; r < dhidden_pre.rows(); ++r)
    for (Eigen::Index c = 0; c < dhidden_pre.cols(); ++c)
      dhidden_pre(r, c) *= silu_derivative(t.hidden_pre(r, c));
  g.mlp_w1.noalias() = t.pooled.transpose() * dhidden_pre;
  g.mlp_b1 = dhidden_pre.colwise().sum();
  const Mat dpooled = dhidden_pre * params.mlp_w1.transpose();

  // Mean pooling.
  const Eigen::Index rows = t.x.rows();
  const int d = params.d_model();
  Mat dln(rows, d);
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < n; ++i) dln.row(b * n + i) = dpooled.row(b) / static_cast<double>(n);

  // Layer normalization.
  Mat dresid(rows, d);
  if (params.use_layernorm) {
    g.ln_gain = dln.cwiseProduct(t.normed).colwise().sum();
    g.ln_bias = dln.colwise().sum();
    const Mat dnormed = dln.array().rowwise() * params.ln_gain.row(0).array();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double mean_dn = dnormed.row(r).mean();
      const double mean_dn_n = dnormed.row(r).cwiseProduct(t.normed.row(r)).mean();
      dresid.row(r) = t.inv_std[r] *
                      (dnormed.row(r).array() - mean_dn - t.normed.row(r).array() * mean_dn_n).matrix();
    }
  } else {
    dresid = dln;
  }

  // Residual branch and gate.
  Mat dh0 = dresid;
  Mat dy;
  const GateSpec& gate = params.gate;
  switch (gate.variant) {
    case GateVariant::ungated:
      dy = dresid;
      break;
    case GateVariant::silu:
      dy = dresid.array() *
           (t.gate_sig.array() + t.y.array() * t.gate_sig.array() * (1.0 - t.gate_sig.array()));
      break;
    default: {
      const double slope = gate_factor_slope(gate);
      Mat factor = t.gate_sig.unaryExpr([&gate](double s) { return gate_factor(gate, s); });
      dy = dresid.cwiseProduct(factor);
      const Mat dpre = (dresid.array() * t.y.array() * slope * t.gate_sig.array() *
                        (1.0 - t.gate_sig.array()))
                           .matrix();
      g.gate.weight.noalias() = t.y.transpose() * dpre;
      dy.noalias() += dpre * gate.weight.transpose();
    }
  }

  // Attention.
  const auto& at = params.attention;
  g.attention.output.noalias() = t.z.transpose() * dy;
  const Mat dz = dy * at.output.transpose();
  Mat dq(rows, d), dk(rows, d), dv(rows, d);
  for (int b = 0; b < batch; ++b) {
    const auto a = t.attn.middleRows(b * n, n);
    const auto dzb = dz.middleRows(b * n, n);
    const Mat da = dzb * t.v.middleRows(b * n, n).transpose();
    dv.middleRows(b * n, n).noalias() = a.transpose() * dzb;
    Mat ds = a.cwiseProduct(da);
    const Vec rowdot = ds.rowwise().sum();
    ds = a.array() * (da.array().colwise() - rowdot.array());
    ds *= at.scale;
    dq.middleRows(b * n, n).noalias() = ds * t.k.middleRows(b * n, n);
    dk.middleRows(b * n, n).noalias() = ds.transpose() * t.q.middleRows(b * n, n);
  }
  g.attention.query.noalias() = t.h0.transpose() * dq;
  g.attention.key.noalias() = t.h0.transpose() * dk;
  g.attention.value.noalias() = t.h0.transpose() * dv;
  dh0.noalias() += dq * at.query.transpose();
  dh0.noalias() += dk * at.key.transpose();
  dh0.noalias() += dv * at.value.transpose();

  g.input_proj.noalias() = t.x.transpose() * dh0;
  g.input_bias = dh0.colwise().sum();
  return out;
}

void adamw_step(ModelParams& params, const GradientTape& grads, OptimizerState& state) {
  auto ps = params.tensors();
  const auto gs = grads.tensors();
  if (ps.size() != gs.size() || ps.size() != state.m.size()) {
    throw DimensionError("optimizer state does not match parameter layout");
  }
  const AdamWConfig& h = state.hyper;
  ++state.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Mat& p = *ps[i].tensor;
    const Mat& gr = *gs[i].tensor;
    Mat& m = state.m[i];
    Mat& v = state.v[i];
    if (p.rows() != gr.rows() || p.cols() != gr.cols() || m.rows() != p.rows() ||
        m.cols() != p.cols()) {
      throw DimensionError("shape mismatch in tensor " + ps[i].name);
    }
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      double& pk = p.data()[k];
      const double gk = gr.data()[k];
      double& mk = m.data()[k];
      double& vk = v.data()[k];
      pk -= h.lr * h.weight_decay * pk;
      mk = h.beta1 * mk + (1.0 - h.beta1) * gk;
      vk = h.beta2 * vk + (1.0 - h.beta2) * gk * gk;
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      pk -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(config);
  auto fill_uniform = [seed](Mat& w, const std::string& name) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    CounterRng rng(seed, "init/" + name);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
  };
  fill_uniform(p.input_proj, "input_proj");
  fill_uniform(p.attention.query, "attn_query");
  fill_uniform(p.attention.key, "attn_key");
  fill_uniform(p.attention.value, "attn_value");
  fill_uniform(p.attention.output, "attn_output");
  fill_uniform(p.gate.weight, "gate_weight");
  fill_uniform(p.mlp_w1, "mlp_w1");
  fill_uniform(p.mlp_w2, "mlp_w2");
  p.ln_gain.setOnes();
  return p;
}

double accuracy(const ModelParams& params, const std::vector<TaskSample>& samples) {
  if (samples.empty()) return 0.0;
  const int n = static_cast<int>(samples.front().tokens.rows());
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Mat logits = model_forward_batch(stack_tokens(samples, idx), n, params);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int pred = logits(static_cast<Eigen::Index>(i), 1) > logits(static_cast<Eigen::Index>(i), 0) ? 1 : 0;
    if (pred == samples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train(const TrainConfig& config, const Dataset& data, std::uint64_t seed,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (config.batch_size < 1 || config.epochs < 0) throw ConfigError("invalid training config");
  if (data.train.empty()) throw ConfigError("training set is empty");
  TrainResult result;
  result.params = init_params(config.model, seed);
  OptimizerState state = OptimizerState::init(result.params, config.optimizer);
  const int n = static_cast<int>(data.train.front().tokens.rows());
  const std::size_t count = data.train.size();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(count);
    if (config.shuffle) {
      CounterRng rng(seed, "shuffle", static_cast<std::uint64_t>(epoch));
      order = random_permutation(count, rng);
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < count; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(count, start + static_cast<std::size_t>(config.batch_size));
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (std::size_t i : idx) labels.push_back(data.train[i].label);
      LossAndGrad lg = backward(stack_tokens(data.train, idx), n, labels, result.params);
      if (!std::isfinite(lg.loss)) {
        result.aborted = true;
        result.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch starting at " + std::to_string(start);
        return result;
      }
      loss_sum += lg.loss * static_cast<double>(idx.size());
      adamw_step(result.params, lg.grads, state);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(count);
    m.test_acc = accuracy(result.params, data.test);
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.test_accuracy = result.epochs.empty() ? accuracy(result.params, data.test)
                                               : result.epochs.back().test_acc;
  return result;
}

}  // namespace gatedgeom

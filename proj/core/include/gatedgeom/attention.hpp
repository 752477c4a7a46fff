#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace gatedgeom {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Row-vector convention throughout: a sequence is an n x d matrix and linear
// maps act on the right.

double sigmoid(double x);
double silu(double x);
// Inverse sigmoid. Arguments are clamped to [1e-12, 1 - 1e-12].
double logit(double p);
inline constexpr double kLogitClamp = 1e-12;

struct AttentionParams {
  Mat query;   // d x d
  Mat key;     // d x d
  Mat value;   // d x d
  Mat output;  // d x d
  double scale = 1.0;

  static AttentionParams zeros(int d_model);
};

// Row-stochastic softmax(Q K^T * scale), max-subtracted per row.
Mat attention_weights(const Mat& x, const AttentionParams& params);
// Y = A (X W_V W_O)
Mat attention_output(const Mat& x, const AttentionParams& params);

enum class GateVariant { ungated, silu, gated_sigmoid, gated_nonsparse, strength };

// Throws ConfigError for unknown names.
GateVariant parse_gate_variant(std::string_view name);
std::string_view to_string(GateVariant variant);

struct GateSpec {
  GateVariant variant = GateVariant::ungated;
  Mat weight;          // d x d, acts on the attention output
  double alpha = 0.0;  // gate strength, used by GateVariant::strength
};

// Gate factor per entry given the sigmoid of the gate pre-activation.
// strength uses (1 - alpha) + alpha * s, which equals 1 + alpha (s - 1) and
// reduces exactly to s at alpha = 1 and to 1 at alpha = 0.
double gate_factor(const GateSpec& spec, double s);

Mat apply_gate(const Mat& y, const GateSpec& spec);

struct ModelConfig {
  int d_in = 2;
  int d_model = 64;
  int d_hidden = 64;
  GateVariant variant = GateVariant::ungated;
  double alpha = 0.0;
  double layernorm_eps = 1e-5;
  // Test hook: replace layer normalization with the identity.
  bool use_layernorm = true;
};

struct ModelParams {
  Mat input_proj;  // d_in x d_model
  Mat input_bias;  // 1 x d_model
  AttentionParams attention;
  GateSpec gate;
  Mat ln_gain;     // 1 x d_model
  Mat ln_bias;     // 1 x d_model
  Mat mlp_w1;      // d_model x d_hidden
  Mat mlp_b1;      // 1 x d_hidden
  Mat mlp_w2;      // d_hidden x 2
  Mat mlp_b2;      // 1 x 2
  double layernorm_eps = 1e-5;
  bool use_layernorm = true;

  // All-zero parameters (layernorm gain included) with the given shapes.
  static ModelParams zeros(const ModelConfig& config);

  int d_in() const { return static_cast<int>(input_proj.rows()); }
  int d_model() const { return static_cast<int>(input_proj.cols()); }
  int d_hidden() const { return static_cast<int>(mlp_w1.cols()); }

  struct Named {
    std::string name;
    Mat* tensor;
  };
  struct ConstNamed {
    std::string name;
    const Mat* tensor;
  };
  // Every trainable tensor in a fixed order.
  std::vector<Named> tensors();
  std::vector<ConstNamed> tensors() const;
};

// Intermediates of a batched forward pass. Sequences are stacked: rows
// [b * n, (b + 1) * n) belong to sample b.
struct ForwardTrace {
  int batch = 0;
  int seq_len = 0;
  Mat x;           // Bn x d_in
  Mat h0;          // projected input
  Mat q, k, v;
  Mat attn;        // Bn x n, attention weights of each sample stacked
  Mat z;           // A V
  Mat y;           // attention output (after W_O)
  Mat gate_sig;    // sigmoid of the gate pre-activation (or of y for silu)
  Mat gated;
  Mat resid;
  Mat normed;      // (resid - mean) / std
  Vec inv_std;     // Bn
  Mat ln_out;
  Mat pooled;      // B x d_model
  Mat hidden_pre;  // B x d_hidden
  Mat hidden;
  Mat logits;      // B x 2
};

ForwardTrace forward_trace(const Mat& stacked, int seq_len, const ModelParams& params);

// Logits (2-vector) of a single n x d_in sequence.
Vec model_forward(const Mat& x, const ModelParams& params);
// Post-layernorm mean-pooled representation of a single sequence.
Vec pooled_representation(const Mat& x, const ModelParams& params);

Mat model_forward_batch(const Mat& stacked, int seq_len, const ModelParams& params);
Mat pooled_representation_batch(const Mat& stacked, int seq_len, const ModelParams& params);

// Sequence of seq_len identical tokens.
Mat constant_sequence(const Vec& token, int seq_len);

}  // namespace gatedgeom

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "gatedgeom/attention.hpp"
#include "gatedgeom/geometry.hpp"

namespace gatedgeom {

// ---- building blocks ---------------------------------------------------------

// μ(φ) = Y(φ) ⊙ g(φ) with Y affine. The Jacobian B ⊙ g + Y ⊙ Dg is analytic
// whenever the gate has an analytic Jacobian.
EmbeddingMap hadamard_embedding(const AffineMap& y, const EmbeddingMap& gate);

// φ ↦ σ(X_g(φ) W) for a gate input X_g: U → R^m and W of shape m x D.
EmbeddingMap sigmoid_gate(const EmbeddingMap& gate_input, const Mat& weight);

// φ ↦ c, zero Jacobian.
EmbeddingMap constant_map(int domain_dim, const Vec& value);

// Uniform grid of n x n points over the box shrunk by `inset` of its width on
// each side, first coordinate fastest.
std::vector<ParamPoint> interior_grid(const Box& box, int n, double inset);

// ---- sphere witness ----------------------------------------------------------

struct SphereWitness {
  AffineMap affine;  // Y(φ) = (2 + φ1, 2 + φ2, 2)
  Mat gate_weight;   // 1 x 3, all ones
  Box domain;
  EmbeddingMap ungated;  // Y
  EmbeddingMap gated;    // Y ⊙ σ(logit(1/|Y|) W) = Y / |Y|
};

SphereWitness build_sphere_witness();

// ---- content-aware witness ---------------------------------------------------

struct ContentAwareWitness {
  int n_tokens = 4;
  int gate_dim = 8;
  AffineMap affine;            // a + Bφ with a = (2,2,2), B = [[1,0],[0,1],[.5,.5]]
  Box domain;                  // (0, π/4)^2
  AttentionParams attention;   // W_Q = W_K = 0, W_V W_O = L of rank 3
  Mat gate_weight;             // m x 3, rank 3
  Mat gate_left_inverse;       // 3 x m with W† W = I

  // Sequence X(φ): first token n (a + Bφ) L^-1, the rest zero.
  Mat inputs(const ParamPoint& phi) const;
  // Gate input X_g(φ) = logit(s(φ) ⊘ (a + Bφ))^T W†, as an m-vector.
  Vec gate_input(const ParamPoint& phi) const;
  // Spherical target s(φ).
  Vec target(const ParamPoint& phi) const;
  // attention_output(X(φ)), n x 3.
  Mat ungated_output(const ParamPoint& phi) const;
  // Every row gated by σ(X_g W_θ), n x 3.
  Mat gated_output(const ParamPoint& phi) const;

  EmbeddingMap ungated_embedding() const;
  EmbeddingMap gated_embedding() const;
};

// Throws ConstructionError when a gate ratio leaves (0, 1) on the domain or the
// left inverse is inaccurate.
ContentAwareWitness build_content_aware_witness(int n_tokens = 4, int gate_dim = 8);

// ---- depth stack -------------------------------------------------------------

struct DepthStack {
  std::vector<double> coefficients;  // a_ℓ > 0
  ScalarField psi;
  Box domain;
  int ambient_dim = 4;
};

// L literal gated-attention blocks, each on a single token, with the residual
// stream h^(ℓ) = h^(ℓ-1) + a_ℓ ψ e_3 and the final projection onto the first
// three coordinates.
class DepthStackModel {
 public:
  explicit DepthStackModel(DepthStack stack);

  int layers() const { return static_cast<int>(stack_.coefficients.size()); }
  int ambient_dim() const { return stack_.ambient_dim; }
  double total_coefficient() const;
  const DepthStack& stack() const { return stack_; }

  // h^(0) = (u, v, 0, 1, 0, ..., 0)
  Vec initial_state(const ParamPoint& p) const;
  // σ(X_g^(ℓ) W_θ^(ℓ)) = (1/2, 1/2, a_ℓ ψ, 1/2, ..., 1/2)
  Vec gate_vector(int layer, const ParamPoint& p) const;
  // Gated attention output of layer ℓ on the single token h.
  Vec layer_output(int layer, const Vec& h, const ParamPoint& p) const;
  Vec hidden_state(const ParamPoint& p) const;
  // P h^(L) = (u, v, A_L ψ, 0, ..., 0)
  Vec representation(const ParamPoint& p) const;
  EmbeddingMap embedding() const;

 private:
  DepthStack stack_;
  std::vector<AttentionParams> attention_;
  Mat projection_;
};

// Verifies 0 < a_ℓ ψ < 1 on a grid over the closed domain; throws
// ConstructionError otherwise.
DepthStackModel build_depth_stack(const DepthStack& stack, int range_grid = 41);

struct DepthScanRow {
  int layers = 0;
  double measured = 0.0;   // graph curvature of the stack's third coordinate
  double predicted = 0.0;  // A_L^2 det D²ψ(p)
};

// Stacks of L layers with a_ℓ = a0. Throws PreconditionError when ∇ψ(p) is not
// within kCriticalPointTolerance of zero.
std::vector<DepthScanRow> depth_curvature_scan(const ScalarField& psi, double a0,
                                               const std::vector<int>& layer_counts,
                                               const Box& domain, const ParamPoint& p);

// Least-squares slope of log|K_measured| against log L.
double loglog_slope(const std::vector<DepthScanRow>& rows);

// ---- robustness ----------------------------------------------------------------

// The sphere witness lifted to D >= 4: Y = (2 + φ1, 2 + φ2, 2, 1, ..., 1),
// X_g = (t, t, t, 0, ..., 0) with t = logit(1 / |Y_{1:3}|), base W* = I.
struct RobustnessWitness {
  AffineMap affine;
  Box domain;
  EmbeddingMap gate_input;
  Mat base_weight;
};

RobustnessWitness lifted_sphere_witness(int ambient_dim = 4);

EmbeddingMap robustness_embedding(const RobustnessWitness& w, const Mat& weight);
// Gate ≡ 1.
EmbeddingMap constant_gate_embedding(const RobustnessWitness& w);

struct RobustnessConfig {
  int trials = 200;
  int grid = 15;
  double inset = 0.1;
  double min_curvature = 0.5;
  std::uint64_t seed = 0;
  int workers = 1;
  // Stop at the first failing trial (used while bisecting).
  bool stop_on_failure = false;
};

struct RobustnessReport {
  double radius = 0.0;
  int trials = 0;
  int passing = 0;
  double fraction = 0.0;
  double min_curvature = 0.0;  // over every trial and grid point
  double max_curvature = 0.0;
  int regularity_failures = 0;
};

// Perturbations ΔW drawn uniformly from the Frobenius ball of the radius, one
// stream per trial. A trial passes when every grid point is regular with
// K >= min_curvature.
RobustnessReport robustness_sweep(const RobustnessWitness& w, double radius,
                                  const RobustnessConfig& config);

// Curvature of a single embedding over the robustness grid.
RobustnessReport grid_curvature(const EmbeddingMap& embedding, const Box& domain,
                                const RobustnessConfig& config);

// Largest radius found by bisection on [0, upper] at which every trial passes.
// The report of that radius is stored in `at_radius` when given.
double bisect_robust_radius(const RobustnessWitness& w, double upper, int iterations,
                            const RobustnessConfig& config, RobustnessReport* at_radius = nullptr);

// ---- perturbation polynomial ----------------------------------------------------

// Base map F = Y ⊙ g around φ0.
struct GatedBase {
  AffineMap affine;
  EmbeddingMap gate;
  ParamPoint point;
  Box domain;
};

struct PerturbationFit {
  Vec normal;               // unit vector in E ∩ T⊥
  double base_value = 0.0;  // R_1212 at ε = 0 in orthonormal coordinates
  double expected_linear = 0.0;  // B¹_11 + B¹_22
  double constant = 0.0;
  double linear = 0.0;
  double quadratic = 0.0;
  std::vector<double> epsilons;
  std::vector<double> values;
};

// Normal direction supported on the nonzero coordinates of Y(φ0); throws
// ConstructionError when none exists.
Vec admissible_normal(const GatedBase& base);

// The gate perturbed by h_ε with (h_ε)_j = χ q_ε n_j / Y_j on the support, so
// that Y ⊙ (g + h_ε) = F + χ q_ε n. q_ε = ε/2 |R (φ - φ0)|² with DF(φ0) = QR.
EmbeddingMap perturbed_gate(const GatedBase& base, const Vec& normal, double epsilon);

// R_1212(ε) of Y ⊙ (g + h_ε) in orthonormal coordinates at φ0, fitted by a
// least-squares quadratic.
PerturbationFit perturbation_polynomial_check(const GatedBase& base,
                                              const std::vector<double>& epsilons);

// Bases used by the checks: affine (gate ≡ 1), the sphere witness, and a 4-D
// sigmoid-gated map.
GatedBase affine_base();
GatedBase sphere_base();
GatedBase gated4_base();

}  // namespace gatedgeom

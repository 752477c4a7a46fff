#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "gatedgeom/tensor.hpp"

namespace gatedgeom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Chart coordinates of a point in a parameter domain.
using ParamPoint = Eigen::VectorXd;

// Default finite-difference steps. Curvature is a second derivative of the
// metric, so the Christoffel step is the widest.
struct StepSizes {
  double jacobian = 1e-5;
  double hessian = 1e-4;
  double metric = 1e-4;
  double christoffel = 1e-3;
};

inline constexpr double kRegularityThreshold = 1e-8;
inline constexpr double kCriticalPointTolerance = 1e-6;

// Open axis-aligned box.
struct Box {
  Vec lower;
  Vec upper;

  // True when every coordinate of p lies strictly inside [lower+margin, upper-margin].
  bool contains(const Vec& p, double margin = 0.0) const;
};

// A smooth map from a d-dimensional chart into R^D with derivative access.
// Derivatives come from analytic callbacks when supplied, central differences
// otherwise.
class EmbeddingMap {
 public:
  using ValueFn = std::function<Vec(const Vec&)>;
  using JacobianFn = std::function<Mat(const Vec&)>;     // D x d
  using HessianFn = std::function<Tensor3(const Vec&)>;  // D x d x d

  EmbeddingMap(int domain_dim, int ambient_dim, ValueFn value);

  EmbeddingMap& with_jacobian(JacobianFn jacobian);
  EmbeddingMap& with_hessian(HessianFn hessian);
  EmbeddingMap& with_domain(Box domain);
  EmbeddingMap& with_steps(double jacobian_step, double hessian_step);

  int domain_dim() const { return domain_dim_; }
  int ambient_dim() const { return ambient_dim_; }
  const std::optional<Box>& domain() const { return domain_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }
  bool has_analytic_hessian() const { return static_cast<bool>(hessian_); }
  double jacobian_step() const { return jacobian_step_; }
  double hessian_step() const { return hessian_step_; }

  // Throws DomainError outside the domain or on a non-finite value.
  Vec evaluate(const Vec& p) const;
  Mat jacobian(const Vec& p) const;
  Tensor3 hessian(const Vec& p) const;

  // Central-difference derivatives regardless of the analytic callbacks.
  Mat jacobian_central(const Vec& p, double h) const;
  Tensor3 hessian_central(const Vec& p, double h) const;

 private:
  void check_point(const Vec& p) const;

  int domain_dim_;
  int ambient_dim_;
  ValueFn value_;
  JacobianFn jacobian_;
  HessianFn hessian_;
  std::optional<Box> domain_;
  double jacobian_step_ = StepSizes{}.jacobian;
  double hessian_step_ = StepSizes{}.hessian;
};

// Scalar C^2 function with optional analytic gradient and Hessian.
class ScalarField {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradientFn = std::function<Vec(const Vec&)>;
  using HessianFn = std::function<Mat(const Vec&)>;

  ScalarField(int dim, ValueFn value);
  ScalarField& with_gradient(GradientFn gradient);
  ScalarField& with_hessian(HessianFn hessian);
  ScalarField& with_steps(double gradient_step, double hessian_step);

  int dim() const { return dim_; }
  double value(const Vec& p) const;
  Vec gradient(const Vec& p) const;
  Mat hessian(const Vec& p) const;

 private:
  int dim_;
  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
  double gradient_step_ = StepSizes{}.jacobian;
  double hessian_step_ = StepSizes{}.hessian;
};

// y = offset + linear * p
struct AffineMap {
  Vec offset;
  Mat linear;

  Vec operator()(const Vec& p) const { return offset + linear * p; }
  int domain_dim() const { return static_cast<int>(linear.cols()); }
  int ambient_dim() const { return static_cast<int>(linear.rows()); }
  // Smallest singular value of the linear part.
  double min_singular_value() const;
};

// Diagonal inverse covariance of the Gaussian location family.
class PrecisionSpec {
 public:
  enum class Kind { identity, diagonal };

  static PrecisionSpec identity();
  // Throws ConfigError unless every entry is finite and positive.
  static PrecisionSpec diagonal(Vec entries);
  // dim entries spaced log-uniformly from 1 to condition_number.
  static PrecisionSpec log_spaced(int dim, double condition_number);

  Kind kind() const { return kind_; }
  bool is_identity() const { return kind_ == Kind::identity; }
  const Vec& entries() const { return entries_; }
  double condition_number() const;
  // Precision weights for an ambient space of dimension dim.
  Vec weights(int dim) const;

 private:
  Kind kind_ = Kind::identity;
  Vec entries_;
};

// Fisher-Rao metric induced on the chart by an embedding and a fixed precision.
struct MetricField {
  EmbeddingMap embedding;
  PrecisionSpec precision = PrecisionSpec::identity();
  double metric_step = StepSizes{}.metric;
  double christoffel_step = StepSizes{}.christoffel;
  double regularity_threshold = kRegularityThreshold;

  explicit MetricField(EmbeddingMap e, PrecisionSpec p = PrecisionSpec::identity())
      : embedding(std::move(e)), precision(std::move(p)) {}
};

struct CurvatureReport {
  ParamPoint point;
  Mat metric;
  bool regular = false;
  // Absent when the metric is not regular on the stencil.
  std::optional<double> riemann_norm;
  // Present only for two-dimensional charts.
  std::optional<double> gaussian_curvature;
};

// g = J^T P J, symmetrized.
Mat metric_at(const MetricField& field, const ParamPoint& p);

// Gamma(k, i, j) = Γ^k_ij from central differences of the metric.
Tensor3 christoffel_at(const MetricField& field, const ParamPoint& p);

// Lowered curvature tensor R(k, l, i, j) = g_km R^m_lij with
// R^k_lij = ∂_i Γ^k_lj - ∂_j Γ^k_li + Γ^k_im Γ^m_lj - Γ^k_jm Γ^m_li.
// The unit sphere has R(0,1,0,1) = det g.
Tensor4 riemann_at(const MetricField& field, const ParamPoint& p);

// R_1212 / det g. Throws DimensionError unless the chart is two-dimensional.
double gaussian_curvature_at(const MetricField& field, const ParamPoint& p);

// Never throws RegularityError: irregular points are reported as such.
CurvatureReport curvature_report(const MetricField& field, const ParamPoint& p);

// Closed-form Gaussian curvature of the graph (u, v, f(u, v)).
double graph_curvature(const ScalarField& f, const ParamPoint& p);

// Gaussian curvature of (u, v, f^1, ..., f^k) at a critical point of all f^a:
// sum of Hessian determinants. Throws PreconditionError with the measured
// gradient norm when p is not critical within critical_tolerance.
double codim_graph_curvature(const std::vector<ScalarField>& components,
                             const ParamPoint& p,
                             double critical_tolerance = kCriticalPointTolerance);

// φ ↦ sqrt(P) μ(φ).
EmbeddingMap whiten(const EmbeddingMap& embedding, const PrecisionSpec& precision);

// Second derivatives of μ = Y ⊙ g:
//   ∂_ij μ = B_i ⊙ ∂_j g + B_j ⊙ ∂_i g + Y ⊙ ∂_ij g.
// Result indexed (component, i, j).
Tensor3 gated_second_derivative(const AffineMap& y, const EmbeddingMap& gate,
                                const ParamPoint& p);

// Extrinsic data at a point: orthonormal tangent and normal frames and the
// second fundamental form B^a_ij = <∂_ij F, n_a> in the chart coordinates.
struct SecondFundamentalForm {
  Mat tangent_frame;  // D x d, orthonormal columns
  Mat normal_frame;   // D x (D - d), orthonormal columns
  std::vector<Mat> components;  // one d x d matrix per normal direction
};

SecondFundamentalForm second_fundamental_form(const EmbeddingMap& embedding,
                                              const ParamPoint& p);

// Gaussian curvature from the Gauss equation, an independent route to
// gaussian_curvature_at for identity precision.
double gauss_equation_curvature(const EmbeddingMap& embedding, const ParamPoint& p);

// ---- standard embeddings -------------------------------------------------

EmbeddingMap affine_embedding(const AffineMap& map);

// (cos φ1 cos φ2, cos φ1 sin φ2, sin φ1)
EmbeddingMap sphere_patch();

// (u, v, f(u, v))
EmbeddingMap graph_embedding(const ScalarField& f);

// (u, v, f^1(u, v), ..., f^k(u, v))
EmbeddingMap multi_graph_embedding(const std::vector<ScalarField>& components);

// Appends fixed coordinates after the existing ones.
EmbeddingMap append_constant_coordinates(const EmbeddingMap& embedding,
                                         const Vec& constants);

// φ ↦ μ(ψ(φ)) for a reparameterization ψ with Jacobian.
EmbeddingMap reparameterize(const EmbeddingMap& embedding,
                            EmbeddingMap::ValueFn chart_map,
                            EmbeddingMap::JacobianFn chart_jacobian);

}  // namespace gatedgeom

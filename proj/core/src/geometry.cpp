#include "gatedgeom/geometry.hpp"

#include <cmath>
#include <string>

#include "gatedgeom/errors.hpp"

namespace gatedgeom {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

Vec unit(int dim, int i) { return Vec::Unit(dim, i); }

}  // namespace

bool Box::contains(const Vec& p, double margin) const {
  if (p.size() != lower.size() || p.size() != upper.size()) return false;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > lower[i] + margin && p[i] < upper[i] - margin)) return false;
  }
  return true;
}

// ---- EmbeddingMap ----------------------------------------------------------

EmbeddingMap::EmbeddingMap(int domain_dim, int ambient_dim, ValueFn value)
    : domain_dim_(domain_dim), ambient_dim_(ambient_dim), value_(std::move(value)) {
  if (domain_dim < 1 || ambient_dim < 1) {
    throw DimensionError("embedding dimensions must be positive");
  }
}

EmbeddingMap& EmbeddingMap::with_jacobian(JacobianFn jacobian) {
  jacobian_ = std::move(jacobian);
  return *this;
}

EmbeddingMap& EmbeddingMap::with_hessian(HessianFn hessian) {
  hessian_ = std::move(hessian);
  return *this;
}

EmbeddingMap& EmbeddingMap::with_domain(Box domain) {
  domain_ = std::move(domain);
  return *this;
}

EmbeddingMap& EmbeddingMap::with_steps(double jacobian_step, double hessian_step) {
  jacobian_step_ = jacobian_step;
  hessian_step_ = hessian_step;
  return *this;
}

void EmbeddingMap::check_point(const Vec& p) const {
  if (p.size() != domain_dim_) {
    throw DimensionError("point has dimension " + std::to_string(p.size()) +
                         ", chart has " + std::to_string(domain_dim_));
  }
  if (!all_finite(p)) throw DomainError("non-finite chart coordinates");
  if (domain_ && !domain_->contains(p)) throw DomainError("point outside embedding domain");
}

Vec EmbeddingMap::evaluate(const Vec& p) const {
  check_point(p);
  Vec y = value_(p);
  if (y.size() != ambient_dim_) throw DimensionError("embedding returned wrong ambient size");
  if (!all_finite(y)) throw DomainError("embedding value is not finite");
  return y;
}

Mat EmbeddingMap::jacobian(const Vec& p) const {
  if (jacobian_) {
    check_point(p);
    Mat j = jacobian_(p);
    if (!j.allFinite()) throw DomainError("embedding Jacobian is not finite");
    return j;
  }
  return jacobian_central(p, jacobian_step_);
}

Mat EmbeddingMap::jacobian_central(const Vec& p, double h) const {
  Mat j(ambient_dim_, domain_dim_);
  for (int i = 0; i < domain_dim_; ++i) {
    const Vec e = unit(domain_dim_, i) * h;
    j.col(i) = (evaluate(p + e) - evaluate(p - e)) / (2.0 * h);
  }
  return j;
}

Tensor3 EmbeddingMap::hessian(const Vec& p) const {
  if (hessian_) {
    check_point(p);
    return hessian_(p);
  }
  if (jacobian_) {
    // Differentiate the analytic Jacobian once.
    const double h = hessian_step_;
    Tensor3 out(ambient_dim_, domain_dim_, domain_dim_);
    for (int j = 0; j < domain_dim_; ++j) {
      const Vec e = unit(domain_dim_, j) * h;
      const Mat dj = (jacobian(p + e) - jacobian(p - e)) / (2.0 * h);
      for (int a = 0; a < ambient_dim_; ++a)
        for (int i = 0; i < domain_dim_; ++i) out(a, i, j) = dj(a, i);
    }
    for (int a = 0; a < ambient_dim_; ++a)
      for (int i = 0; i < domain_dim_; ++i)
        for (int j = i + 1; j < domain_dim_; ++j) {
          const double s = 0.5 * (out(a, i, j) + out(a, j, i));
          out(a, i, j) = s;
          out(a, j, i) = s;
        }
    return out;
  }
  return hessian_central(p, hessian_step_);
}

Tensor3 EmbeddingMap::hessian_central(const Vec& p, double h) const {
  Tensor3 out(ambient_dim_, domain_dim_, domain_dim_);
  const Vec f0 = evaluate(p);
  for (int i = 0; i < domain_dim_; ++i) {
    const Vec ei = unit(domain_dim_, i) * h;
    const Vec dii = (evaluate(p + ei) - 2.0 * f0 + evaluate(p - ei)) / (h * h);
    for (int a = 0; a < ambient_dim_; ++a) out(a, i, i) = dii[a];
    for (int j = i + 1; j < domain_dim_; ++j) {
      const Vec ej = unit(domain_dim_, j) * h;
      const Vec dij = (evaluate(p + ei + ej) - evaluate(p + ei - ej) -
                       evaluate(p - ei + ej) + evaluate(p - ei - ej)) /
                      (4.0 * h * h);
      for (int a = 0; a < ambient_dim_; ++a) {
        out(a, i, j) = dij[a];
        out(a, j, i) = dij[a];
      }
    }
  }
  return out;
}

// ---- ScalarField -----------------------------------------------------------

ScalarField::ScalarField(int dim, ValueFn value) : dim_(dim), value_(std::move(value)) {}

ScalarField& ScalarField::with_gradient(GradientFn gradient) {
  gradient_ = std::move(gradient);
  return *this;
}

ScalarField& ScalarField::with_hessian(HessianFn hessian) {
  hessian_ = std::move(hessian);
  return *this;
}

ScalarField& ScalarField::with_steps(double gradient_step, double hessian_step) {
  gradient_step_ = gradient_step;
  hessian_step_ = hessian_step;
  return *this;
}

double ScalarField::value(const Vec& p) const {
  const double v = value_(p);
  if (!std::isfinite(v)) throw DomainError("scalar field value is not finite");
  return v;
}

Vec ScalarField::gradient(const Vec& p) const {
  if (gradient_) return gradient_(p);
  const double h = gradient_step_;
  Vec g(dim_);
  for (int i = 0; i < dim_; ++i) {
    const Vec e = unit(dim_, i) * h;
    g[i] = (value(p + e) - value(p - e)) / (2.0 * h);
  }
  return g;
}

Mat ScalarField::hessian(const Vec& p) const {
  if (hessian_) return hessian_(p);
  const double h = hessian_step_;
  Mat out(dim_, dim_);
  if (gradient_) {
    for (int j = 0; j < dim_; ++j) {
      const Vec e = unit(dim_, j) * h;
      out.col(j) = (gradient_(p + e) - gradient_(p - e)) / (2.0 * h);
    }
    return 0.5 * (out + out.transpose());
  }
  const double f0 = value(p);
  for (int i = 0; i < dim_; ++i) {
    const Vec ei = unit(dim_, i) * h;
    out(i, i) = (value(p + ei) - 2.0 * f0 + value(p - ei)) / (h * h);
    for (int j = i + 1; j < dim_; ++j) {
      const Vec ej = unit(dim_, j) * h;
      const double v = (value(p + ei + ej) - value(p + ei - ej) - value(p - ei + ej) +
                        value(p - ei - ej)) /
                       (4.0 * h * h);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

// ---- AffineMap / PrecisionSpec --------------------------------------------

double AffineMap::min_singular_value() const {
  Eigen::JacobiSVD<Mat> svd(linear);
  const auto& s = svd.singularValues();
  return s.size() == 0 ? 0.0 : s[s.size() - 1];
}

PrecisionSpec PrecisionSpec::identity() { return PrecisionSpec{}; }

PrecisionSpec PrecisionSpec::diagonal(Vec entries) {
  if (entries.size() == 0) throw ConfigError("diagonal precision needs at least one entry");
  for (Eigen::Index i = 0; i < entries.size(); ++i) {
    if (!std::isfinite(entries[i]) || entries[i] <= 0.0) {
      throw ConfigError("precision entries must be finite and positive");
    }
  }
  PrecisionSpec spec;
  spec.kind_ = Kind::diagonal;
  spec.entries_ = std::move(entries);
  return spec;
}

PrecisionSpec PrecisionSpec::log_spaced(int dim, double condition_number) {
  if (dim < 1 || !(condition_number >= 1.0)) {
    throw ConfigError("log-spaced precision needs dim >= 1 and condition number >= 1");
  }
  Vec e(dim);
  for (int k = 0; k < dim; ++k) {
    const double t = dim == 1 ? 0.0 : static_cast<double>(k) / (dim - 1);
    e[k] = std::pow(condition_number, t);
  }
  // Pin the endpoints so max/min is the requested value exactly.
  e[0] = 1.0;
  e[dim - 1] = condition_number;
  return diagonal(std::move(e));
}

double PrecisionSpec::condition_number() const {
  if (is_identity()) return 1.0;
  return entries_.maxCoeff() / entries_.minCoeff();
}

Vec PrecisionSpec::weights(int dim) const {
  if (is_identity()) return Vec::Ones(dim);
  if (entries_.size() != dim) {
    throw DimensionError("precision has " + std::to_string(entries_.size()) +
                         " entries, ambient dimension is " + std::to_string(dim));
  }
  return entries_;
}

// ---- metric, connection, curvature ----------------------------------------

Mat metric_at(const MetricField& field, const ParamPoint& p) {
  const Mat j = field.embedding.jacobian(p);
  const Vec w = field.precision.weights(field.embedding.ambient_dim());
  Mat g = j.transpose() * w.asDiagonal() * j;
  return 0.5 * (g + g.transpose());
}

namespace {

// Stencil radius needed by riemann_at around a point, per coordinate.
double riemann_stencil_radius(const MetricField& field) {
  const EmbeddingMap& e = field.embedding;
  double r = field.christoffel_step + field.metric_step;
  if (!e.has_analytic_jacobian()) r += e.jacobian_step();
  return r;
}

void require_stencil(const MetricField& field, const ParamPoint& p, double radius) {
  const auto& dom = field.embedding.domain();
  if (dom && !dom->contains(p, radius)) {
    throw DomainError("finite-difference stencil leaves the embedding domain");
  }
}

}  // namespace

Tensor3 christoffel_at(const MetricField& field, const ParamPoint& p) {
  const int d = field.embedding.domain_dim();
  const Mat g = metric_at(field, p);
  const double det = g.determinant();
  if (!(det > field.regularity_threshold)) {
    throw RegularityError("metric is singular at the evaluation point", det);
  }
  const Mat ginv = g.inverse();

  // dg[l](i, j) = ∂_l g_ij
  std::vector<Mat> dg(d);
  const double h = field.metric_step;
  for (int l = 0; l < d; ++l) {
    const Vec e = Vec::Unit(d, l) * h;
    dg[l] = (metric_at(field, p + e) - metric_at(field, p - e)) / (2.0 * h);
  }

  Tensor3 gamma(d, d, d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) {
          s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        }
        gamma(k, i, j) = 0.5 * s;
        gamma(k, j, i) = 0.5 * s;
      }
  return gamma;
}

Tensor4 riemann_at(const MetricField& field, const ParamPoint& p) {
  const int d = field.embedding.domain_dim();
  require_stencil(field, p, riemann_stencil_radius(field));

  const Tensor3 gamma = christoffel_at(field, p);
  // dgamma[i](k, l, j) = ∂_i Γ^k_lj
  std::vector<Tensor3> dgamma;
  dgamma.reserve(d);
  const double h = field.christoffel_step;
  for (int i = 0; i < d; ++i) {
    const Vec e = Vec::Unit(d, i) * h;
    const Tensor3 plus = christoffel_at(field, p + e);
    const Tensor3 minus = christoffel_at(field, p - e);
    Tensor3 diff(d, d, d);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l)
        for (int j = 0; j < d; ++j) diff(k, l, j) = (plus(k, l, j) - minus(k, l, j)) / (2.0 * h);
    dgamma.push_back(std::move(diff));
  }

  // Mixed tensor R^k_lij.
  Tensor4 mixed(d);
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double r = dgamma[i](k, l, j) - dgamma[j](k, l, i);
          for (int m = 0; m < d; ++m) {
            r += gamma(k, i, m) * gamma(m, l, j) - gamma(k, j, m) * gamma(m, l, i);
          }
          mixed(k, l, i, j) = r;
        }

  const Mat g = metric_at(field, p);
  Tensor4 lowered(d);
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double r = 0.0;
          for (int m = 0; m < d; ++m) r += g(k, m) * mixed(m, l, i, j);
          lowered(k, l, i, j) = r;
        }
  return lowered;
}

double gaussian_curvature_at(const MetricField& field, const ParamPoint& p) {
  if (field.embedding.domain_dim() != 2) {
    throw DimensionError("Gaussian curvature needs a two-dimensional chart, got " +
                         std::to_string(field.embedding.domain_dim()));
  }
  const Tensor4 r = riemann_at(field, p);
  const double det = metric_at(field, p).determinant();
  if (!(det > field.regularity_threshold)) {
    throw RegularityError("metric is singular at the evaluation point", det);
  }
  return r(0, 1, 0, 1) / det;
}

CurvatureReport curvature_report(const MetricField& field, const ParamPoint& p) {
  CurvatureReport report;
  report.point = p;
  report.metric = metric_at(field, p);
  try {
    const Tensor4 r = riemann_at(field, p);
    report.regular = true;
    report.riemann_norm = r.frobenius_norm();
    if (field.embedding.domain_dim() == 2) {
      report.gaussian_curvature = r(0, 1, 0, 1) / report.metric.determinant();
    }
  } catch (const RegularityError&) {
    report.regular = false;
  }
  return report;
}

double graph_curvature(const ScalarField& f, const ParamPoint& p) {
  if (f.dim() != 2) throw DimensionError("graph curvature needs a function of two variables");
  const Vec grad = f.gradient(p);
  const Mat hess = f.hessian(p);
  const double w = 1.0 + grad.squaredNorm();
  const double k = (hess(0, 0) * hess(1, 1) - hess(0, 1) * hess(1, 0)) / (w * w);
  if (!std::isfinite(k)) throw DomainError("graph curvature is not finite");
  return k;
}

double codim_graph_curvature(const std::vector<ScalarField>& components, const ParamPoint& p,
                             double critical_tolerance) {
  if (components.empty()) throw DimensionError("need at least one graph component");
  double grad_sq = 0.0;
  for (const auto& f : components) {
    if (f.dim() != 2) throw DimensionError("graph components must be functions of two variables");
    grad_sq += f.gradient(p).squaredNorm();
  }
  const double grad_norm = std::sqrt(grad_sq);
  if (!(grad_norm <= critical_tolerance)) {
    throw PreconditionError("total first derivative does not vanish at the base point",
                            grad_norm);
  }
  double k = 0.0;
  for (const auto& f : components) {
    const Mat h = f.hessian(p);
    k += h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
  }
  return k;
}

EmbeddingMap whiten(const EmbeddingMap& embedding, const PrecisionSpec& precision) {
  if (precision.is_identity()) return embedding;
  const Vec scale = precision.weights(embedding.ambient_dim()).cwiseSqrt();
  EmbeddingMap out(embedding.domain_dim(), embedding.ambient_dim(),
                   [embedding, scale](const Vec& p) -> Vec {
                     return scale.cwiseProduct(embedding.evaluate(p));
                   });
  if (embedding.has_analytic_jacobian()) {
    out.with_jacobian([embedding, scale](const Vec& p) -> Mat {
      return scale.asDiagonal() * embedding.jacobian(p);
    });
  }
  if (embedding.domain()) out.with_domain(*embedding.domain());
  out.with_steps(embedding.jacobian_step(), embedding.hessian_step());
  return out;
}

Tensor3 gated_second_derivative(const AffineMap& y, const EmbeddingMap& gate,
                                const ParamPoint& p) {
  const int dim = y.domain_dim();
  const int amb = y.ambient_dim();
  if (gate.domain_dim() != dim || gate.ambient_dim() != amb) {
    throw DimensionError("gate and affine map must share domain and ambient dimensions");
  }
  const Vec yv = y(p);
  const Mat dg = gate.jacobian(p);
  const Tensor3 ddg = gate.hessian(p);
  Tensor3 out(amb, dim, dim);
  for (int a = 0; a < amb; ++a)
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        out(a, i, j) = y.linear(a, i) * dg(a, j) + y.linear(a, j) * dg(a, i) +
                       yv[a] * ddg(a, i, j);
      }
  return out;
}

SecondFundamentalForm second_fundamental_form(const EmbeddingMap& embedding,
                                              const ParamPoint& p) {
  const int d = embedding.domain_dim();
  const int amb = embedding.ambient_dim();
  if (amb <= d) throw DimensionError("embedding has no normal directions");
  const Mat j = embedding.jacobian(p);
  Eigen::HouseholderQR<Mat> qr(j);
  const Mat q = qr.householderQ() * Mat::Identity(amb, amb);
  SecondFundamentalForm sff;
  sff.tangent_frame = q.leftCols(d);
  sff.normal_frame = q.rightCols(amb - d);
  const Tensor3 h = embedding.hessian(p);
  for (int a = 0; a < amb - d; ++a) {
    Mat b(d, d);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) {
        double s = 0.0;
        for (int c = 0; c < amb; ++c) s += h(c, i, k) * sff.normal_frame(c, a);
        b(i, k) = s;
      }
    sff.components.push_back(std::move(b));
  }
  return sff;
}

double gauss_equation_curvature(const EmbeddingMap& embedding, const ParamPoint& p) {
  if (embedding.domain_dim() != 2) throw DimensionError("Gauss equation route needs d = 2");
  const Mat j = embedding.jacobian(p);
  const double det = (j.transpose() * j).determinant();
  if (!(det > kRegularityThreshold)) throw RegularityError("metric is singular", det);
  const SecondFundamentalForm sff = second_fundamental_form(embedding, p);
  double r1212 = 0.0;
  for (const Mat& b : sff.components) r1212 += b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0);
  return r1212 / det;
}

// ---- standard embeddings --------------------------------------------------

EmbeddingMap affine_embedding(const AffineMap& map) {
  EmbeddingMap e(map.domain_dim(), map.ambient_dim(), [map](const Vec& p) -> Vec { return map(p); });
  const Mat linear = map.linear;
  const int amb = map.ambient_dim();
  const int dim = map.domain_dim();
  e.with_jacobian([linear](const Vec&) -> Mat { return linear; });
  e.with_hessian([amb, dim](const Vec&) { return Tensor3(amb, dim, dim); });
  return e;
}

EmbeddingMap sphere_patch() {
  EmbeddingMap e(2, 3, [](const Vec& p) -> Vec {
    Vec s(3);
    s << std::cos(p[0]) * std::cos(p[1]), std::cos(p[0]) * std::sin(p[1]), std::sin(p[0]);
    return s;
  });
  e.with_jacobian([](const Vec& p) -> Mat {
    const double c1 = std::cos(p[0]), s1 = std::sin(p[0]);
    const double c2 = std::cos(p[1]), s2 = std::sin(p[1]);
    Mat j(3, 2);
    j << -s1 * c2, -c1 * s2,
         -s1 * s2, c1 * c2,
         c1, 0.0;
    return j;
  });
  return e;
}

EmbeddingMap graph_embedding(const ScalarField& f) { return multi_graph_embedding({f}); }

EmbeddingMap multi_graph_embedding(const std::vector<ScalarField>& components) {
  const int k = static_cast<int>(components.size());
  EmbeddingMap e(2, 2 + k, [components, k](const Vec& p) -> Vec {
    Vec out(2 + k);
    out[0] = p[0];
    out[1] = p[1];
    for (int a = 0; a < k; ++a) out[2 + a] = components[a].value(p);
    return out;
  });
  e.with_jacobian([components, k](const Vec& p) -> Mat {
    Mat j = Mat::Zero(2 + k, 2);
    j(0, 0) = 1.0;
    j(1, 1) = 1.0;
    for (int a = 0; a < k; ++a) j.row(2 + a) = components[a].gradient(p).transpose();
    return j;
  });
  return e;
}

EmbeddingMap append_constant_coordinates(const EmbeddingMap& embedding, const Vec& constants) {
  const int amb = embedding.ambient_dim();
  const int extra = static_cast<int>(constants.size());
  EmbeddingMap out(embedding.domain_dim(), amb + extra,
                   [embedding, constants, amb, extra](const Vec& p) -> Vec {
                     Vec y(amb + extra);
                     y.head(amb) = embedding.evaluate(p);
                     y.tail(extra) = constants;
                     return y;
                   });
  if (embedding.has_analytic_jacobian()) {
    out.with_jacobian([embedding, amb, extra](const Vec& p) -> Mat {
      Mat j = Mat::Zero(amb + extra, embedding.domain_dim());
      j.topRows(amb) = embedding.jacobian(p);
      return j;
    });
  }
  if (embedding.domain()) out.with_domain(*embedding.domain());
  out.with_steps(embedding.jacobian_step(), embedding.hessian_step());
  return out;
}

EmbeddingMap reparameterize(const EmbeddingMap& embedding, EmbeddingMap::ValueFn chart_map,
                            EmbeddingMap::JacobianFn chart_jacobian) {
  EmbeddingMap out(embedding.domain_dim(), embedding.ambient_dim(),
                   [embedding, chart_map](const Vec& p) -> Vec {
                     return embedding.evaluate(chart_map(p));
                   });
  if (embedding.has_analytic_jacobian() && chart_jacobian) {
    out.with_jacobian([embedding, chart_map, chart_jacobian](const Vec& p) -> Mat {
      return embedding.jacobian(chart_map(p)) * chart_jacobian(p);
    });
  }
  out.with_steps(embedding.jacobian_step(), embedding.hessian_step());
  return out;
}

}  // namespace gatedgeom

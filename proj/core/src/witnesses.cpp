#include "gatedgeom/witnesses.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/parallel.hpp"
#include "gatedgeom/rng.hpp"

namespace gatedgeom {

namespace {

// logit of a value that must already lie strictly inside the unclamped range.
double strict_logit(double r, const char* what) {
  if (!(r > kLogitClamp && r < 1.0 - kLogitClamp)) {
    throw DomainError(std::string(what) + " outside (0, 1): " + std::to_string(r));
  }
  return logit(r);
}

double logit_slope(double r) { return 1.0 / (r * (1.0 - r)); }

Box square_box(double lo, double hi) {
  return Box{Vec::Constant(2, lo), Vec::Constant(2, hi)};
}

}  // namespace

EmbeddingMap hadamard_embedding(const AffineMap& y, const EmbeddingMap& gate) {
  if (gate.domain_dim() != y.domain_dim() || gate.ambient_dim() != y.ambient_dim()) {
    throw DimensionError("gate and affine map must share domain and ambient dimensions");
  }
  EmbeddingMap out(y.domain_dim(), y.ambient_dim(), [y, gate](const Vec& p) -> Vec {
    return y(p).cwiseProduct(gate.evaluate(p));
  });
  if (gate.has_analytic_jacobian()) {
    out.with_jacobian([y, gate](const Vec& p) -> Mat {
      const Vec g = gate.evaluate(p);
      return g.asDiagonal() * y.linear + y(p).asDiagonal() * gate.jacobian(p);
    });
  }
  if (gate.domain()) out.with_domain(*gate.domain());
  return out;
}

EmbeddingMap sigmoid_gate(const EmbeddingMap& gate_input, const Mat& weight) {
  if (weight.rows() != gate_input.ambient_dim()) {
    throw DimensionError("gate weight rows must match the gate input dimension");
  }
  const int amb = static_cast<int>(weight.cols());
  auto gate_of = [gate_input, weight](const Vec& p) -> Vec {
    const Vec pre = weight.transpose() * gate_input.evaluate(p);
    return pre.unaryExpr([](double v) { return sigmoid(v); });
  };
  EmbeddingMap out(gate_input.domain_dim(), amb, gate_of);
  if (gate_input.has_analytic_jacobian()) {
    out.with_jacobian([gate_input, weight, gate_of](const Vec& p) -> Mat {
      const Vec s = gate_of(p);
      const Vec slope = s.cwiseProduct(Vec::Ones(s.size()) - s);
      return slope.asDiagonal() * (weight.transpose() * gate_input.jacobian(p));
    });
  }
  if (gate_input.domain()) out.with_domain(*gate_input.domain());
  return out;
}

EmbeddingMap constant_map(int domain_dim, const Vec& value) {
  EmbeddingMap out(domain_dim, static_cast<int>(value.size()),
                   [value](const Vec&) -> Vec { return value; });
  const auto amb = value.size();
  out.with_jacobian([amb, domain_dim](const Vec&) -> Mat { return Mat::Zero(amb, domain_dim); });
  out.with_hessian([amb, domain_dim](const Vec&) {
    return Tensor3(static_cast<int>(amb), domain_dim, domain_dim);
  });
  return out;
}

std::vector<ParamPoint> interior_grid(const Box& box, int n, double inset) {
  if (n < 1 || box.lower.size() != 2) throw DimensionError("interior_grid needs a 2-D box and n >= 1");
  const Vec width = box.upper - box.lower;
  const Vec lo = box.lower + inset * width;
  const Vec hi = box.upper - inset * width;
  std::vector<ParamPoint> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double tx = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
      const double ty = n == 1 ? 0.5 : static_cast<double>(j) / (n - 1);
      ParamPoint p(2);
      p << lo[0] + tx * (hi[0] - lo[0]), lo[1] + ty * (hi[1] - lo[1]);
      out.push_back(p);
    }
  return out;
}

// ---- sphere witness ---------------------------------------------------------

namespace {

// φ ↦ logit(1 / |Y_{0:2}(φ)|), replicated into the listed output coordinates.
EmbeddingMap inverse_norm_logit(const AffineMap& y, int out_dim, int copies, const Box& domain) {
  auto radius = [y](const Vec& p) { return 1.0 / y(p).head(3).norm(); };
  EmbeddingMap e(2, out_dim, [radius, out_dim, copies](const Vec& p) -> Vec {
    Vec x = Vec::Zero(out_dim);
    x.head(copies).setConstant(strict_logit(radius(p), "1/|Y|"));
    return x;
  });
  e.with_jacobian([y, radius, out_dim, copies](const Vec& p) -> Mat {
    const Vec yv = y(p).head(3);
    const double r = radius(p);
    // dr/dφ = -(Y^T B) / |Y|^3
    const Eigen::RowVectorXd dr = -(yv.transpose() * y.linear.topRows(3)) * (r * r * r);
    Mat j = Mat::Zero(out_dim, 2);
    for (int c = 0; c < copies; ++c) j.row(c) = logit_slope(r) * dr;
    return j;
  });
  e.with_domain(domain);
  return e;
}

AffineMap sphere_affine() {
  AffineMap y;
  y.offset = Vec::Constant(3, 2.0);
  y.linear = Mat::Zero(3, 2);
  y.linear(0, 0) = 1.0;
  y.linear(1, 1) = 1.0;
  return y;
}

}  // namespace

SphereWitness build_sphere_witness() {
  const AffineMap y = sphere_affine();
  const Box domain = square_box(-0.5, 0.5);
  const Mat w = Mat::Ones(1, 3);
  EmbeddingMap ungated = affine_embedding(y);
  ungated.with_domain(domain);
  EmbeddingMap gated = hadamard_embedding(y, sigmoid_gate(inverse_norm_logit(y, 1, 1, domain), w));
  return SphereWitness{y, w, domain, std::move(ungated), std::move(gated)};
}

// ---- content-aware witness ----------------------------------------------------

namespace {

// Gate ratios s(φ) ⊘ (a + Bφ) and their Jacobian.
struct Ratios {
  Vec r;
  Mat dr;
};

Ratios gate_ratios(const AffineMap& y, const EmbeddingMap& target, const ParamPoint& phi) {
  const Vec yv = y(phi);
  const Vec s = target.evaluate(phi);
  const Mat js = target.jacobian(phi);
  Ratios out{s.cwiseQuotient(yv), Mat(3, 2)};
  for (int k = 0; k < 3; ++k) {
    out.dr.row(k) = (js.row(k) * yv[k] - s[k] * y.linear.row(k)) / (yv[k] * yv[k]);
  }
  return out;
}

}  // namespace

Vec ContentAwareWitness::target(const ParamPoint& phi) const {
  return sphere_patch().evaluate(phi);
}

Mat ContentAwareWitness::inputs(const ParamPoint& phi) const {
  // L = W_V W_O is a power-of-two scaled permutation, so X_1 L^-1 L / n
  // reproduces a + Bφ bit for bit.
  const Mat l = attention.value * attention.output;
  const Mat l_inv = l.transpose().unaryExpr([](double v) { return v == 0.0 ? 0.0 : 1.0 / v; });
  Mat x = Mat::Zero(n_tokens, 3);
  x.row(0) = (static_cast<double>(n_tokens) * affine(phi)).transpose() * l_inv;
  return x;
}

Vec ContentAwareWitness::gate_input(const ParamPoint& phi) const {
  const Ratios rat = gate_ratios(affine, sphere_patch(), phi);
  Vec t(3);
  for (int k = 0; k < 3; ++k) {
    t[k] = strict_logit(rat.r[k], ("gate ratio " + std::to_string(k)).c_str());
  }
  return gate_left_inverse.transpose() * t;
}

Mat ContentAwareWitness::ungated_output(const ParamPoint& phi) const {
  return attention_output(inputs(phi), attention);
}

Mat ContentAwareWitness::gated_output(const ParamPoint& phi) const {
  const Mat y = ungated_output(phi);
  const Vec pre = gate_weight.transpose() * gate_input(phi);
  const Eigen::RowVectorXd s = pre.unaryExpr([](double v) { return sigmoid(v); }).transpose();
  return y.array().rowwise() * s.array();
}

EmbeddingMap ContentAwareWitness::ungated_embedding() const {
  const ContentAwareWitness self = *this;
  EmbeddingMap e(2, 3, [self](const Vec& p) -> Vec { return self.ungated_output(p).row(0).transpose(); });
  const Mat b = affine.linear;
  e.with_jacobian([b](const Vec&) -> Mat { return b; });
  e.with_domain(domain);
  return e;
}

EmbeddingMap ContentAwareWitness::gated_embedding() const {
  const ContentAwareWitness self = *this;
  EmbeddingMap e(2, 3, [self](const Vec& p) -> Vec { return self.gated_output(p).row(0).transpose(); });
  e.with_jacobian([self](const Vec& p) -> Mat {
    // μ = Y ⊙ σ(M^T t), M = W† W_θ, t = logit(r)
    const Ratios rat = gate_ratios(self.affine, sphere_patch(), p);
    Vec t(3);
    Mat dt(3, 2);
    for (int k = 0; k < 3; ++k) {
      t[k] = logit(rat.r[k]);
      dt.row(k) = logit_slope(rat.r[k]) * rat.dr.row(k);
    }
    const Mat m = self.gate_left_inverse * self.gate_weight;
    const Vec pre = m.transpose() * t;
    const Vec s = pre.unaryExpr([](double v) { return sigmoid(v); });
    const Vec slope = s.cwiseProduct(Vec::Ones(3) - s);
    const Vec y = self.affine(p);
    return s.asDiagonal() * self.affine.linear +
           (y.cwiseProduct(slope)).asDiagonal() * (m.transpose() * dt);
  });
  e.with_domain(domain);
  return e;
}

ContentAwareWitness build_content_aware_witness(int n_tokens, int gate_dim) {
  if (gate_dim < 3) throw ConstructionError("gate input dimension must be at least 3");
  if (n_tokens < 1) throw ConstructionError("need at least one token");
  ContentAwareWitness w;
  w.n_tokens = n_tokens;
  w.gate_dim = gate_dim;
  w.affine.offset = Vec::Constant(3, 2.0);
  w.affine.linear.resize(3, 2);
  w.affine.linear << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5;
  w.domain = square_box(0.0, std::numbers::pi / 4.0);

  w.attention = AttentionParams::zeros(3);
  Mat cyclic = Mat::Zero(3, 3);
  for (int i = 0; i < 3; ++i) cyclic(i, (i + 1) % 3) = 1.0;
  w.attention.value = 2.0 * cyclic;
  w.attention.output = 0.25 * Mat::Identity(3, 3);

  CounterRng rng(0, "witness/content_gate");
  w.gate_weight.resize(gate_dim, 3);
  for (int i = 0; i < gate_dim; ++i)
    for (int j = 0; j < 3; ++j) w.gate_weight(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(w.gate_weight);
  const Mat r = qr.matrixQR().topRows(3).triangularView<Eigen::Upper>();
  const Mat q_thin = qr.householderQ() * Mat::Identity(gate_dim, 3);
  w.gate_left_inverse = r.triangularView<Eigen::Upper>().solve(q_thin.transpose());
  const double li_err = (w.gate_left_inverse * w.gate_weight - Mat::Identity(3, 3)).cwiseAbs().maxCoeff();
  if (!(li_err < 1e-10)) {
    throw ConstructionError("left inverse of the gate weight is inaccurate: " + std::to_string(li_err));
  }

  // Post-hoc: no logit argument may be clamped anywhere on the domain.
  for (const auto& p : interior_grid(w.domain, 33, 1e-3)) {
    const Vec ratio = sphere_patch().evaluate(p).cwiseQuotient(w.affine(p));
    for (int k = 0; k < 3; ++k) {
      if (!(ratio[k] > kLogitClamp && ratio[k] < 1.0 - kLogitClamp)) {
        throw ConstructionError("gate ratio coordinate " + std::to_string(k) +
                                " leaves (0, 1) at (" + std::to_string(p[0]) + ", " +
                                std::to_string(p[1]) + ")");
      }
    }
  }
  return w;
}

// ---- depth stack ------------------------------------------------------------

DepthStackModel::DepthStackModel(DepthStack stack) : stack_(std::move(stack)) {
  const int dim = stack_.ambient_dim;
  if (dim < 4) throw ConstructionError("depth stack needs ambient dimension >= 4");
  for (double a : stack_.coefficients) {
    if (!(a > 0.0)) throw ConstructionError("depth stack coefficients must be positive");
  }
  for (int l = 0; l < layers(); ++l) {
    AttentionParams at = AttentionParams::zeros(dim);
    // Value/output read the constant fourth coordinate into the third.
    at.value(3, 2) = 1.0;
    at.output = Mat::Identity(dim, dim);
    attention_.push_back(std::move(at));
  }
  projection_ = Mat::Zero(dim, dim);
  for (int i = 0; i < 3; ++i) projection_(i, i) = 1.0;
}

double DepthStackModel::total_coefficient() const {
  double a = 0.0;
  for (double c : stack_.coefficients) a += c;
  return a;
}

Vec DepthStackModel::initial_state(const ParamPoint& p) const {
  Vec h = Vec::Zero(stack_.ambient_dim);
  h[0] = p[0];
  h[1] = p[1];
  h[3] = 1.0;
  return h;
}

Vec DepthStackModel::gate_vector(int layer, const ParamPoint& p) const {
  const double target = stack_.coefficients.at(layer) * stack_.psi.value(p);
  // X_g = logit(a_ℓ ψ) e_3 and W_θ = I.
  Vec pre = Vec::Zero(stack_.ambient_dim);
  pre[2] = strict_logit(target, "a_l * psi");
  return pre.unaryExpr([](double v) { return sigmoid(v); });
}

Vec DepthStackModel::layer_output(int layer, const Vec& h, const ParamPoint& p) const {
  const Mat token = h.transpose();
  const Vec y = attention_output(token, attention_.at(layer)).row(0).transpose();
  return y.cwiseProduct(gate_vector(layer, p));
}

Vec DepthStackModel::hidden_state(const ParamPoint& p) const {
  Vec h = initial_state(p);
  for (int l = 0; l < layers(); ++l) h += layer_output(l, h, p);
  return h;
}

Vec DepthStackModel::representation(const ParamPoint& p) const { return projection_ * hidden_state(p); }

EmbeddingMap DepthStackModel::embedding() const {
  const DepthStackModel self = *this;
  EmbeddingMap e(2, stack_.ambient_dim, [self](const Vec& p) -> Vec { return self.representation(p); });
  e.with_jacobian([self](const Vec& p) -> Mat {
    Mat j = Mat::Zero(self.ambient_dim(), 2);
    j(0, 0) = 1.0;
    j(1, 1) = 1.0;
    j.row(2) = self.total_coefficient() * self.stack().psi.gradient(p).transpose();
    return j;
  });
  e.with_domain(stack_.domain);
  return e;
}

DepthStackModel build_depth_stack(const DepthStack& stack, int range_grid) {
  for (const auto& p : interior_grid(stack.domain, range_grid, 0.0)) {
    const double psi = stack.psi.value(p);
    for (std::size_t l = 0; l < stack.coefficients.size(); ++l) {
      const double v = stack.coefficients[l] * psi;
      if (!(v > 0.0 && v < 1.0)) {
        throw ConstructionError("range constraint 0 < a_l psi < 1 fails at layer " +
                                std::to_string(l) + ": " + std::to_string(v));
      }
    }
  }
  return DepthStackModel(stack);
}

std::vector<DepthScanRow> depth_curvature_scan(const ScalarField& psi, double a0,
                                               const std::vector<int>& layer_counts,
                                               const Box& domain, const ParamPoint& p) {
  const double grad_norm = psi.gradient(p).norm();
  if (!(grad_norm <= kCriticalPointTolerance)) {
    throw PreconditionError("gradient of psi does not vanish at the base point", grad_norm);
  }
  const Mat h = psi.hessian(p);
  const double det_h = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
  std::vector<DepthScanRow> rows;
  for (int layers : layer_counts) {
    if (layers < 1) throw ConfigError("layer counts must be positive");
    const DepthStackModel model =
        build_depth_stack(DepthStack{std::vector<double>(layers, a0), psi, domain, 4});
    const ScalarField third(2, [model](const Vec& x) { return model.representation(x)[2]; });
    const double a_l = model.total_coefficient();
    rows.push_back({layers, graph_curvature(third, p), a_l * a_l * det_h});
  }
  return rows;
}

double loglog_slope(const std::vector<DepthScanRow>& rows) {
  if (rows.size() < 2) throw PreconditionError("slope needs at least two rows", rows.size());
  double mx = 0.0, my = 0.0;
  for (const auto& r : rows) {
    mx += std::log(static_cast<double>(r.layers));
    my += std::log(std::abs(r.measured));
  }
  mx /= rows.size();
  my /= rows.size();
  double sxy = 0.0, sxx = 0.0;
  for (const auto& r : rows) {
    const double x = std::log(static_cast<double>(r.layers)) - mx;
    sxy += x * (std::log(std::abs(r.measured)) - my);
    sxx += x * x;
  }
  return sxy / sxx;
}

// ---- robustness ------------------------------------------------------------------

RobustnessWitness lifted_sphere_witness(int ambient_dim) {
  if (ambient_dim < 4) throw ConstructionError("lifted witness needs ambient dimension >= 4");
  AffineMap y;
  y.offset = Vec::Ones(ambient_dim);
  y.offset.head(3).setConstant(2.0);
  y.linear = Mat::Zero(ambient_dim, 2);
  y.linear(0, 0) = 1.0;
  y.linear(1, 1) = 1.0;
  const Box domain = square_box(-0.5, 0.5);
  RobustnessWitness w{y, domain, inverse_norm_logit(y, ambient_dim, 3, domain),
                      Mat::Identity(ambient_dim, ambient_dim)};
  return w;
}

EmbeddingMap robustness_embedding(const RobustnessWitness& w, const Mat& weight) {
  return hadamard_embedding(w.affine, sigmoid_gate(w.gate_input, weight));
}

EmbeddingMap constant_gate_embedding(const RobustnessWitness& w) {
  EmbeddingMap g = constant_map(2, Vec::Ones(w.affine.ambient_dim()));
  g.with_domain(w.domain);
  return hadamard_embedding(w.affine, g);
}

RobustnessReport grid_curvature(const EmbeddingMap& embedding, const Box& domain,
                                const RobustnessConfig& config) {
  RobustnessReport rep;
  rep.trials = 1;
  rep.min_curvature = std::numeric_limits<double>::infinity();
  rep.max_curvature = -std::numeric_limits<double>::infinity();
  const MetricField field(embedding);
  for (const auto& p : interior_grid(domain, config.grid, config.inset)) {
    const CurvatureReport c = curvature_report(field, p);
    if (!c.regular || !c.gaussian_curvature) {
      ++rep.regularity_failures;
      continue;
    }
    rep.min_curvature = std::min(rep.min_curvature, *c.gaussian_curvature);
    rep.max_curvature = std::max(rep.max_curvature, *c.gaussian_curvature);
  }
  rep.passing = rep.regularity_failures == 0 && rep.min_curvature >= config.min_curvature ? 1 : 0;
  rep.fraction = rep.passing;
  return rep;
}

RobustnessReport robustness_sweep(const RobustnessWitness& w, double radius,
                                  const RobustnessConfig& config) {
  const auto n = w.base_weight.rows();
  const auto m = w.base_weight.cols();
  std::vector<RobustnessReport> per_trial(config.trials);
  std::vector<char> done(config.trials, 0);
  std::atomic<bool> failed{false};
  for_each_parallel(config.trials, config.workers, [&](std::size_t t) {
    if (config.stop_on_failure && failed.load()) return;
    CounterRng rng(config.seed, "robustness/trial", t);
    Mat delta(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) delta(i, j) = rng.normal();
    // Uniform in the Frobenius ball: direction from a Gaussian, radius u^(1/dim).
    const double scale = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n * m));
    delta *= scale / delta.norm();
    per_trial[t] = grid_curvature(robustness_embedding(w, w.base_weight + delta), w.domain, config);
    done[t] = 1;
    if (!per_trial[t].passing) failed.store(true);
  });

  RobustnessReport rep;
  rep.radius = radius;
  rep.min_curvature = std::numeric_limits<double>::infinity();
  rep.max_curvature = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < config.trials; ++t) {
    if (!done[t]) continue;
    ++rep.trials;
    rep.passing += per_trial[t].passing;
    rep.regularity_failures += per_trial[t].regularity_failures;
    rep.min_curvature = std::min(rep.min_curvature, per_trial[t].min_curvature);
    rep.max_curvature = std::max(rep.max_curvature, per_trial[t].max_curvature);
  }
  rep.fraction = rep.trials > 0 ? static_cast<double>(rep.passing) / rep.trials : 0.0;
  return rep;
}

double bisect_robust_radius(const RobustnessWitness& w, double upper, int iterations,
                            const RobustnessConfig& config, RobustnessReport* at_radius) {
  RobustnessConfig quick = config;
  quick.stop_on_failure = true;
  auto all_pass = [&](double r) {
    const RobustnessReport rep = robustness_sweep(w, r, quick);
    return rep.trials == config.trials && rep.passing == rep.trials;
  };
  double lo = 0.0;
  double hi = upper;
  if (all_pass(hi)) {
    lo = hi;
  } else {
    for (int i = 0; i < iterations; ++i) {
      const double mid = 0.5 * (lo + hi);
      (all_pass(mid) ? lo : hi) = mid;
    }
  }
  if (at_radius) *at_radius = robustness_sweep(w, lo, config);
  return lo;
}

// ---- perturbation polynomial -------------------------------------------------------

namespace {

EmbeddingMap base_map(const GatedBase& base) { return hadamard_embedding(base.affine, base.gate); }

// Upper-triangular R of the thin QR of DF(φ0).
Mat tangent_r(const GatedBase& base) {
  const Mat j = base_map(base).jacobian(base.point);
  Eigen::HouseholderQR<Mat> qr(j);
  const int d = static_cast<int>(j.cols());
  return qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
}

}  // namespace

Vec admissible_normal(const GatedBase& base) {
  const Vec y0 = base.affine(base.point);
  const int d = base.affine.domain_dim();
  std::vector<int> support;
  for (int j = 0; j < y0.size(); ++j)
    if (std::abs(y0[j]) > 1e-12) support.push_back(j);
  if (static_cast<int>(support.size()) < d + 1) {
    throw ConstructionError("Y(phi0) has fewer than d + 1 nonzero coordinates");
  }
  const Mat j = base_map(base).jacobian(base.point);
  Mat a(d, static_cast<Eigen::Index>(support.size()));
  for (std::size_t c = 0; c < support.size(); ++c) a.col(c) = j.row(support[c]).transpose();
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * sv[0]) ++rank;
  if (rank >= static_cast<int>(support.size())) {
    throw ConstructionError("no normal direction supported on the nonzero coordinates of Y");
  }
  const Vec ns = svd.matrixV().col(static_cast<Eigen::Index>(support.size()) - 1);
  Vec n = Vec::Zero(y0.size());
  for (std::size_t c = 0; c < support.size(); ++c) n[support[c]] = ns[c];
  n.normalize();
  for (Eigen::Index i = 0; i < n.size(); ++i) {
    if (std::abs(n[i]) > 1e-12) {
      if (n[i] < 0) n = -n;
      break;
    }
  }
  return n;
}

EmbeddingMap perturbed_gate(const GatedBase& base, const Vec& normal, double epsilon) {
  const Mat r = tangent_r(base);
  const Mat rtr = r.transpose() * r;
  const ParamPoint p0 = base.point;
  const Vec y0 = base.affine(p0);

  // Bump radius: inside the domain and small enough that Y_j stays away from 0
  // wherever n_j != 0.
  double radius = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    radius = std::min({radius, p0[i] - base.domain.lower[i], base.domain.upper[i] - p0[i]});
  }
  radius *= 0.5;
  for (Eigen::Index j = 0; j < normal.size(); ++j) {
    if (normal[j] == 0.0) continue;
    const double bn = base.affine.linear.row(j).norm();
    if (bn > 0.0) radius = std::min(radius, 0.5 * std::abs(y0[j]) / bn);
  }

  // χ(ρ) = 1 on ρ <= r/2, 0 on ρ >= r, quintic smoothstep in between.
  auto bump = [radius](double rho, double* slope) {
    const double half = 0.5 * radius;
    if (rho <= half) {
      *slope = 0.0;
      return 1.0;
    }
    if (rho >= radius) {
      *slope = 0.0;
      return 0.0;
    }
    const double t = (rho - half) / half;
    *slope = -30.0 * t * t * (1.0 - t) * (1.0 - t) / half;
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
  };
  // χ q_ε and its gradient.
  auto bump_q = [=](const Vec& p, Vec* grad) {
    const Vec dp = p - p0;
    const double q = 0.5 * epsilon * dp.dot(rtr * dp);
    double slope = 0.0;
    const double rho = dp.norm();
    const double chi = bump(rho, &slope);
    if (grad) {
      *grad = chi * epsilon * (rtr * dp);
      if (slope != 0.0) *grad += slope * q * dp / rho;
    }
    return chi * q;
  };

  const AffineMap y = base.affine;
  const EmbeddingMap gate = base.gate;
  EmbeddingMap out(gate.domain_dim(), gate.ambient_dim(), [=](const Vec& p) -> Vec {
    Vec g = gate.evaluate(p);
    const double cq = bump_q(p, nullptr);
    const Vec yv = y(p);
    for (Eigen::Index j = 0; j < g.size(); ++j)
      if (normal[j] != 0.0) g[j] += cq * normal[j] / yv[j];
    return g;
  });
  if (gate.has_analytic_jacobian()) {
    out.with_jacobian([=](const Vec& p) -> Mat {
      Mat jg = gate.jacobian(p);
      Vec grad;
      const double cq = bump_q(p, &grad);
      const Vec yv = y(p);
      for (Eigen::Index j = 0; j < jg.rows(); ++j) {
        if (normal[j] == 0.0) continue;
        jg.row(j) += normal[j] * (grad.transpose() / yv[j] -
                                  cq * y.linear.row(j) / (yv[j] * yv[j]));
      }
      return jg;
    });
  }
  out.with_domain(base.domain);
  return out;
}

PerturbationFit perturbation_polynomial_check(const GatedBase& base,
                                              const std::vector<double>& epsilons) {
  if (epsilons.size() < 3) throw ConfigError("a quadratic fit needs at least three epsilons");
  if (base.affine.domain_dim() != 2) throw DimensionError("perturbation check needs d = 2");
  PerturbationFit fit;
  fit.normal = admissible_normal(base);
  fit.epsilons = epsilons;

  // In coordinates ξ = R (φ - φ0) the metric at φ0 is the identity, so
  // R_1212 equals the Gaussian curvature there.
  const Mat r = tangent_r(base);
  const Mat r_inv = r.inverse();
  const Tensor3 h = base_map(base).hessian(base.point);
  Mat b_phi(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < fit.normal.size(); ++c) s += h(static_cast<int>(c), i, j) * fit.normal[c];
      b_phi(i, j) = s;
    }
  const Mat b_xi = r_inv.transpose() * b_phi * r_inv;
  fit.expected_linear = b_xi.trace();
  fit.base_value = gauss_equation_curvature(base_map(base), base.point);

  Mat design(static_cast<Eigen::Index>(epsilons.size()), 3);
  Vec rhs(static_cast<Eigen::Index>(epsilons.size()));
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    const EmbeddingMap f = hadamard_embedding(base.affine, perturbed_gate(base, fit.normal, epsilons[k]));
    const double value = gauss_equation_curvature(f, base.point);
    fit.values.push_back(value);
    design(k, 0) = 1.0;
    design(k, 1) = epsilons[k];
    design(k, 2) = epsilons[k] * epsilons[k];
    rhs[k] = value;
  }
  const Vec coef = design.colPivHouseholderQr().solve(rhs);
  fit.constant = coef[0];
  fit.linear = coef[1];
  fit.quadratic = coef[2];
  return fit;
}

GatedBase affine_base() {
  const AffineMap y = sphere_affine();
  const Box domain = square_box(-0.5, 0.5);
  EmbeddingMap gate = constant_map(2, Vec::Ones(3));
  gate.with_domain(domain);
  ParamPoint p(2);
  p << 0.1, -0.2;
  return GatedBase{y, gate, p, domain};
}

GatedBase sphere_base() {
  const SphereWitness w = build_sphere_witness();
  ParamPoint p(2);
  p << 0.1, 0.2;
  return GatedBase{w.affine, sigmoid_gate(inverse_norm_logit(w.affine, 1, 1, w.domain), w.gate_weight), p,
                   w.domain};
}

GatedBase gated4_base() {
  AffineMap y;
  y.offset.resize(4);
  y.offset << 1.5, 2.0, 1.0, 2.5;
  y.linear.resize(4, 2);
  y.linear << 1.0, 0.0, 0.0, 1.0, 0.5, -0.5, 0.3, 0.7;
  const Box domain = square_box(-0.5, 0.5);
  EmbeddingMap x(2, 3, [](const Vec& p) -> Vec {
    Vec v(3);
    v << p[0], p[1], p[0] * p[1];
    return v;
  });
  x.with_jacobian([](const Vec& p) -> Mat {
    Mat j(3, 2);
    j << 1.0, 0.0, 0.0, 1.0, p[1], p[0];
    return j;
  });
  x.with_domain(domain);
  Mat w(3, 4);
  w << 0.8, -0.5, 0.3, 1.1,
       -0.4, 0.9, 0.6, -0.7,
       1.2, 0.2, -0.9, 0.5;
  ParamPoint p(2);
  p << 0.15, -0.1;
  return GatedBase{y, sigmoid_gate(x, w), p, domain};
}

}  // namespace gatedgeom

#include "gatedgeom/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/format.hpp"
#include "gatedgeom/geometry.hpp"
#include "gatedgeom/rng.hpp"
#include "gatedgeom/witnesses.hpp"
#include "json.hpp"

namespace gatedgeom {

namespace {

VerifyRecord record(const std::string& id, const std::string& quantity, double expected,
                    double measured, double tolerance) {
  const bool pass = std::isfinite(measured) && std::abs(measured - expected) <= tolerance;
  return VerifyRecord{id, quantity, expected, measured, tolerance, pass};
}

// Frobenius-style relative error with a floor on the denominator.
double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// ½ φ^T H φ + cubic terms: critical at the origin, analytic derivatives.
ScalarField cubic_field(const Mat& h, const Vec& c) {
  ScalarField f(2, [h, c](const Vec& p) {
    const double u = p[0], v = p[1];
    return 0.5 * (h(0, 0) * u * u + 2.0 * h(0, 1) * u * v + h(1, 1) * v * v) + c[0] * u * u * u +
           c[1] * u * u * v + c[2] * u * v * v + c[3] * v * v * v;
  });
  f.with_gradient([h, c](const Vec& p) {
    const double u = p[0], v = p[1];
    Vec g(2);
    g << h(0, 0) * u + h(0, 1) * v + 3 * c[0] * u * u + 2 * c[1] * u * v + c[2] * v * v,
        h(0, 1) * u + h(1, 1) * v + c[1] * u * u + 2 * c[2] * u * v + 3 * c[3] * v * v;
    return g;
  });
  f.with_hessian([h, c](const Vec& p) {
    const double u = p[0], v = p[1];
    Mat m(2, 2);
    m(0, 0) = h(0, 0) + 6 * c[0] * u + 2 * c[1] * v;
    m(0, 1) = m(1, 0) = h(0, 1) + 2 * c[1] * u + 2 * c[2] * v;
    m(1, 1) = h(1, 1) + 2 * c[2] * u + 6 * c[3] * v;
    return m;
  });
  return f;
}

ScalarField random_cubic_field(CounterRng& rng) {
  Mat h(2, 2);
  h(0, 0) = rng.uniform(-2, 2);
  h(1, 1) = rng.uniform(-2, 2);
  h(0, 1) = h(1, 0) = rng.uniform(-1, 1);
  Vec c(4);
  for (int i = 0; i < 4; ++i) c[i] = rng.uniform(-0.5, 0.5);
  return cubic_field(h, c);
}

// (u^2 + v^2)/2 + offset, or uv + offset.
ScalarField bowl(double offset) {
  Mat h = Mat::Identity(2, 2);
  ScalarField f(2, [offset](const Vec& p) { return 0.5 * (p[0] * p[0] + p[1] * p[1]) + offset; });
  f.with_gradient([](const Vec& p) { return Vec(p); });
  f.with_hessian([h](const Vec&) { return h; });
  return f;
}

ScalarField saddle(double offset) {
  ScalarField f(2, [offset](const Vec& p) { return p[0] * p[1] + offset; });
  f.with_gradient([](const Vec& p) {
    Vec g(2);
    g << p[1], p[0];
    return g;
  });
  f.with_hessian([](const Vec&) {
    Mat m(2, 2);
    m << 0, 1, 1, 0;
    return m;
  });
  return f;
}

Box square(double lo, double hi) { return Box{Vec::Constant(2, lo), Vec::Constant(2, hi)}; }

double max_abs_curvature_change(const EmbeddingMap& a, const EmbeddingMap& b,
                                const std::vector<ParamPoint>& grid) {
  double worst = 0.0;
  for (const auto& p : grid) {
    const double ka = gaussian_curvature_at(MetricField(a), p);
    const double kb = gaussian_curvature_at(MetricField(b), p);
    worst = std::max(worst, std::abs(ka - kb));
  }
  return worst;
}

// ---- individual checks -------------------------------------------------------

std::vector<VerifyRecord> check_affine_flatness(const VerifyOptions& opt) {
  const std::string id = "affine-flatness";
  double worst = 0.0;
  double worst_reparam = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    CounterRng rng(opt.seed, "verify/affine", trial);
    const int d = 2 + static_cast<int>(rng.below(2));
    const int amb = d + 1 + static_cast<int>(rng.below(4));
    AffineMap a;
    a.offset.resize(amb);
    a.linear.resize(amb, d);
    for (int i = 0; i < amb; ++i) a.offset[i] = rng.uniform(-2, 2);
    do {
      for (int i = 0; i < amb; ++i)
        for (int j = 0; j < d; ++j) a.linear(i, j) = rng.uniform(-1, 1);
    } while (a.min_singular_value() < 0.1);
    Vec p(d);
    for (int j = 0; j < d; ++j) p[j] = rng.uniform(-0.5, 0.5);
    EmbeddingMap e = affine_embedding(a);
    worst = std::max(worst, riemann_at(MetricField(e), p).frobenius_norm());

    // Composition with the diffeomorphism ψ(φ) = φ + 0.1 sin(φ_next).
    auto chart = [d](const Vec& x) {
      Vec y = x;
      for (int j = 0; j < d; ++j) y[j] += 0.1 * std::sin(x[(j + 1) % d]);
      return y;
    };
    auto chart_j = [d](const Vec& x) {
      Mat jm = Mat::Identity(d, d);
      for (int j = 0; j < d; ++j) jm(j, (j + 1) % d) += 0.1 * std::cos(x[(j + 1) % d]);
      return jm;
    };
    EmbeddingMap r = reparameterize(e, chart, chart_j);
    worst_reparam = std::max(worst_reparam, riemann_at(MetricField(r), p).frobenius_norm());
  }
  return {record(id, "max |R| over 50 random affine embeddings", 0.0, worst, 1e-6),
          record(id, "max |R| after a smooth reparameterization", 0.0, worst_reparam, 1e-6)};
}

std::vector<VerifyRecord> check_product_rule(const VerifyOptions& opt) {
  const std::string id = "product-rule";
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    CounterRng rng(opt.seed, "verify/product_rule", trial);
    const int amb = 3 + static_cast<int>(rng.below(3));
    AffineMap y;
    y.offset.resize(amb);
    y.linear.resize(amb, 2);
    for (int i = 0; i < amb; ++i) {
      y.offset[i] = rng.uniform(-2, 2);
      y.linear(i, 0) = rng.uniform(-1, 1);
      y.linear(i, 1) = rng.uniform(-1, 1);
    }
    Mat w(3, amb);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < amb; ++j) w(i, j) = rng.uniform(-1.5, 1.5);
    EmbeddingMap x(2, 3, [](const Vec& p) -> Vec {
      Vec v(3);
      v << std::sin(p[0]), p[0] * p[1], std::cos(p[1]);
      return v;
    });
    x.with_jacobian([](const Vec& p) -> Mat {
      Mat j(3, 2);
      j << std::cos(p[0]), 0.0, p[1], p[0], 0.0, -std::sin(p[1]);
      return j;
    });
    const EmbeddingMap gate = sigmoid_gate(x, w);
    Vec p(2);
    p << rng.uniform(-1, 1), rng.uniform(-1, 1);
    const Tensor3 formula = gated_second_derivative(y, gate, p);
    const Tensor3 oracle = hadamard_embedding(y, gate).hessian_central(p, 1e-4);
    double diff = 0.0;
    for (int a = 0; a < amb; ++a)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) diff = std::max(diff, std::abs(formula(a, i, j) - oracle(a, i, j)));
    double scale = 0.0;
    for (int a = 0; a < amb; ++a)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) scale = std::max(scale, std::abs(oracle(a, i, j)));
    worst = std::max(worst, diff / std::max(scale, 1e-6));
  }
  return {record(id, "max relative error of the product-rule Hessian (100 instances)", 0.0, worst, 1e-5)};
}

std::vector<VerifyRecord> check_sphere(const VerifyOptions&) {
  const std::string id = "sphere-witness";
  const SphereWitness w = build_sphere_witness();
  double k_ung = 0.0, k_gat = 0.0, norm_dev = 0.0;
  for (const auto& p : interior_grid(w.domain, 9, 0.1)) {
    k_ung = std::max(k_ung, std::abs(gaussian_curvature_at(MetricField(w.ungated), p)));
    k_gat = std::max(k_gat, std::abs(gaussian_curvature_at(MetricField(w.gated), p) - 1.0));
    norm_dev = std::max(norm_dev, std::abs(w.gated.evaluate(p).norm() - 1.0));
  }
  const Vec g0 = w.gated.evaluate(Vec::Zero(2));
  const double origin_dev = (g0 - Vec::Constant(3, 2.0 / std::sqrt(12.0))).cwiseAbs().maxCoeff();
  return {record(id, "max |K_ung| on a 9x9 grid", 0.0, k_ung, 1e-6),
          record(id, "max |K_gat - 1| on a 9x9 grid", 0.0, k_gat, 1e-3),
          record(id, "max ||mu_gat|| - 1| on the grid", 0.0, norm_dev, 1e-12),
          record(id, "max |gated(0,0) - (2,2,2)/sqrt(12)|", 0.0, origin_dev, 1e-12)};
}

std::vector<VerifyRecord> check_content_aware(const VerifyOptions&) {
  const std::string id = "content-aware";
  const ContentAwareWitness w = build_content_aware_witness();
  const EmbeddingMap ung = w.ungated_embedding();
  const EmbeddingMap gat = w.gated_embedding();
  double out_dev = 0.0, ung_dev = 0.0, weight_dev = 0.0, k_ung = 0.0, k_gat = 0.0;
  for (const auto& p : interior_grid(w.domain, 9, 0.1)) {
    const Mat gated = w.gated_output(p);
    const Vec s = w.target(p);
    for (Eigen::Index r = 0; r < gated.rows(); ++r)
      out_dev = std::max(out_dev, (gated.row(r).transpose() - s).cwiseAbs().maxCoeff());
    const Mat ungated = w.ungated_output(p);
    const Vec y = w.affine(p);
    for (Eigen::Index r = 0; r < ungated.rows(); ++r)
      ung_dev = std::max(ung_dev, (ungated.row(r).transpose() - y).cwiseAbs().maxCoeff());
    const Mat a = attention_weights(w.inputs(p), w.attention);
    weight_dev = std::max(weight_dev, (a.array() - 1.0 / w.n_tokens).abs().maxCoeff());
    k_ung = std::max(k_ung, std::abs(gaussian_curvature_at(MetricField(ung), p)));
    k_gat = std::max(k_gat, std::abs(gaussian_curvature_at(MetricField(gat), p) - 1.0));
  }
  const double li = (w.gate_left_inverse * w.gate_weight - Mat::Identity(3, 3)).cwiseAbs().maxCoeff();
  return {record(id, "max |gated output - s(phi)| on a 9x9 grid", 0.0, out_dev, 1e-10),
          record(id, "max |ungated output - (a + B phi)|", 0.0, ung_dev, 0.0),
          record(id, "max |attention weight - 1/n|", 0.0, weight_dev, 0.0),
          record(id, "max |K_ung| on the grid", 0.0, k_ung, 1e-6),
          record(id, "max |K_gat - 1| on the grid", 0.0, k_gat, 1e-3),
          record(id, "max |W_left_inverse W - I|", 0.0, li, 1e-10)};
}

std::vector<VerifyRecord> check_constant_coordinates(const VerifyOptions&) {
  const std::string id = "constant-coordinates";
  Vec extra(5);
  extra << 0.3, -1.0, 2.5, 0.0, 7.0;
  const SphereWitness s = build_sphere_witness();
  const ContentAwareWitness c = build_content_aware_witness();
  const auto sgrid = interior_grid(s.domain, 9, 0.1);
  const auto cgrid = interior_grid(c.domain, 9, 0.1);
  const double d_sg = max_abs_curvature_change(s.gated, append_constant_coordinates(s.gated, extra), sgrid);
  const double d_su = max_abs_curvature_change(s.ungated, append_constant_coordinates(s.ungated, extra), sgrid);
  const EmbeddingMap cg = c.gated_embedding();
  const double d_cg = max_abs_curvature_change(cg, append_constant_coordinates(cg, extra), cgrid);
  return {record(id, "sphere witness gated: max |dK| after 5 constant coordinates", 0.0, d_sg, 1e-6),
          record(id, "sphere witness ungated: max |dK| after 5 constant coordinates", 0.0, d_su, 1e-6),
          record(id, "content-aware gated: max |dK| after 5 constant coordinates", 0.0, d_cg, 1e-6)};
}

std::vector<VerifyRecord> check_depth_normal_form(const VerifyOptions&) {
  const std::string id = "depth-normal-form";
  ScalarField psi(2, [](const Vec& p) { return 0.5 * (p[0] * p[0] + p[1] * p[1]) + 0.1; });
  const Box domain = square(-0.5, 0.5);
  const DepthStackModel m = build_depth_stack(DepthStack{{0.2, 0.2, 0.2}, psi, domain, 6});
  double third = 0.0, exact = 0.0, gate_dev = 0.0;
  for (const auto& p : interior_grid(domain, 9, 0.0)) {
    const Vec f = m.representation(p);
    third = std::max(third, std::abs(f[2] - 0.6 * psi.value(p)));
    exact = std::max({exact, std::abs(f[0] - p[0]), std::abs(f[1] - p[1]),
                      f.tail(f.size() - 3).cwiseAbs().maxCoeff()});
    for (int l = 0; l < m.layers(); ++l) {
      Vec expect = Vec::Constant(m.ambient_dim(), 0.5);
      expect[2] = 0.2 * psi.value(p);
      gate_dev = std::max(gate_dev, (m.gate_vector(l, p) - expect).cwiseAbs().maxCoeff());
    }
  }
  ScalarField flat(2, [](const Vec&) { return 0.3; });
  const DepthStackModel one = build_depth_stack(DepthStack{{1.0}, flat, domain, 4});
  Vec p(2);
  p << 0.25, -0.125;
  Vec expect(4);
  expect << 0.25, -0.125, 0.3, 0.0;
  const double single = (one.representation(p) - expect).cwiseAbs().maxCoeff();
  return {record(id, "max |F_3 - A_L psi| (L = 3, a = 0.2)", 0.0, third, 1e-10),
          record(id, "max deviation of coordinates 1, 2 and >= 4 from (u, v, 0)", 0.0, exact, 0.0),
          record(id, "max |gate vector - (1/2, 1/2, a psi, 1/2, ...)|", 0.0, gate_dev, 1e-12),
          record(id, "single layer with constant psi = 0.3", 0.0, single, 1e-12)};
}

std::vector<VerifyRecord> check_depth_amplification(const VerifyOptions& opt) {
  const std::string id = "depth-amplification";
  const Box domain = square(-0.5, 0.5);
  const Vec origin = Vec::Zero(2);
  std::vector<VerifyRecord> out;
  const auto rows = depth_curvature_scan(bowl(0.05), 1.0, opt.depth_layers, domain, origin);
  for (const auto& r : rows) {
    out.push_back(record(id, "relative gap of K at L = " + std::to_string(r.layers) + " (K_pred = " +
                                 format_number(r.predicted) + ", K = " + format_number(r.measured) + ")",
                         0.0, relative_error(r.measured, r.predicted), 1e-3));
  }
  std::vector<int> distinct = opt.depth_layers;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() >= 2) {
    out.push_back(record(id, "log-log slope of K against L", 2.0, loglog_slope(rows), 0.01));
  }
  const auto five = depth_curvature_scan(bowl(0.5), 1.0, {5}, square(-0.3, 0.3), origin);
  out.push_back(record(id, "K for a = 1, L = 5, det D2 psi = 1", 25.0, five[0].measured, 25.0 * 1e-3));
  const auto sad = depth_curvature_scan(saddle(0.5), 1.0, {4}, square(-0.5, 0.5), origin);
  out.push_back(record(id, "K for psi = uv, a = 1, L = 4", -16.0, sad[0].measured, 16.0 * 1e-3));
  return out;
}

std::vector<VerifyRecord> check_depth_embedding(const VerifyOptions&) {
  const std::string id = "depth-embedding-invariance";
  const Box domain = square(-0.5, 0.5);
  const DepthStackModel m = build_depth_stack(DepthStack{{0.5, 0.5, 0.5, 0.5}, bowl(0.05), domain, 4});
  const EmbeddingMap e = m.embedding();
  Vec extra(5);
  extra << 1.0, -2.0, 0.5, 3.0, 0.25;
  const auto grid = interior_grid(domain, 5, 0.2);
  const double change = max_abs_curvature_change(e, append_constant_coordinates(e, extra), grid);
  const double k0 = gaussian_curvature_at(MetricField(e), Vec::Zero(2));
  return {record(id, "depth stack: max |dK| after 5 constant coordinates", 0.0, change, 1e-6),
          record(id, "depth stack K at the origin through the metric pipeline (A_L = 2)", 4.0, k0, 4e-3)};
}

std::vector<VerifyRecord> check_vector_graph(const VerifyOptions& opt) {
  const std::string id = "vector-graph";
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    CounterRng rng(opt.seed, "verify/vector_graph", trial);
    const int k = 2 + static_cast<int>(rng.below(3));
    std::vector<ScalarField> comps;
    for (int a = 0; a < k; ++a) comps.push_back(random_cubic_field(rng));
    const Vec origin = Vec::Zero(2);
    const double closed = codim_graph_curvature(comps, origin);
    const double gauss = gauss_equation_curvature(multi_graph_embedding(comps), origin);
    worst = std::max(worst, std::abs(closed - gauss));
  }
  const std::vector<ScalarField> pair{cubic_field(Mat::Identity(2, 2), Vec::Zero(4)),
                                      cubic_field((Mat(2, 2) << 1, 0, 0, -1).finished(), Vec::Zero(4))};
  const Vec origin = Vec::Zero(2);
  const double sum = codim_graph_curvature(pair, origin);
  const double pipeline = gaussian_curvature_at(MetricField(multi_graph_embedding(pair)), origin);
  return {record(id, "max |closed form - Gauss equation| over 20 random cases", 0.0, worst, 1e-6),
          record(id, "H1 = I, H2 = diag(1, -1): sum of determinants", 0.0, sum, 1e-12),
          record(id, "H1 = I, H2 = diag(1, -1): metric pipeline", 0.0, pipeline, 1e-3)};
}

std::vector<VerifyRecord> check_aligned_regime(const VerifyOptions& opt) {
  const std::string id = "aligned-regime";
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    CounterRng rng(opt.seed, "verify/aligned", trial);
    const ScalarField psi = random_cubic_field(rng);
    const int layers = 1 + static_cast<int>(rng.below(6));
    std::vector<double> a(layers);
    for (auto& v : a) v = rng.uniform(0.05, 0.5);
    const int k = 1 + static_cast<int>(rng.below(4));
    Vec c(k);
    for (int i = 0; i < k; ++i) c[i] = rng.uniform(-1.5, 1.5);
    std::vector<ScalarField> comps;
    for (int i = 0; i < k; ++i) {
      // Φ^α = Σ_ℓ a_ℓ ψ c_α, summed layer by layer.
      auto sum_layers = [a, ci = c[i]](double v) {
        double s = 0.0;
        for (double al : a) s += al * v * ci;
        return s;
      };
      ScalarField f(2, [psi, sum_layers](const Vec& p) { return sum_layers(psi.value(p)); });
      f.with_gradient([psi, sum_layers](const Vec& p) {
        const Vec g = psi.gradient(p);
        Vec out(2);
        out << sum_layers(g[0]), sum_layers(g[1]);
        return out;
      });
      f.with_hessian([psi, sum_layers](const Vec& p) {
        return Mat(psi.hessian(p).unaryExpr(sum_layers));
      });
      comps.push_back(f);
    }
    double a_l = 0.0;
    for (double v : a) a_l += v;
    const Mat h = psi.hessian(Vec::Zero(2));
    const double predicted = a_l * a_l * c.squaredNorm() * h.determinant();
    const double measured = codim_graph_curvature(comps, Vec::Zero(2));
    worst = std::max(worst, relative_error(measured, predicted));
  }
  return {record(id, "max relative gap to A_L^2 |c|^2 det D2 psi over 20 random cases", 0.0, worst, 1e-6)};
}

std::vector<VerifyRecord> check_robustness(const VerifyOptions& opt) {
  const std::string id = "robustness";
  const RobustnessWitness w = lifted_sphere_witness(4);
  RobustnessConfig cfg;
  cfg.trials = opt.robustness_trials;
  cfg.seed = opt.seed;
  cfg.workers = opt.workers;
  const RobustnessReport base = grid_curvature(robustness_embedding(w, w.base_weight), w.domain, cfg);
  const RobustnessReport flat = grid_curvature(constant_gate_embedding(w), w.domain, cfg);
  RobustnessReport at;
  const double radius = bisect_robust_radius(w, 2.0, 8, cfg, &at);
  const double flat_k = std::max(std::abs(flat.min_curvature), std::abs(flat.max_curvature));
  return {
      record(id, "rho = 0: min K on the 15x15 grid", 1.0, base.min_curvature, 1e-3),
      record(id, "rho = 0: max K on the 15x15 grid", 1.0, base.max_curvature, 1e-3),
      record(id, "gate = 1: max |K| on the grid", 0.0, flat_k, 1e-6),
      record(id, "bisected radius is positive (rho = " + format_number(radius) + ")", 1.0,
             radius > 0.0 ? 1.0 : 0.0, 0.0),
      record(id, "fraction of " + std::to_string(at.trials) + " perturbations with min K >= 0.5 at rho = " +
                     format_number(radius),
             1.0, at.fraction, 0.0),
      record(id, "regularity failures at the bisected radius", 0.0, at.regularity_failures, 0.0)};
}

std::vector<VerifyRecord> check_perturbation(const VerifyOptions&) {
  const std::string id = "perturbation-polynomial";
  const std::vector<double> eps{-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2};
  std::vector<VerifyRecord> out;
  const std::vector<std::pair<std::string, GatedBase>> bases{
      {"affine", affine_base()}, {"sphere", sphere_base()}, {"gated 4-D", gated4_base()}};
  for (const auto& [name, base] : bases) {
    const PerturbationFit fit = perturbation_polynomial_check(base, eps);
    out.push_back(record(id, name + " base: eps^2 coefficient", 1.0, fit.quadratic, 1e-2));
    out.push_back(record(id, name + " base: eps coefficient vs B_11 + B_22", fit.expected_linear,
                         fit.linear, 1e-2));
    out.push_back(record(id, name + " base: constant term vs base R_1212", fit.base_value, fit.constant, 1e-6));
  }
  return out;
}

using CheckFn = std::function<std::vector<VerifyRecord>(const VerifyOptions&)>;

const std::vector<std::pair<std::string, CheckFn>>& registry() {
  static const std::vector<std::pair<std::string, CheckFn>> checks{
      {"affine-flatness", check_affine_flatness},
      {"product-rule", check_product_rule},
      {"sphere-witness", check_sphere},
      {"content-aware", check_content_aware},
      {"constant-coordinates", check_constant_coordinates},
      {"depth-normal-form", check_depth_normal_form},
      {"depth-amplification", check_depth_amplification},
      {"depth-embedding-invariance", check_depth_embedding},
      {"vector-graph", check_vector_graph},
      {"aligned-regime", check_aligned_regime},
      {"robustness", check_robustness},
      {"perturbation-polynomial", check_perturbation},
  };
  return checks;
}

}  // namespace

const std::vector<std::string>& verify_selectors() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return ids;
}

std::vector<VerifyRecord> run_check(const std::string& id, const VerifyOptions& options) {
  for (const auto& [name, fn] : registry()) {
    if (name != id) continue;
    try {
      return fn(options);
    } catch (const Error& e) {
      return {VerifyRecord{id, std::string("check raised: ") + e.what(), 0.0,
                           std::numeric_limits<double>::quiet_NaN(), 0.0, false}};
    }
  }
  throw ConfigError("unknown check '" + id + "'");
}

std::vector<VerifyRecord> run_verify(const std::vector<std::string>& ids, const VerifyOptions& options) {
  for (const auto& id : ids) {
    if (std::find(verify_selectors().begin(), verify_selectors().end(), id) == verify_selectors().end()) {
      throw ConfigError("unknown check '" + id + "'");
    }
  }
  std::vector<VerifyRecord> out;
  for (const auto& id : ids) {
    auto r = run_check(id, options);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

bool all_passed(const std::vector<VerifyRecord>& records) {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(), [](const VerifyRecord& r) { return r.pass; });
}

std::string verify_report_json(const std::vector<VerifyRecord>& records) {
  nlohmann::ordered_json j;
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json row;
    row["theorem_id"] = r.theorem_id;
    row["quantity"] = r.quantity;
    row["expected"] = r.expected;
    row["measured"] = std::isfinite(r.measured) ? nlohmann::ordered_json(r.measured) : nlohmann::ordered_json();
    row["tolerance"] = r.tolerance;
    row["pass"] = r.pass;
    j["records"].push_back(std::move(row));
  }
  j["pass"] = all_passed(records);
  return j.dump(2) + "\n";
}

}  // namespace gatedgeom

#include "doctest.h"

#include <cmath>
#include <numbers>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/geometry.hpp"
#include "gatedgeom/witnesses.hpp"

using namespace gatedgeom;

namespace {

Vec v2(double a, double b) {
  Vec p(2);
  p << a, b;
  return p;
}

Box box(double lo, double hi) { return Box{v2(lo, lo), v2(hi, hi)}; }

// c + (huu u^2 + 2 huv uv + hvv v^2) / 2
ScalarField quad(double huu, double huv, double hvv, double c) {
  ScalarField f(2, [=](const Vec& p) {
    return c + 0.5 * huu * p[0] * p[0] + huv * p[0] * p[1] + 0.5 * hvv * p[1] * p[1];
  });
  f.with_gradient([=](const Vec& p) { return v2(huu * p[0] + huv * p[1], huv * p[0] + hvv * p[1]); });
  f.with_hessian([=](const Vec&) {
    Mat h(2, 2);
    h << huu, huv, huv, hvv;
    return h;
  });
  return f;
}

}  // namespace

TEST_CASE("sphere witness") {
  const SphereWitness w = build_sphere_witness();
  for (const auto& p : interior_grid(w.domain, 9, 0.05)) {
    CHECK(std::abs(gaussian_curvature_at(MetricField(w.ungated), p)) < 1e-6);
    CHECK(gaussian_curvature_at(MetricField(w.gated), p) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(w.gated.evaluate(p).norm() - 1.0) < 1e-12);
  }
  const Vec origin = w.gated.evaluate(v2(0, 0));
  CHECK((origin - Eigen::Vector3d::Constant(2.0 / std::sqrt(12.0))).norm() < 1e-15);
}

TEST_CASE("interior grid ordering") {
  const auto g = interior_grid(box(0, 1), 3, 0.0);
  REQUIRE(g.size() == 9);
  CHECK(g[0] == v2(0, 0));
  CHECK(g[1] == v2(0.5, 0));
  CHECK(g[3] == v2(0, 0.5));
  CHECK(g[8] == v2(1, 1));
}

TEST_CASE("content-aware witness") {
  const ContentAwareWitness w = build_content_aware_witness();
  CHECK(w.gate_weight.rows() == 8);
  CHECK((w.gate_left_inverse * w.gate_weight - Mat::Identity(3, 3)).norm() < 1e-10);
  for (const auto& p : interior_grid(w.domain, 7, 0.05)) {
    const Mat a = attention_weights(w.inputs(p), w.attention);
    for (int i = 0; i < a.size(); ++i) CHECK(a(i) == 0.25);
    const Mat gated = w.gated_output(p);
    const Vec s = w.target(p);
    for (int r = 0; r < gated.rows(); ++r) CHECK((gated.row(r).transpose() - s).norm() < 1e-10);
    // Ungated output is the affine point a + Bφ in every row.
    const Mat ung = w.ungated_output(p);
    for (int r = 0; r < ung.rows(); ++r) CHECK((ung.row(r).transpose() - w.affine(p)).norm() < 1e-12);
    CHECK(std::abs(gaussian_curvature_at(MetricField(w.ungated_embedding()), p)) < 1e-6);
    CHECK(gaussian_curvature_at(MetricField(w.gated_embedding()), p) == doctest::Approx(1.0).epsilon(1e-3));
  }
  // The analytic Jacobian agrees with central differences.
  const Vec p = v2(0.3, 0.5);
  const EmbeddingMap e = w.gated_embedding();
  CHECK((e.jacobian(p) - e.jacobian_central(p, 1e-6)).norm() < 1e-8);
}

TEST_CASE("appending constant coordinates leaves curvature unchanged") {
  const SphereWitness w = build_sphere_witness();
  Vec c(5);
  c << 1, -2, 0.5, 3, 0;
  const Vec p = v2(0.1, -0.3);
  const double k = gaussian_curvature_at(MetricField(w.gated), p);
  const double kc = gaussian_curvature_at(MetricField(append_constant_coordinates(w.gated, c)), p);
  CHECK(std::abs(k - kc) < 1e-6);
}

TEST_CASE("depth stack normal form") {
  SUBCASE("one layer with constant psi") {
    const DepthStackModel m = build_depth_stack(DepthStack{{1.0}, quad(0, 0, 0, 0.3), box(-0.5, 0.5), 5});
    const Vec r = m.representation(v2(0.2, -0.4));
    Vec expected = Vec::Zero(5);
    expected << 0.2, -0.4, 0.3, 0, 0;
    CHECK((r - expected).norm() < 1e-10);
  }
  SUBCASE("three layers accumulate A_L psi") {
    const ScalarField psi = quad(1, 0, 1, 0.1);
    const DepthStackModel m = build_depth_stack(DepthStack{{0.2, 0.2, 0.2}, psi, box(-0.5, 0.5), 6});
    CHECK(m.total_coefficient() == doctest::Approx(0.6));
    for (const auto& p : interior_grid(box(-0.5, 0.5), 5, 0.0)) {
      const Vec r = m.representation(p);
      CHECK(std::abs(r[0] - p[0]) < 1e-10);
      CHECK(std::abs(r[1] - p[1]) < 1e-10);
      CHECK(std::abs(r[2] - 0.6 * psi.value(p)) < 1e-10);
      CHECK(r.tail(3).norm() < 1e-10);
    }
    const Vec g = m.gate_vector(1, v2(0.1, 0.2));
    CHECK(g[0] == 0.5);
    CHECK(g[1] == 0.5);
    CHECK(g[2] == doctest::Approx(0.2 * psi.value(v2(0.1, 0.2))).epsilon(1e-12));
    for (int i = 3; i < 6; ++i) CHECK(g[i] == 0.5);
  }
  SUBCASE("range violations are rejected") {
    CHECK_THROWS_AS(build_depth_stack(DepthStack{{1.0, 2.0}, quad(0, 0, 0, 0.7), box(-0.5, 0.5), 4}),
                    ConstructionError);
    CHECK_THROWS_AS(build_depth_stack(DepthStack{{1.0}, quad(1, 0, 1, 0.0), box(-0.5, 0.5), 4}), ConstructionError);
  }
}

TEST_CASE("depth curvature scan") {
  const Vec o = v2(0, 0);
  SUBCASE("unit coefficients, five layers") {
    const auto rows = depth_curvature_scan(quad(1, 0, 1, 0.5), 1.0, {5}, box(-0.3, 0.3), o);
    CHECK(rows[0].predicted == doctest::Approx(25.0));
    CHECK(rows[0].measured == doctest::Approx(25.0).epsilon(1e-3));
  }
  SUBCASE("single layer") {
    const auto rows = depth_curvature_scan(quad(2, 0, 0.5, 0.2), 0.7, {1}, box(-0.3, 0.3), o);
    CHECK(rows[0].measured == doctest::Approx(0.49).epsilon(1e-3));
  }
  SUBCASE("negative curvature from a saddle") {
    const auto rows = depth_curvature_scan(quad(0, 1, 0, 0.5), 1.0, {4}, box(-0.3, 0.3), o);
    CHECK(rows[0].measured == doctest::Approx(-16.0).epsilon(1e-3));
  }
  SUBCASE("quadratic growth in depth") {
    const auto rows = depth_curvature_scan(quad(1, 0, 1, 0.05), 1.0, {1, 2, 4, 8, 16}, box(-0.5, 0.5), o);
    CHECK(loglog_slope(rows) == doctest::Approx(2.0).epsilon(0.005));
  }
  SUBCASE("non-critical base point") {
    CHECK_THROWS_AS(depth_curvature_scan(quad(1, 0, 1, 0.5), 1.0, {1}, box(-0.3, 0.3), v2(0.1, 0)),
                    PreconditionError);
  }
}

TEST_CASE("robustness of the lifted sphere witness") {
  const RobustnessWitness w = lifted_sphere_witness(4);
  RobustnessConfig cfg;
  cfg.trials = 20;
  cfg.grid = 7;
  const RobustnessReport base = grid_curvature(robustness_embedding(w, w.base_weight), w.domain, cfg);
  CHECK(base.min_curvature == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(base.max_curvature == doctest::Approx(1.0).epsilon(1e-3));
  const RobustnessReport flat = grid_curvature(constant_gate_embedding(w), w.domain, cfg);
  CHECK(std::abs(flat.min_curvature) < 1e-6);
  CHECK(std::abs(flat.max_curvature) < 1e-6);

  const RobustnessReport zero = robustness_sweep(w, 0.0, cfg);
  CHECK(zero.fraction == 1.0);
  CHECK(zero.min_curvature == doctest::Approx(1.0).epsilon(1e-3));

  const RobustnessReport small = robustness_sweep(w, 0.05, cfg);
  CHECK(small.trials == 20);
  CHECK(small.fraction == 1.0);
  CHECK(small.min_curvature >= 0.5);

  // A huge perturbation eventually breaks the bound.
  const RobustnessReport big = robustness_sweep(w, 50.0, cfg);
  CHECK(big.fraction < 1.0);

  // Same seed, same report.
  const RobustnessReport again = robustness_sweep(w, 0.05, cfg);
  CHECK(again.min_curvature == small.min_curvature);
}

TEST_CASE("perturbation polynomial") {
  const std::vector<double> eps{-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2};
  SUBCASE("affine base") {
    const PerturbationFit f = perturbation_polynomial_check(affine_base(), eps);
    CHECK(std::abs(f.constant) < 1e-6);
    CHECK(std::abs(f.linear) < 1e-2);
    CHECK(f.quadratic == doctest::Approx(1.0).epsilon(1e-2));
  }
  SUBCASE("sphere base") {
    const GatedBase b = sphere_base();
    const PerturbationFit f = perturbation_polynomial_check(b, eps);
    CHECK(std::abs(f.constant - f.base_value) < 1e-6);
    // The base value is the intrinsic curvature in orthonormal coordinates.
    CHECK(f.base_value == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(f.linear - f.expected_linear) < 1e-2);
    CHECK(f.quadratic == doctest::Approx(1.0).epsilon(1e-2));
  }
  SUBCASE("4-D gated base") {
    const PerturbationFit f = perturbation_polynomial_check(gated4_base(), eps);
    CHECK(f.quadratic == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(std::abs(f.linear - f.expected_linear) < 1e-2);
  }
  SUBCASE("the normal is orthogonal to the tangent plane") {
    const GatedBase b = gated4_base();
    const Vec n = admissible_normal(b);
    const Mat j = hadamard_embedding(b.affine, b.gate).jacobian(b.point);
    CHECK(n.norm() == doctest::Approx(1.0));
    CHECK((j.transpose() * n).norm() < 1e-10);
  }
}

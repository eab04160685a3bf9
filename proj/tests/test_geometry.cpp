#include <cmath>
#include <random>

#include "doctest.h"
#include "embedflow/fixtures.hpp"
#include "embedflow/geometry.hpp"
#include "embedflow/sampled_chart.hpp"
#include "oracles.hpp"

using namespace embedflow;
namespace fx = embedflow::fixtures;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

std::vector<ChartAtlas> all_fixtures(fx::Options opt = {}) {
  return {fx::circle(1.0, opt),  fx::circle(2.0, opt),     fx::ellipse(2.0, 1.0, opt),
          fx::sphere(1.0, opt),  fx::sphere(0.5, opt),     fx::torus(2.0, 0.5, opt),
          fx::flat_patch(opt),   fx::graph_patch(1.0, opt), fx::tilted_circle(opt)};
}

}  // namespace

TEST_CASE("first fundamental form examples") {
  const auto c2 = fx::circle(2.0);
  for (double t : {0.0, 0.7, 3.0}) CHECK(first_fundamental_form(c2.chart(0), v1(t))(0, 0) == doctest::Approx(4.0).epsilon(1e-14));

  const auto sph = fx::spherical_chart(1.0);
  const Mat g = first_fundamental_form(*sph, v2(oracle::pi / 2, 0.3));
  CHECK((g - Mat::Identity(2, 2)).norm() < 1e-14);

  const auto tor = fx::torus(2.0, 0.5);
  const Mat gt = first_fundamental_form(tor.chart(0), v2(0, 0));
  const Mat Jo = oracle::jacobian([&](const Vec& p) { return tor.chart(0).point(p); }, v2(0, 0));
  const Mat go = Jo.transpose() * Jo;
  CHECK(go(0, 0) == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(go(1, 1) == doctest::Approx(6.25).epsilon(1e-8));
  CHECK((gt - go).norm() < 1e-7);
  CHECK(gt(0, 0) == doctest::Approx(0.25));
  CHECK(gt(1, 1) == doctest::Approx(6.25));
  CHECK(std::abs(gt(0, 1)) < 1e-14);
}

TEST_CASE("second fundamental form examples") {
  const auto c2 = fx::circle(2.0);
  for (double t : {0.0, 1.1, 4.0}) {
    const Mat II = second_fundamental_form(c2.chart(0), v1(t), v2(std::cos(t), std::sin(t)));
    CHECK(II(0, 0) == doctest::Approx(-2.0).epsilon(1e-13));
  }
  const auto flat = fx::flat_patch();
  CHECK(std::abs(second_fundamental_form(flat.chart(0), v1(0.3), v2(0, 1))(0, 0)) < 1e-15);

  const auto s = fx::sphere(1.0);
  const Mat II = second_fundamental_form(s.chart(0), v2(0, 0), v3(0, 0, 1));
  CHECK((II + Mat::Identity(2, 2)).norm() < 1e-13);
  CHECK((first_fundamental_form(s.chart(0), v2(0, 0)) - Mat::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("second fundamental form rejects bad normals") {
  const auto c = fx::circle(1.0);
  CHECK_THROWS_AS(second_fundamental_form(c.chart(0), v1(0), v2(2, 0)), std::invalid_argument);
  CHECK_THROWS_AS(second_fundamental_form(c.chart(0), v1(0), v2(0, 1)), std::invalid_argument);
}

TEST_CASE("principal curvature examples") {
  const auto c2 = fx::circle(2.0);
  const auto pc = principal_curvatures(c2.chart(0), v1(0.4), -v2(std::cos(0.4), std::sin(0.4)));
  REQUIRE(pc.size() == 1);
  CHECK(pc[0] == doctest::Approx(0.5).epsilon(1e-13));

  const auto s = fx::sphere(1.0);
  for (std::size_t f = 0; f < s.size(); ++f) {
    const Vec p = v2(0.3, -0.6);
    const Vec x = s.chart(f).point(p);
    const auto k = principal_curvatures(s.chart(f), p, -x.normalized());
    CHECK(k[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  const auto tor = fx::torus(2.0, 0.5);
  const auto kt = principal_curvatures(tor.chart(0), v2(0, 0), v3(1, 0, 0));
  const auto ko = oracle::torus_curvatures(2.0, 0.5, 0.0);
  CHECK(kt[0] == doctest::Approx(-0.4).epsilon(1e-12));
  CHECK(kt[1] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(kt[0] == doctest::Approx(ko[0]));
  CHECK(kt[1] == doctest::Approx(ko[1]));
}

TEST_CASE("normal frame examples") {
  const auto c = fx::circle(1.0);
  NormalFrame f0 = normal_frame(c.chart(0), v1(0.0));
  CHECK(f0.multi_index == std::vector<int>{0});
  CHECK((f0.basis.col(0) - v2(1, 0)).norm() < 1e-14);
  NormalFrame f1 = normal_frame(c.chart(0), v1(oracle::pi / 2));
  CHECK(f1.multi_index == std::vector<int>{1});
  CHECK((f1.basis.col(0) - v2(0, 1)).norm() < 1e-14);

  const auto s = fx::sphere(1.0);
  NormalFrame fs = normal_frame(s.chart(0), v2(0, 0));
  CHECK(fs.multi_index == std::vector<int>{2});
  CHECK((fs.basis.col(0) - v3(0, 0, 1)).norm() < 1e-14);
}

TEST_CASE("normal frames are orthonormal, normal and lexicographically minimal") {
  for (const auto& atlas : all_fixtures()) {
    const SampleGrid grid = SampleGrid::uniform(atlas, 12);
    for (const NodeRef& n : grid.nodes()) {
      const Chart& ch = atlas.chart(n.chart);
      const Vec p = grid.param(n);
      const Mat J = ch.jacobian(p);
      const NormalFrame fr = normal_frame(ch, p);
      const Mat W = fr.basis;
      CHECK((W.transpose() * W - Mat::Identity(W.cols(), W.cols())).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((W.transpose() * J).cwiseAbs().maxCoeff() < 1e-10);
      // every lexicographically smaller index must fail the independence test
      const int N = atlas.ambient_dim();
      const int m = atlas.codim();
      std::vector<int> idx(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
      while (idx != fr.multi_index) {
        CHECK_FALSE(frame_for_index(J, idx).has_value());
        int i = m - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == N - m + i) --i;
        REQUIRE(i >= 0);
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < m; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
  }
}

TEST_CASE("analytic and finite-difference derivatives agree") {
  const auto analytic = all_fixtures();
  fx::Options fd{DerivativeMode::finite_difference, 1e-4};
  const auto numeric = all_fixtures(fd);
  for (std::size_t a = 0; a < analytic.size(); ++a) {
    const SampleGrid grid = SampleGrid::uniform(analytic[a], 8);
    for (const NodeRef& n : grid.nodes()) {
      const Vec p = grid.param(n);
      const Chart& ca = analytic[a].chart(n.chart);
      const Chart& cn = numeric[a].chart(n.chart);
      CHECK((ca.jacobian(p) - cn.jacobian(p)).cwiseAbs().maxCoeff() < 1e-6);
      const auto Ha = ca.hessian(p);
      const auto Hn = cn.hessian(p);
      for (int i = 0; i < ca.dim(); ++i) {
        for (int j = 0; j < ca.dim(); ++j) {
          CHECK((Ha(i, j) - Hn(i, j)).cwiseAbs().maxCoeff() < 1e-6);
          CHECK((Ha(i, j) - Ha(j, i)).cwiseAbs().maxCoeff() < 1e-14);
        }
      }
    }
  }
}

TEST_CASE("finite-difference error is second order in h") {
  const auto tor = fx::torus(2.0, 0.5);
  const Vec p = v2(0.4, 1.3);
  const Mat Ja = tor.chart(0).jacobian(p);
  auto map = [&](const Vec& q) { return tor.chart(0).point(q); };
  const double e1 = (fd_jacobian(map, p, 1e-2) - Ja).norm();
  const double e2 = (fd_jacobian(map, p, 5e-3) - Ja).norm();
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("metric is positive definite with the analytic lower bound") {
  // circle r: g = r^2; torus: min(r^2, (R - r)^2); graph patch: 1
  struct Case {
    ChartAtlas atlas;
    double lower;
  };
  std::vector<Case> cases{{fx::circle(2.0), 4.0}, {fx::torus(2.0, 0.5), 0.25}, {fx::graph_patch(1.0), 1.0}};
  for (const auto& c : cases) {
    const SampleGrid grid = SampleGrid::uniform(c.atlas, 16);
    double lo = std::numeric_limits<double>::infinity();
    for (const NodeRef& n : grid.nodes()) {
      Eigen::SelfAdjointEigenSolver<Mat> es(first_fundamental_form(c.atlas.chart(n.chart), grid.param(n)));
      lo = std::min(lo, es.eigenvalues()(0));
      CHECK(es.eigenvalues()(0) >= c.lower - 1e-8);
    }
    CHECK(lo == doctest::Approx(c.lower).epsilon(1e-8));
  }
}

TEST_CASE("curvature antisymmetry") {
  for (const auto& atlas : all_fixtures()) {
    const SampleGrid grid = SampleGrid::uniform(atlas, 8);
    for (const NodeRef& n : grid.nodes()) {
      const Vec p = grid.param(n);
      const NormalFrame fr = normal_frame(atlas.chart(n.chart), p);
      Vec v = fr.basis.rowwise().sum();
      v.normalize();
      const auto plus = principal_curvatures(atlas.chart(n.chart), p, v);
      const auto minus = principal_curvatures(atlas.chart(n.chart), p, -v);
      for (std::size_t i = 0; i < plus.size(); ++i) CHECK(std::abs(plus[i] + minus[plus.size() - 1 - i]) < 1e-10);
    }
  }
}

TEST_CASE("global curvature bound K") {
  CHECK(max_principal_curvature(fx::circle(2.0), SampleGrid::uniform(fx::circle(2.0), 32)).K ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(max_principal_curvature(fx::sphere(0.5), SampleGrid::uniform(fx::sphere(0.5), 8)).K ==
        doctest::Approx(2.0).epsilon(1e-12));
  const auto tor = fx::torus(2.0, 0.5);
  CHECK(max_principal_curvature(tor, SampleGrid::uniform(tor, 16)).K == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(max_principal_curvature(fx::flat_patch(), SampleGrid::uniform(fx::flat_patch(), 16)).K == 0.0);
  CHECK(max_principal_curvature(fx::tilted_circle(), SampleGrid::uniform(fx::tilted_circle(), 16)).K ==
        doctest::Approx(1.0).epsilon(1e-10));
  const auto gp = fx::graph_patch(1.0);
  CHECK(max_principal_curvature(gp, SampleGrid::uniform(gp, 16)).K == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(max_principal_curvature(fx::circle(1.0), SampleGrid{}));
}

TEST_CASE("K is nondecreasing under nested refinement") {
  for (const auto& atlas : {fx::ellipse(2.0, 1.0), fx::torus(2.0, 0.7), fx::graph_patch(2.0)}) {
    SampleGrid g = SampleGrid::uniform(atlas, 6);
    double prev = max_principal_curvature(atlas, g).K;
    for (int i = 0; i < 3; ++i) {
      g = g.refined();
      const double K = max_principal_curvature(atlas, g).K;
      CHECK(K >= prev);
      prev = K;
    }
  }
}

TEST_CASE("codimension-two curvature matches an exhaustive normal sweep") {
  // a curve in R^3 with a torsion-free but tilted shape: (cos t, 2 sin t, sin 2t / 2)
  ChartFunctions fns;
  fns.map = [](const Vec& p) { return v3(std::cos(p(0)), 2 * std::sin(p(0)), 0.5 * std::sin(2 * p(0))); };
  auto chart = std::make_shared<ParametricChart>(ChartDomain{{Axis{0, 2 * oracle::pi, AxisKind::periodic}}}, 3, fns,
                                                 DerivativeMode::finite_difference, 1e-4);
  for (double t : {0.1, 0.9, 2.3}) {
    const Vec p = v1(t);
    const Mat J = chart->jacobian(p);
    const NormalFrame fr = normal_frame(*chart, p);
    const auto H = chart->hessian(p);
    const double K = max_normal_curvature(J, H, fr.basis).magnitude;
    double best = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const double a = 2 * oracle::pi * i / 20000;
      const Vec v = std::cos(a) * fr.basis.col(0) + std::sin(a) * fr.basis.col(1);
      best = std::max(best, std::abs(principal_curvatures(*chart, p, v)[0]));
    }
    CHECK(K == doctest::Approx(best).epsilon(1e-6));
  }
}

TEST_CASE("lattices: weights, refinement and boundary flags") {
  AxisLattice per(Axis{0, 2 * oracle::pi, AxisKind::periodic}, 10);
  AxisLattice closed(Axis{-1, 1, AxisKind::boundary}, 7);
  CHECK(per.nodes() == 10);
  CHECK(closed.intervals() == 8);
  double s1 = 0, s2 = 0;
  for (int i = 0; i < per.nodes(); ++i) s1 += per.weight(i);
  for (int i = 0; i < closed.nodes(); ++i) s2 += closed.weight(i);
  CHECK(s1 == doctest::Approx(2 * oracle::pi));
  CHECK(s2 == doctest::Approx(2.0));
  CHECK(closed.near_boundary(0));
  CHECK(closed.near_boundary(1));
  CHECK_FALSE(closed.near_boundary(2));
  CHECK(closed.near_boundary(8));
  AxisLattice seam(Axis{-1, 1, AxisKind::seam}, 8);
  CHECK_FALSE(seam.near_boundary(0));

  const auto tor = fx::torus(2.0, 0.5);
  const SampleGrid g = SampleGrid::uniform(tor, 8);
  const SampleGrid r = g.refined();
  for (const NodeRef& n : g.nodes()) CHECK(r.lattice(0).locate(g.param(n)).has_value());
}

TEST_CASE("nearest point examples") {
  const auto c = fx::circle(1.0);
  const SampleGrid g = SampleGrid::uniform(c, 64);
  NearestPoint a = nearest_point(c, g, v2(2, 0));
  CHECK(a.param(0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(a.distance == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(a.tie);

  NearestPoint b = nearest_point(c, g, v2(0, 0));
  CHECK(b.distance == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.tie);

  NearestPoint d = nearest_point(c, g, v2(1, 1));
  CHECK(d.param(0) == doctest::Approx(oracle::circle_argmin(v2(1, 1))).epsilon(1e-5));
  CHECK(d.param(0) == doctest::Approx(oracle::pi / 4).epsilon(1e-10));
  CHECK(d.distance == doctest::Approx(std::sqrt(2.0) - 1).epsilon(1e-10));
  CHECK_FALSE(d.tie);
}

TEST_CASE("nearest point is no worse than any grid sample") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (const auto& atlas : all_fixtures()) {
    const SampleGrid g = SampleGrid::uniform(atlas, 12);
    for (int t = 0; t < 10; ++t) {
      Vec y(atlas.ambient_dim());
      for (int i = 0; i < y.size(); ++i) y(i) = nd(rng);
      const NearestPoint np = nearest_point(atlas, g, y);
      for (const NodeRef& n : g.nodes()) {
        CHECK(np.distance <= (atlas.chart(n.chart).point(g.param(n)) - y).norm() + 1e-12);
      }
    }
  }
}

TEST_CASE("nearest point on a manifold with boundary flags clamping") {
  const auto flat = fx::flat_patch();
  const SampleGrid g = SampleGrid::uniform(flat, 16);
  NearestPoint np = nearest_point(flat, g, v2(3.0, 0.5));
  CHECK(np.diverged);
  CHECK(np.param(0) == doctest::Approx(1.0));
}

TEST_CASE("overlap consistency of the cubed sphere") {
  const auto s = fx::sphere(1.0);
  const OverlapReport r = check_overlap_consistency(s, SampleGrid::uniform(s, 8));
  CHECK(r.pairs_checked > 0);
  CHECK(r.max_angle < 1e-7);
}

TEST_CASE("immersion failure is reported") {
  ChartFunctions fns;
  fns.map = [](const Vec& p) { return v2(p(0) * p(0), p(0) * p(0) * p(0)); };
  ParametricChart cusp(ChartDomain{{Axis{-1, 1, AxisKind::boundary}}}, 2, fns, DerivativeMode::finite_difference);
  CHECK_THROWS_AS(first_fundamental_form(cusp, v1(0.0)), ImmersionError);
  CHECK_THROWS_AS(normal_frame(cusp, v1(0.0)), ImmersionError);
}

TEST_CASE("sampled charts reproduce derivatives at lattice nodes") {
  const auto tor = fx::torus(2.0, 0.5);
  const SampleGrid g = SampleGrid::uniform(tor, 64);
  const ChartAtlas s = sample_atlas(tor, g);
  double ej = 0, eh = 0;
  for (const NodeRef& n : g.nodes()) {
    const Vec p = g.param(n);
    ej = std::max(ej, (s.chart(0).jacobian(p) - tor.chart(0).jacobian(p)).cwiseAbs().maxCoeff());
    const auto a = s.chart(0).hessian(p);
    const auto b = tor.chart(0).hessian(p);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) eh = std::max(eh, (a(i, j) - b(i, j)).cwiseAbs().maxCoeff());
  }
  CHECK(ej < 1e-4);
  CHECK(eh < 1e-3);

  const auto gp = fx::graph_patch(1.0);
  const SampleGrid g2 = SampleGrid::uniform(gp, 16);
  const ChartAtlas s2 = sample_atlas(gp, g2);
  for (const NodeRef& n : g2.nodes()) {
    const Vec p = g2.param(n);
    // quadratic data: the stencils are exact, including one-sided windows
    CHECK((s2.chart(0).jacobian(p) - gp.chart(0).jacobian(p)).cwiseAbs().maxCoeff() < 1e-10);
  }
  const Vec off = v2(0.123, -0.456);
  CHECK((s2.chart(0).point(off) - gp.chart(0).point(off)).norm() < 1e-12);
  CHECK_THROWS_AS(s2.chart(0).differentiate(off, [](const Vec& p) { return p; }, false), GeometryError);
}

TEST_CASE("fornberg weights reproduce the classical stencils") {
  const auto w = fornberg_weights(0.0, {-2, -1, 0, 1, 2}, 2);
  const std::vector<double> d1{1.0 / 12, -8.0 / 12, 0, 8.0 / 12, -1.0 / 12};
  const std::vector<double> d2{-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
  for (int i = 0; i < 5; ++i) {
    CHECK(w[1][static_cast<std::size_t>(i)] == doctest::Approx(d1[static_cast<std::size_t>(i)]).epsilon(1e-14));
    CHECK(w[2][static_cast<std::size_t>(i)] == doctest::Approx(d2[static_cast<std::size_t>(i)]).epsilon(1e-14));
  }
}

#pragma once

#include <map>
#include <memory>
#include <string>

#include "embedflow/geometry.hpp"

namespace embedflow::fixtures {

struct Options {
  DerivativeMode mode = DerivativeMode::analytic;
  double h = 1e-4;
};

/// (r cos t, r sin t), t periodic.
ChartAtlas circle(double r, Options opt = {});
/// (a cos t, b sin t).
ChartAtlas ellipse(double a, double b, Options opt = {});
/// Cubed sphere: six seam-bounded faces r (a, b, 1) / |(a, b, 1)| and their
/// signed permutations, a, b in [-1, 1]. Face 0 is z+, so its centre is an
/// orthonormal chart at the north pole.
ChartAtlas sphere(double r, Options opt = {});
/// ((R + r cos u) cos v, (R + r cos u) sin v, r sin u), both angles periodic.
ChartAtlas torus(double R, double r, Options opt = {});
/// x -> (x, 0) on [-1, 1], a manifold with boundary.
ChartAtlas flat_patch(Options opt = {});
/// z = c (x^2 - y^2) / 2 over [-1, 1]^2.
ChartAtlas graph_patch(double c, Options opt = {});
/// Figure-eight immersion (cos t, sin t cos t); not injective.
ChartAtlas lemniscate(Options opt = {});
/// Unit circle in the plane spanned by e1 and (e2 + e3)/sqrt(2); codimension two.
ChartAtlas tilted_circle(Options opt = {});

/// Single spherical chart (theta, psi) -> r (sin t cos p, sin t sin p, cos t)
/// on [0, pi] x [0, 2 pi). Singular at the poles, so not used as an atlas.
std::shared_ptr<const Chart> spherical_chart(double r, Options opt = {});

/// Looks up a fixture by name ("circle", "ellipse", "sphere", "torus",
/// "flat_patch", "graph_patch", "lemniscate", "tilted_circle"). Missing
/// parameters take their defaults (r = 1, a = 2, b = 1, R = 2, r = 0.5 for
/// the torus, c = 1).
ChartAtlas builtin(const std::string& name, const std::map<std::string, double>& params, Options opt = {});

}  // namespace embedflow::fixtures

#include "embedflow/fixtures.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace embedflow::fixtures {

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::shared_ptr<const Chart> make_chart(ChartDomain dom, int n, ChartFunctions fns, const Options& opt) {
  return std::make_shared<ParametricChart>(std::move(dom), n, std::move(fns), opt.mode, opt.h);
}

ChartDomain periodic_circle_domain() { return ChartDomain{{Axis{0.0, 2.0 * kPi, AxisKind::periodic}}}; }

ManifoldModel circle_model() {
  return [](std::size_t, const Vec& p) { return vec({std::cos(p(0)), std::sin(p(0))}); };
}

// A closed curve x(t) with its first two derivatives.
struct Curve {
  std::function<Vec(double)> x, dx, ddx;
};

ChartAtlas curve_atlas(const std::string& name, int n, Curve c, const Options& opt) {
  ChartFunctions fns;
  fns.map = [c](const Vec& p) { return c.x(p(0)); };
  fns.jacobian = [c](const Vec& p) {
    Mat J(c.x(0.0).size(), 1);
    J.col(0) = c.dx(p(0));
    return J;
  };
  fns.hessian = [c, n](const Vec& p) {
    SecondDerivatives H(1, n);
    H(0, 0) = c.ddx(p(0));
    return H;
  };
  return ChartAtlas(name, {make_chart(periodic_circle_domain(), n, fns, opt)}, circle_model());
}

}  // namespace

ChartAtlas circle(double r, Options opt) { return ellipse(r, r, opt); }

ChartAtlas ellipse(double a, double b, Options opt) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("ellipse axes must be positive");
  Curve c;
  c.x = [a, b](double t) { return vec({a * std::cos(t), b * std::sin(t)}); };
  c.dx = [a, b](double t) { return vec({-a * std::sin(t), b * std::cos(t)}); };
  c.ddx = [a, b](double t) { return vec({-a * std::cos(t), -b * std::sin(t)}); };
  return curve_atlas(a == b ? "circle" : "ellipse", 2, c, opt);
}

ChartAtlas lemniscate(Options opt) {
  Curve c;
  c.x = [](double t) { return vec({std::cos(t), std::sin(t) * std::cos(t)}); };
  c.dx = [](double t) { return vec({-std::sin(t), std::cos(2.0 * t)}); };
  c.ddx = [](double t) { return vec({-std::cos(t), -2.0 * std::sin(2.0 * t)}); };
  return curve_atlas("lemniscate", 2, c, opt);
}

ChartAtlas tilted_circle(Options opt) {
  const double s = 1.0 / std::sqrt(2.0);
  Curve c;
  c.x = [s](double t) { return vec({std::cos(t), s * std::sin(t), s * std::sin(t)}); };
  c.dx = [s](double t) { return vec({-std::sin(t), s * std::cos(t), s * std::cos(t)}); };
  c.ddx = [s](double t) { return vec({-std::cos(t), -s * std::sin(t), -s * std::sin(t)}); };
  return curve_atlas("tilted_circle", 3, c, opt);
}

ChartAtlas sphere(double r, Options opt) {
  if (!(r > 0.0)) throw std::invalid_argument("sphere radius must be positive");
  // Face f sends local u = (a, b, 1) to ambient coordinates through a signed permutation.
  static const int perm[6][3] = {{0, 1, 2}, {1, 0, 2}, {2, 0, 1}, {1, 2, 0}, {2, 1, 0}, {0, 2, 1}};
  static const double sign[6] = {1.0, -1.0, 1.0, -1.0, 1.0, -1.0};
  std::vector<std::shared_ptr<const Chart>> charts;
  std::vector<Mat> rot;
  for (int f = 0; f < 6; ++f) {
    // ambient[perm[f][i]] = u[i], with the normal coordinate carrying the face sign
    Mat R = Mat::Zero(3, 3);
    for (int i = 0; i < 3; ++i) R(perm[f][i], i) = (i == 2) ? sign[f] : 1.0;
    rot.push_back(R);
  }
  for (int f = 0; f < 6; ++f) {
    const Mat R = rot[static_cast<std::size_t>(f)];
    ChartFunctions fns;
    fns.map = [R, r](const Vec& p) {
      const Vec u = vec({p(0), p(1), 1.0});
      return Vec(r * R * u / u.norm());
    };
    fns.jacobian = [R, r](const Vec& p) {
      const Vec u = vec({p(0), p(1), 1.0});
      const double s = u.norm();
      Mat J(3, 2);
      for (int i = 0; i < 2; ++i) {
        Vec du = Vec::Zero(3);
        du(i) = 1.0;
        J.col(i) = r * R * (du / s - u * u(i) / (s * s * s));
      }
      return J;
    };
    fns.hessian = [R, r](const Vec& p) {
      const Vec u = vec({p(0), p(1), 1.0});
      const double s = u.norm();
      const double s3 = s * s * s;
      const double s5 = s3 * s * s;
      SecondDerivatives H(2, 3);
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          Vec di = Vec::Zero(3);
          Vec dj = Vec::Zero(3);
          di(i) = 1.0;
          dj(j) = 1.0;
          const double dij = (i == j) ? 1.0 : 0.0;
          Vec d = -di * u(j) / s3 - dj * u(i) / s3 - u * dij / s3 + 3.0 * u * u(i) * u(j) / s5;
          H(i, j) = r * R * d;
        }
      }
      return H;
    };
    ChartDomain dom{{Axis{-1.0, 1.0, AxisKind::seam}, Axis{-1.0, 1.0, AxisKind::seam}}};
    charts.push_back(make_chart(dom, 3, fns, opt));
  }
  ManifoldModel model = [rot](std::size_t c, const Vec& p) {
    const Vec u = vec({p(0), p(1), 1.0});
    return Vec(rot.at(c) * u / u.norm());
  };
  return ChartAtlas("sphere", std::move(charts), model);
}

std::shared_ptr<const Chart> spherical_chart(double r, Options opt) {
  ChartFunctions fns;
  fns.map = [r](const Vec& p) {
    return vec({r * std::sin(p(0)) * std::cos(p(1)), r * std::sin(p(0)) * std::sin(p(1)), r * std::cos(p(0))});
  };
  fns.jacobian = [r](const Vec& p) {
    const double st = std::sin(p(0)), ct = std::cos(p(0)), sp = std::sin(p(1)), cp = std::cos(p(1));
    Mat J(3, 2);
    J.col(0) = r * vec({ct * cp, ct * sp, -st});
    J.col(1) = r * vec({-st * sp, st * cp, 0.0});
    return J;
  };
  fns.hessian = [r](const Vec& p) {
    const double st = std::sin(p(0)), ct = std::cos(p(0)), sp = std::sin(p(1)), cp = std::cos(p(1));
    SecondDerivatives H(2, 3);
    H(0, 0) = r * vec({-st * cp, -st * sp, -ct});
    H(0, 1) = r * vec({-ct * sp, ct * cp, 0.0});
    H(1, 0) = H(0, 1);
    H(1, 1) = r * vec({-st * cp, -st * sp, 0.0});
    return H;
  };
  ChartDomain dom{{Axis{0.0, kPi, AxisKind::boundary}, Axis{0.0, 2.0 * kPi, AxisKind::periodic}}};
  return make_chart(dom, 3, fns, opt);
}

ChartAtlas torus(double R, double r, Options opt) {
  if (!(R > r && r > 0.0)) throw std::invalid_argument("torus needs R > r > 0");
  ChartFunctions fns;
  fns.map = [R, r](const Vec& p) {
    const double rho = R + r * std::cos(p(0));
    return vec({rho * std::cos(p(1)), rho * std::sin(p(1)), r * std::sin(p(0))});
  };
  fns.jacobian = [R, r](const Vec& p) {
    const double su = std::sin(p(0)), cu = std::cos(p(0)), sv = std::sin(p(1)), cv = std::cos(p(1));
    const double rho = R + r * cu;
    Mat J(3, 2);
    J.col(0) = vec({-r * su * cv, -r * su * sv, r * cu});
    J.col(1) = vec({-rho * sv, rho * cv, 0.0});
    return J;
  };
  fns.hessian = [R, r](const Vec& p) {
    const double su = std::sin(p(0)), cu = std::cos(p(0)), sv = std::sin(p(1)), cv = std::cos(p(1));
    const double rho = R + r * cu;
    SecondDerivatives H(2, 3);
    H(0, 0) = vec({-r * cu * cv, -r * cu * sv, -r * su});
    H(0, 1) = vec({r * su * sv, -r * su * cv, 0.0});
    H(1, 0) = H(0, 1);
    H(1, 1) = vec({-rho * cv, -rho * sv, 0.0});
    return H;
  };
  ChartDomain dom{{Axis{0.0, 2.0 * kPi, AxisKind::periodic}, Axis{0.0, 2.0 * kPi, AxisKind::periodic}}};
  ManifoldModel model = [](std::size_t, const Vec& p) {
    return vec({std::cos(p(0)), std::sin(p(0)), std::cos(p(1)), std::sin(p(1))});
  };
  return ChartAtlas("torus", {make_chart(dom, 3, fns, opt)}, model);
}

ChartAtlas flat_patch(Options opt) {
  ChartFunctions fns;
  fns.map = [](const Vec& p) { return vec({p(0), 0.0}); };
  fns.jacobian = [](const Vec&) {
    Mat J(2, 1);
    J << 1.0, 0.0;
    return J;
  };
  fns.hessian = [](const Vec&) { return SecondDerivatives(1, 2); };
  ChartDomain dom{{Axis{-1.0, 1.0, AxisKind::boundary}}};
  ManifoldModel model = [](std::size_t, const Vec& p) { return p; };
  return ChartAtlas("flat_patch", {make_chart(dom, 2, fns, opt)}, model);
}

ChartAtlas graph_patch(double c, Options opt) {
  ChartFunctions fns;
  fns.map = [c](const Vec& p) { return vec({p(0), p(1), 0.5 * c * (p(0) * p(0) - p(1) * p(1))}); };
  fns.jacobian = [c](const Vec& p) {
    Mat J(3, 2);
    J.col(0) = vec({1.0, 0.0, c * p(0)});
    J.col(1) = vec({0.0, 1.0, -c * p(1)});
    return J;
  };
  fns.hessian = [c](const Vec&) {
    SecondDerivatives H(2, 3);
    H(0, 0) = vec({0.0, 0.0, c});
    H(1, 1) = vec({0.0, 0.0, -c});
    return H;
  };
  ChartDomain dom{{Axis{-1.0, 1.0, AxisKind::boundary}, Axis{-1.0, 1.0, AxisKind::boundary}}};
  ManifoldModel model = [](std::size_t, const Vec& p) { return p; };
  return ChartAtlas("graph_patch", {make_chart(dom, 3, fns, opt)}, model);
}

ChartAtlas builtin(const std::string& name, const std::map<std::string, double>& params, Options opt) {
  auto get = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (name == "circle") return circle(get("r", 1.0), opt);
  if (name == "ellipse") return ellipse(get("a", 2.0), get("b", 1.0), opt);
  if (name == "sphere") return sphere(get("r", 1.0), opt);
  if (name == "torus") return torus(get("R", 2.0), get("r", 0.5), opt);
  if (name == "flat_patch") return flat_patch(opt);
  if (name == "graph_patch") return graph_patch(get("c", 1.0), opt);
  if (name == "lemniscate") return lemniscate(opt);
  if (name == "tilted_circle") return tilted_circle(opt);
  throw std::invalid_argument("unknown builtin shape '" + name + "'");
}

}  // namespace embedflow::fixtures

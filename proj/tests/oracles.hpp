#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library's numerics beyond evaluating a chart map.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double pi = std::numbers::pi;

/// Richardson-extrapolated central difference Jacobian of map at p.
inline Mat jacobian(const std::function<Vec(const Vec&)>& map, const Vec& p, double h = 1e-3) {
  const int k = static_cast<int>(p.size());
  const Vec x0 = map(p);
  Mat J(x0.size(), k);
  for (int i = 0; i < k; ++i) {
    Vec e = Vec::Zero(k);
    e(i) = 1.0;
    const Vec d1 = (map(p + h * e) - map(p - h * e)) / (2 * h);
    const Vec d2 = (map(p + 0.5 * h * e) - map(p - 0.5 * h * e)) / h;
    J.col(i) = (4.0 * d2 - d1) / 3.0;
  }
  return J;
}

/// 2x2 inverse by the adjugate formula.
inline Mat inverse2(const Mat& A) {
  const double det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
  Mat inv(2, 2);
  inv << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
  return inv / det;
}

inline double max_abs(const Mat& A) {
  double m = 0.0;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) m = std::max(m, std::abs(A(i, j)));
  return m;
}

/// Angle of the closest point of the unit circle to y, by dense sampling.
inline double circle_argmin(const Vec& y, int samples = 1 << 20) {
  double best = std::numeric_limits<double>::infinity();
  double arg = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * pi * i / samples;
    const double d = std::hypot(std::cos(t) - y(0), std::sin(t) - y(1));
    if (d < best) {
      best = d;
      arg = t;
    }
  }
  return arg;
}

/// Principal curvatures of the standard torus at angle u w.r.t. the outward normal.
inline std::vector<double> torus_curvatures(double R, double r, double u) {
  return {-std::cos(u) / (R + r * std::cos(u)), -1.0 / r};
}

/// Bisection root of a monotone scalar function on [a, b].
inline double bisect(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  double fa = f(a);
  for (int i = 0; i < iters; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Newton root of f with derivative df from x0.
inline double newton(const std::function<double(double)>& f, const std::function<double(double)>& df, double x0) {
  double x = x0;
  for (int i = 0; i < 100; ++i) {
    const double step = f(x) / df(x);
    x -= step;
    if (std::abs(step) < 1e-16) break;
  }
  return x;
}

/// Endpoint-Jacobian entries of the unit circle, frame w = (cos t, sin t).
inline Mat circle_de(double t, double v) {
  Mat DE(2, 2);
  DE << -(1 + v) * std::sin(t), std::cos(t), (1 + v) * std::cos(t), std::sin(t);
  return DE;
}

/// max over a dense (t, v) grid of |d/ds DE entries| for the unit circle, |v| <= vmax.
inline double circle_G(double vmax, int n = 400) {
  double g = 0.0;
  const double h = 1e-5;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * pi * i / n;
    for (int j = 0; j <= n; ++j) {
      const double v = -vmax + 2.0 * vmax * j / n;
      const Mat dt = (circle_de(t + h, v) - circle_de(t - h, v)) / (2 * h);
      const Mat dv = (circle_de(t, v + h) - circle_de(t, v - h)) / (2 * h);
      g = std::max({g, max_abs(dt), max_abs(dv)});
    }
  }
  return g;
}

/// Composite Simpson rule on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace oracle

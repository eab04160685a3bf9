#include "embedflow/qift.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "embedflow/certify.hpp"

namespace embedflow {

namespace {

Mat jac_x(const QiftProblem& p, const Vec& x, const Vec& l) {
  if (p.jac_x) return p.jac_x(x, l);
  return fd_jacobian([&](const Vec& y) { return p.F(y, l); }, x, 1e-6);
}

Mat jac_l(const QiftProblem& p, const Vec& x, const Vec& l) {
  if (p.jac_lambda) return p.jac_lambda(x, l);
  return fd_jacobian([&](const Vec& y) { return p.F(x, y); }, l, 1e-6);
}

// Calls visit(x, lambda) on lattice points of V_delta.
template <class Visit>
void sample_v(const QiftProblem& p, double delta, int samples, Visit&& visit) {
  const int m = static_cast<int>(p.x0.size());
  const int n = static_cast<int>(p.lambda0.size());
  const int d = m + n;
  int s = samples;
  while (s > 1 && std::pow(2.0 * s + 1.0, d) > 2e5) --s;
  std::vector<int> idx(static_cast<std::size_t>(d), -s);
  Vec ox(m), ol(n);
  while (true) {
    for (int i = 0; i < m; ++i) ox(i) = delta * idx[static_cast<std::size_t>(i)] / s;
    for (int i = 0; i < n; ++i) ol(i) = delta * idx[static_cast<std::size_t>(m + i)] / s;
    if (ox.norm() <= delta * (1 + 1e-12) && ol.norm() <= delta * (1 + 1e-12)) visit(Vec(p.x0 + ox), Vec(p.lambda0 + ol));
    int a = d - 1;
    while (a >= 0 && ++idx[static_cast<std::size_t>(a)] > s) idx[static_cast<std::size_t>(a--)] = -s;
    if (a < 0) break;
  }
}

double contraction_on(const QiftProblem& p, const Mat& Ainv, double delta, int samples) {
  const int m = static_cast<int>(p.x0.size());
  const Mat I = Mat::Identity(m, m);
  double sup = 0.0;
  sample_v(p, delta, samples, [&](const Vec& x, const Vec& l) { sup = std::max(sup, sup_norm(I - Ainv * jac_x(p, x, l))); });
  return sup;
}

}  // namespace

QiftConstants qift_constants(const QiftProblem& prob, const QiftOptions& opt) {
  if (!prob.F) throw std::invalid_argument("QIFT problem needs F");
  if (prob.F(prob.x0, prob.lambda0).norm() >= 1e-10) {
    throw std::invalid_argument("QIFT base point is not a solution: |F(x0, lambda0)| >= 1e-10");
  }
  const Mat A = jac_x(prob, prob.x0, prob.lambda0);
  Eigen::FullPivLU<Mat> lu(A);
  if (!lu.isInvertible()) throw std::invalid_argument("dF/dx(x0, lambda0) is not invertible");
  const Mat Ainv = lu.inverse();
  QiftConstants c;
  c.M = sup_norm(Ainv);
  if (contraction_on(prob, Ainv, opt.delta_max, opt.samples) <= 0.5) {
    c.delta = opt.delta_max;
  } else {
    double lo = 0.0, hi = opt.delta_max;
    for (int i = 0; i < opt.bisections; ++i) {
      const double mid = 0.5 * (lo + hi);
      (contraction_on(prob, Ainv, mid, opt.samples) <= 0.5 ? lo : hi) = mid;
    }
    c.delta = lo;
  }
  if (!(c.delta > 0.0)) throw std::runtime_error("no positive delta satisfies the contraction condition");
  c.contraction = contraction_on(prob, Ainv, c.delta, opt.samples);
  sample_v(prob, c.delta, opt.samples, [&](const Vec& x, const Vec& l) { c.B = std::max(c.B, sup_norm(jac_l(prob, x, l))); });
  c.delta1 = c.B > 0.0 ? c.delta / (2.0 * c.M * c.B) : opt.delta_max;
  return c;
}

QiftSolution qift_solve(const QiftProblem& prob, const QiftConstants& c, const Vec& lambda, const QiftOptions& opt) {
  if (lambda.size() != prob.lambda0.size()) throw std::invalid_argument("lambda has the wrong dimension");
  if (!((lambda - prob.lambda0).norm() < c.delta1)) {
    throw std::out_of_range("lambda lies outside the certified ball of radius delta1");
  }
  const Mat Ainv = jac_x(prob, prob.x0, prob.lambda0).fullPivLu().inverse();
  QiftSolution s;
  s.constants = c;
  s.x = prob.x0;
  Vec F = prob.F(s.x, lambda);
  double prev_step = -1.0;
  while (F.norm() >= opt.residual_tol) {
    if (s.iterations >= opt.max_iterations) throw std::runtime_error("QIFT iteration did not converge");
    const Vec next = s.x - Ainv * F;
    const double step = (next - s.x).norm();
    if (prev_step > 1e-13) {
      const double ratio = step / prev_step;
      s.max_step_ratio = std::max(s.max_step_ratio, ratio);
      if (ratio > 0.5 + 1e-9) throw std::logic_error("measured contraction factor exceeds 1/2");
    }
    prev_step = step;
    s.x = next;
    F = prob.F(s.x, lambda);
    ++s.iterations;
  }
  s.residual = F.norm();
  return s;
}

QiftSolution qift_solve(const QiftProblem& prob, const Vec& lambda, const QiftOptions& opt) {
  return qift_solve(prob, qift_constants(prob, opt), lambda, opt);
}

}  // namespace embedflow

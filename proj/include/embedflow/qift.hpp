#pragma once

#include <functional>

#include <Eigen/Dense>

#include "embedflow/geometry.hpp"

namespace embedflow {

/// F(x, lambda) = 0 with F(x0, lambda0) = 0. Missing Jacobians fall back to
/// central differences.
struct QiftProblem {
  std::function<Vec(const Vec&, const Vec&)> F;
  std::function<Mat(const Vec&, const Vec&)> jac_x;
  std::function<Mat(const Vec&, const Vec&)> jac_lambda;
  Vec x0;
  Vec lambda0;
};

struct QiftOptions {
  double delta_max = 1.0;  // bisection range for delta
  int samples = 8;         // lattice points per half-axis when sampling V_delta
  int bisections = 50;
  double residual_tol = 1e-10;
  int max_iterations = 500;
};

struct QiftConstants {
  double delta = 0.0;
  double M = 0.0;        // ||dF/dx(x0, lambda0)^{-1}||
  double B = 0.0;        // sup of ||dF/dlambda|| over V_delta
  double delta1 = 0.0;   // delta / (2 M B)
  double contraction = 0.0;  // sampled sup of ||Id - A^{-1} dF/dx|| over V_delta
};

struct QiftSolution {
  QiftConstants constants;
  Vec x;
  int iterations = 0;
  double residual = 0.0;
  double max_step_ratio = 0.0;  // largest observed |x_{j+1} - x_j| / |x_j - x_{j-1}|
};

/// Radii and bounds of the quantitative implicit function theorem. V_delta is
/// the set |x - x0| <= delta, |lambda - lambda0| <= delta, sampled on a lattice.
QiftConstants qift_constants(const QiftProblem& prob, const QiftOptions& opt = {});

/// g(lambda) by the fixed-point iteration x <- x - A^{-1} F(x, lambda),
/// A = dF/dx(x0, lambda0). Rejects lambda outside the open ball of radius delta1.
QiftSolution qift_solve(const QiftProblem& prob, const Vec& lambda, const QiftOptions& opt = {});
QiftSolution qift_solve(const QiftProblem& prob, const QiftConstants& c, const Vec& lambda,
                        const QiftOptions& opt = {});

}  // namespace embedflow

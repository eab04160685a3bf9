#pragma once

#include <functional>
#include <string>
#include <vector>

#include "embedflow/geometry.hpp"

namespace embedflow {

struct PenaltyConfig {
  std::vector<Vec> data_points;
  double weight_data = 1.0;
  double weight_vol = 1.0;
  /// Ambient support radius of the data-gradient mollifier; 0 selects four
  /// times the largest ambient distance between lattice neighbours.
  double bump_bandwidth = 0.0;
  double tie_tolerance = 1e-6;
  /// Highest monomial degree reproduced by the mollifier.
  int mollifier_degree = 5;
};

/// One ambient vector per grid node, in grid.nodes() order.
struct NormalField {
  std::vector<Vec> vectors;
  double k_phi = 0.0;       // largest pointwise length before normalization
  bool converged = false;   // k_phi below the gradient tolerance
  std::vector<std::string> warnings;

  double max_length() const;
};

/// Quadrature weight times sqrt(det g) at every node (grid.nodes() order).
std::vector<double> volume_weights(const ChartAtlas& atlas, const SampleGrid& grid);

double volume(const ChartAtlas& atlas, const SampleGrid& grid);

/// Sum of squared distances from the data points to phi(M).
double data_term(const ChartAtlas& atlas, const SampleGrid& grid, const std::vector<Vec>& data);

double penalty_value(const ChartAtlas& atlas, const SampleGrid& grid, const PenaltyConfig& cfg);

/// L2(phi(M)) gradient of the volume: minus the mean-curvature vector. Moving
/// along its negative decreases the volume.
NormalField grad_volume(const ChartAtlas& atlas, const SampleGrid& grid);

/// L2 gradient of the data term, mollified around each foot point. Data
/// points whose nearest point is tied are skipped with a warning.
NormalField grad_data(const ChartAtlas& atlas, const SampleGrid& grid, const PenaltyConfig& cfg);

struct Projection {
  NormalField field;
  double tangential_residual = 0.0;  // max over nodes of |tangential part| / |input|
};

Projection normal_project(const ChartAtlas& atlas, const SampleGrid& grid, const std::vector<Vec>& field);

/// (w_vol grad_vol + w_data grad_data) / k_phi; a zero field flagged as
/// converged when k_phi < grad_tol.
NormalField combined_gradient(const ChartAtlas& atlas, const SampleGrid& grid, const PenaltyConfig& cfg,
                              double grad_tol = 1e-10);

/// Unnormalized gradient w_vol grad_vol + w_data grad_data.
NormalField penalty_gradient(const ChartAtlas& atlas, const SampleGrid& grid, const PenaltyConfig& cfg);

/// Quadrature of a . b over phi(M).
double l2_pairing(const ChartAtlas& atlas, const SampleGrid& grid, const std::vector<Vec>& a,
                  const std::vector<Vec>& b);

/// Non-invariant reference functional: integral of |d phi / dq|^2 dq.
double dirichlet_energy(const ChartAtlas& atlas, const SampleGrid& grid);

/// Its L2(phi(M)) gradient, -2 (Laplacian_q phi) / sqrt(det g). Not normal.
std::vector<Vec> dirichlet_gradient(const ChartAtlas& atlas, const SampleGrid& grid);

using Functional = std::function<double(const ChartAtlas&, const SampleGrid&)>;

/// Tangent vector field on M in chart coordinates: (chart, q) -> dq/dt.
using ChartVectorField = std::function<Vec(std::size_t, const Vec&)>;

struct InvarianceResult {
  double defect = 0.0;
  double tau = 0.0;       // time actually used
  bool tau_reduced = false;
};

/// |P(phi o g_tau) - P(phi)| where g_tau is the RK4 time-tau flow of X. Both
/// values are computed through the same finite-difference chart pipeline.
InvarianceResult invariance_check(const ChartAtlas& atlas, const SampleGrid& grid, const Functional& penalty,
                                  const ChartVectorField& X, double tau, int rk_steps = 64);

/// The chart-wise composition phi o g_tau used by invariance_check.
ChartAtlas reparametrize(const ChartAtlas& atlas, const ChartVectorField& X, double tau, int rk_steps = 64);

}  // namespace embedflow

#pragma once

#include <string>
#include <vector>

#include "embedflow/geometry.hpp"

namespace embedflow {

/// Endpoint Jacobian too close to singular to invert: (q, v) is at or near a
/// focal point of the embedding.
class FocalProximityError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

struct CertifyOptions {
  double sigma_grid = 0.9;  // multiplies delta and K^{-1}
  double v_max = 1.0;       // |v| bound used when K = 0
  double cap = 1.0;         // value of delta0 / delta2 when their denominators vanish
  int shells = 16;          // radial shells of W, excluding v = 0
  int directions = 16;      // angular samples of the normal circle in codimension two
};

/// Normal frame at q with its first (and optionally second) parameter
/// derivatives. The multi-index of q is held fixed across the difference
/// stencil so the frame is smooth there.
struct FrameJet {
  Mat w;                     // N x (N - k)
  std::vector<Mat> dw;       // dw[p] = dw / dq^p
  std::vector<Mat> d2w;      // d2w[p * k + j] = d^2 w / dq^p dq^j
  std::vector<int> multi_index;
  bool valid = true;         // false when the multi-index cannot be held on any stencil
};

FrameJet frame_jet(const Chart& chart, const Vec& q, bool second_order);

/// x(q) + v^i w_i(q), with v given in frame coefficients.
Vec endpoint_map(const Chart& chart, const Vec& q, const Vec& v);

struct EndpointJacobian {
  Vec q;
  Vec v;
  Mat matrix;  // N x N: tangent columns then frame columns
  double det = 0.0;
};

EndpointJacobian endpoint_jacobian(const Chart& chart, const Vec& q, const Vec& v);
EndpointJacobian endpoint_jacobian(const Chart& chart, const FrameJet& jet, const Vec& q, const Vec& v);

/// Largest absolute entry of J^{-1}, via cofactors; cross-checked against a
/// direct inverse. Throws FocalProximityError when |det J| <= 1e-12.
double inverse_sup_norm(const Mat& J);

/// Largest absolute entry.
double sup_norm(const Mat& A);

/// Unit normal directions (frame coefficients) used to sample W.
std::vector<Vec> normal_directions(int codim, int directions);

/// Sample radii of W: cap * s / shells for s = 0..shells.
std::vector<double> shell_radii(double w_cap, int shells);

struct TaylorBounds {
  double G = 0.0;
  std::vector<double> Gp;       // one per ambient coordinate
  NodeRef G_where;
  Vec G_where_v;
  std::size_t sampled_points = 0;
  std::size_t excluded_nodes = 0;  // near a boundary of M
  std::size_t flagged_nodes = 0;   // frame multi-index not locally constant
};

/// Grid maxima over W of |d_j f| for the endpoint-Jacobian entries f (G) and
/// of the endpoint-Jacobian rows (Gp).
TaylorBounds taylor_bounds(const ChartAtlas& atlas, const SampleGrid& grid, double w_cap,
                           const CertifyOptions& opt = {});
double taylor_bound_G(const ChartAtlas& atlas, const SampleGrid& grid, double w_cap,
                      const CertifyOptions& opt = {});
std::vector<double> gp_bound(const ChartAtlas& atlas, const SampleGrid& grid, double w_cap,
                             const CertifyOptions& opt = {});

double delta0_from(double P, double G, int N, double cap = 1.0);
double delta1_from(double delta0, double P);
double delta2_from(double delta1, const std::vector<double>& Gp, int N, double cap = 1.0);

struct DeltaChain {
  double P = 0.0;
  double delta0 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta = 0.0;  // min(delta2, delta0)
};

DeltaChain delta_chain(const Mat& DE, double G, const std::vector<double>& Gp, double cap = 1.0);

double delta0_at(const Chart& chart, const Vec& q, const Vec& v, double G, double cap = 1.0);
double delta1_at(const Chart& chart, const Vec& q, const Vec& v, double G, double cap = 1.0);
double delta2_at(const Chart& chart, const Vec& q, const Vec& v, double G, const std::vector<double>& Gp,
                 double cap = 1.0);
double delta_at(const Chart& chart, const Vec& q, const Vec& v, double G, const std::vector<double>& Gp,
                double cap = 1.0);

struct WPoint {
  NodeRef node;
  Vec q;
  Vec v;
};

struct CertificationReport {
  std::string shape;
  int N = 0;
  int k = 0;
  double K = 0.0;           // raw grid maximum
  WPoint K_where;
  double W_cap = 0.0;
  double P_max = 0.0;
  double G = 0.0;
  WPoint G_where;
  std::vector<double> Gp;
  double delta0_min = 0.0;
  double delta1_min = 0.0;
  double delta2_min = 0.0;
  double delta_pointwise_min = 0.0;
  WPoint delta_where;
  double delta = 0.0;       // half the pointwise minimum, times sigma_grid
  double epsilon = 0.0;
  double t_star = 0.0;
  CertifyOptions options;
  std::vector<std::vector<int>> resolutions;  // intervals per axis, per chart
  std::size_t w_points = 0;
  std::size_t excluded_nodes = 0;
  std::size_t flagged_nodes = 0;
};

/// Half the grid minimum of delta(q0, v0) over W, times sigma_grid.
double delta_global(const ChartAtlas& atlas, const SampleGrid& grid, const CertifyOptions& opt = {});

/// The full constant chain, ending in epsilon = t* = min{sigma/K, delta/3}.
CertificationReport t_star(const ChartAtlas& atlas, const SampleGrid& grid, const CertifyOptions& opt = {});
inline CertificationReport certify(const ChartAtlas& atlas, const SampleGrid& grid, const CertifyOptions& opt = {}) {
  return t_star(atlas, grid, opt);
}

/// Sampled sup of ||Id - DE(q0, v0)^{-1} DE(q, v)|| over the Euclidean ball of
/// the given radius about (q0, v0) in (parameter, frame coefficient) space.
double contraction_sup(const Chart& chart, const Vec& q0, const Vec& v0, double radius, int radial_samples = 4);

/// Largest radius (by bisection) on which the sampled contraction sup stays
/// at most 1/2. Diagnostic only; the certificate uses the closed-form delta0.
double contraction_radius(const Chart& chart, const Vec& q0, const Vec& v0, double upper, int iterations = 40);

}  // namespace embedflow

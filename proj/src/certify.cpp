#include "embedflow/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace embedflow {

namespace {

// Below this K the embedding is treated as flat: K^{-1} = infinity.
constexpr double kFlatCurvature = 1e-6;

struct StencilBreak {};

FrameJet jet_with_index(const Chart& chart, const Vec& q, bool second_order, const std::vector<int>& index,
                        const Mat& reference) {
  const int n = chart.ambient_dim();
  const int m = static_cast<int>(reference.cols());
  const int k = chart.dim();
  FrameJet jet;
  jet.multi_index = index;
  auto field = [&](const Vec& p) -> Vec {
    const auto basis = frame_for_index(chart.jacobian(p), index);
    if (!basis) throw StencilBreak{};
    for (int i = 0; i < m; ++i) {
      if (basis->col(i).dot(reference.col(i)) <= 0.0) throw StencilBreak{};
    }
    return Eigen::Map<const Vec>(basis->data(), basis->size());
  };
  Vec w_flat;
  try {
    w_flat = field(q);
  } catch (const StencilBreak&) {
    jet.valid = false;
    return jet;
  }
  jet.w = Eigen::Map<const Mat>(w_flat.data(), n, m);
  std::vector<double> scales{1.0};
  if (!chart.lattice_only()) scales = {1.0, 0.1, 0.01};
  for (double scale : scales) {
    try {
      const FieldDerivatives d = chart.differentiate(q, field, second_order, scale);
      jet.dw.clear();
      for (int p = 0; p < k; ++p) {
        jet.dw.push_back(Eigen::Map<const Mat>(d.first[static_cast<std::size_t>(p)].data(), n, m));
      }
      jet.d2w.clear();
      for (const Vec& s : d.second) jet.d2w.push_back(Eigen::Map<const Mat>(s.data(), n, m));
      jet.valid = true;
      return jet;
    } catch (const StencilBreak&) {
      jet.valid = false;
    }
  }
  return jet;
}

struct NodeData {
  NodeRef node;
  Vec q;
  Mat J;
  SecondDerivatives H;
  FrameJet jet;
};

struct NodeSweep {
  std::vector<NodeData> nodes;
  std::size_t excluded = 0;
  std::size_t flagged = 0;
};

NodeSweep collect_nodes(const ChartAtlas& atlas, const SampleGrid& grid) {
  NodeSweep out;
  for (const NodeRef& n : grid.nodes()) {
    const ChartLattice& lat = grid.lattice(n.chart);
    if (lat.near_boundary(n.index)) {
      ++out.excluded;
      continue;
    }
    const Chart& chart = atlas.chart(n.chart);
    NodeData d;
    d.node = n;
    d.q = lat.node(n.index);
    try {
      d.J = chart.jacobian(d.q);
      d.jet = frame_jet(chart, d.q, true);
    } catch (const ImmersionError& e) {
      throw ImmersionError(e.what(), d.q);
    }
    if (!d.jet.valid) {
      ++out.flagged;
      continue;
    }
    d.H = chart.hessian(d.q);
    out.nodes.push_back(std::move(d));
  }
  return out;
}

Mat assemble_de(const Mat& J, const FrameJet& jet, const Vec& v) {
  const int k = static_cast<int>(J.cols());
  const int n = static_cast<int>(J.rows());
  Mat DE(n, n);
  for (int p = 0; p < k; ++p) DE.col(p) = J.col(p) + jet.dw[static_cast<std::size_t>(p)] * v;
  DE.rightCols(n - k) = jet.w;
  return DE;
}

std::vector<Vec> w_samples(int codim, double w_cap, const CertifyOptions& opt) {
  std::vector<Vec> out{Vec::Zero(codim)};
  const auto dirs = normal_directions(codim, opt.directions);
  const auto radii = shell_radii(w_cap, opt.shells);
  for (std::size_t s = 1; s < radii.size(); ++s) {
    for (const Vec& d : dirs) out.push_back(radii[s] * d);
  }
  return out;
}

TaylorBounds bounds_from(const NodeSweep& sweep, int n, int k, const std::vector<Vec>& vs) {
  TaylorBounds tb;
  tb.Gp.assign(static_cast<std::size_t>(n), 0.0);
  tb.excluded_nodes = sweep.excluded;
  tb.flagged_nodes = sweep.flagged;
  bool first = true;
  for (const NodeData& d : sweep.nodes) {
    // v-independent part: d/dv of tangent columns and d/dq of frame columns
    double fixed = 0.0;
    for (int p = 0; p < k; ++p) fixed = std::max(fixed, sup_norm(d.jet.dw[static_cast<std::size_t>(p)]));
    for (const Vec& v : vs) {
      double g = fixed;
      for (int p = 0; p < k; ++p) {
        for (int j = 0; j < k; ++j) {
          const Vec col = d.H(p, j) + d.jet.d2w[static_cast<std::size_t>(p * k + j)] * v;
          g = std::max(g, col.cwiseAbs().maxCoeff());
        }
      }
      if (first || g > tb.G) {
        tb.G = g;
        tb.G_where = d.node;
        tb.G_where_v = v;
        first = false;
      }
      const Mat DE = assemble_de(d.J, d.jet, v);
      for (int r = 0; r < n; ++r) {
        tb.Gp[static_cast<std::size_t>(r)] = std::max(tb.Gp[static_cast<std::size_t>(r)], DE.row(r).cwiseAbs().maxCoeff());
      }
      ++tb.sampled_points;
    }
  }
  return tb;
}

double w_cap_for(double K, const CertifyOptions& opt) { return K > kFlatCurvature ? 0.999 / K : opt.v_max; }

}  // namespace

FrameJet frame_jet(const Chart& chart, const Vec& q, bool second_order) {
  const NormalFrame nf = normal_frame(chart, q);
  return jet_with_index(chart, q, second_order, nf.multi_index, nf.basis);
}

Vec endpoint_map(const Chart& chart, const Vec& q, const Vec& v) {
  const NormalFrame nf = normal_frame(chart, q);
  if (v.size() != nf.basis.cols()) throw std::invalid_argument("normal coefficients have the wrong size");
  return chart.point(q) + nf.basis * v;
}

EndpointJacobian endpoint_jacobian(const Chart& chart, const FrameJet& jet, const Vec& q, const Vec& v) {
  if (!jet.valid) throw GeometryError("frame multi-index is not locally constant at this point");
  if (v.size() != jet.w.cols()) throw std::invalid_argument("normal coefficients have the wrong size");
  EndpointJacobian out;
  out.q = q;
  out.v = v;
  out.matrix = assemble_de(chart.jacobian(q), jet, v);
  out.det = out.matrix.determinant();
  return out;
}

EndpointJacobian endpoint_jacobian(const Chart& chart, const Vec& q, const Vec& v) {
  return endpoint_jacobian(chart, frame_jet(chart, q, false), q, v);
}

double sup_norm(const Mat& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

double inverse_sup_norm(const Mat& J) {
  const int n = static_cast<int>(J.rows());
  if (n != J.cols() || n == 0) throw std::invalid_argument("inverse_sup_norm needs a square matrix");
  const double det = J.determinant();
  if (!(std::abs(det) > 1e-12)) {
    throw FocalProximityError("endpoint Jacobian is singular (|det| <= 1e-12): focal point proximity");
  }
  double max_minor = 1.0;
  if (n > 1) {
    max_minor = 0.0;
    Mat minor(n - 1, n - 1);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int r = 0, rr = 0; r < n; ++r) {
          if (r == i) continue;
          for (int c = 0, cc = 0; c < n; ++c) {
            if (c == j) continue;
            minor(rr, cc++) = J(r, c);
          }
          ++rr;
        }
        max_minor = std::max(max_minor, std::abs(minor.determinant()));
      }
    }
  }
  const double cramer = max_minor / std::abs(det);
  const double direct = sup_norm(J.partialPivLu().inverse());
  if (std::abs(cramer - direct) > 1e-6 * std::max(cramer, direct)) {
    throw GeometryError("cofactor and direct inverse disagree; matrix is numerically singular");
  }
  return cramer;
}

std::vector<Vec> normal_directions(int codim, int directions) {
  std::vector<Vec> out;
  if (codim == 1) {
    out.push_back(Vec::Constant(1, 1.0));
    out.push_back(Vec::Constant(1, -1.0));
  } else if (codim == 2) {
    for (int j = 0; j < directions; ++j) {
      const double a = 2.0 * std::numbers::pi * j / directions;
      Vec d(2);
      d << std::cos(a), std::sin(a);
      out.push_back(d);
    }
  } else {
    for (int i = 0; i < codim; ++i) {
      for (double s : {1.0, -1.0}) {
        Vec d = Vec::Zero(codim);
        d(i) = s;
        out.push_back(d);
      }
    }
    for (int mask = 0; mask < (1 << codim); ++mask) {
      Vec d(codim);
      for (int i = 0; i < codim; ++i) d(i) = (mask >> i & 1) ? -1.0 : 1.0;
      out.push_back(d.normalized());
    }
  }
  return out;
}

std::vector<double> shell_radii(double w_cap, int shells) {
  std::vector<double> out;
  for (int s = 0; s <= shells; ++s) out.push_back(w_cap * s / shells);
  return out;
}

TaylorBounds taylor_bounds(const ChartAtlas& atlas, const SampleGrid& grid, double w_cap, const CertifyOptions& opt) {
  const NodeSweep sweep = collect_nodes(atlas, grid);
  return bounds_from(sweep, atlas.ambient_dim(), atlas.dim(), w_samples(atlas.codim(), w_cap, opt));
}

double taylor_bound_G(const ChartAtlas& atlas, const SampleGrid& grid, double w_cap, const CertifyOptions& opt) {
  return taylor_bounds(atlas, grid, w_cap, opt).G;
}

std::vector<double> gp_bound(const ChartAtlas& atlas, const SampleGrid& grid, double w_cap,
                             const CertifyOptions& opt) {
  return taylor_bounds(atlas, grid, w_cap, opt).Gp;
}

double delta0_from(double P, double G, int N, double cap) {
  if (G == 0.0) return cap;
  return 1.0 / (2.0 * N * P * G);
}

double delta1_from(double delta0, double P) { return delta0 / (2.0 * P); }

double delta2_from(double delta1, const std::vector<double>& Gp, int N, double cap) {
  double s = 0.0;
  for (double g : Gp) s += g * g;
  if (s == 0.0) return cap;
  return delta1 / std::sqrt(N * s);
}

DeltaChain delta_chain(const Mat& DE, double G, const std::vector<double>& Gp, double cap) {
  const int n = static_cast<int>(DE.rows());
  DeltaChain c;
  c.P = inverse_sup_norm(DE);
  c.delta0 = delta0_from(c.P, G, n, cap);
  c.delta1 = delta1_from(c.delta0, c.P);
  c.delta2 = delta2_from(c.delta1, Gp, n, cap);
  c.delta = std::min(c.delta2, c.delta0);
  return c;
}

double delta0_at(const Chart& chart, const Vec& q, const Vec& v, double G, double cap) {
  const double P = inverse_sup_norm(endpoint_jacobian(chart, q, v).matrix);
  return delta0_from(P, G, chart.ambient_dim(), cap);
}

double delta1_at(const Chart& chart, const Vec& q, const Vec& v, double G, double cap) {
  const double P = inverse_sup_norm(endpoint_jacobian(chart, q, v).matrix);
  return delta1_from(delta0_from(P, G, chart.ambient_dim(), cap), P);
}

double delta2_at(const Chart& chart, const Vec& q, const Vec& v, double G, const std::vector<double>& Gp,
                 double cap) {
  return delta_chain(endpoint_jacobian(chart, q, v).matrix, G, Gp, cap).delta2;
}

double delta_at(const Chart& chart, const Vec& q, const Vec& v, double G, const std::vector<double>& Gp,
                double cap) {
  return delta_chain(endpoint_jacobian(chart, q, v).matrix, G, Gp, cap).delta;
}

CertificationReport t_star(const ChartAtlas& atlas, const SampleGrid& grid, const CertifyOptions& opt) {
  if (!(opt.sigma_grid > 0.0 && opt.sigma_grid <= 1.0)) throw std::invalid_argument("sigma_grid must lie in (0, 1]");
  if (!(opt.v_max > 0.0) || !(opt.cap > 0.0) || opt.shells < 1 || opt.directions < 3) {
    throw std::invalid_argument("invalid certification options");
  }
  CertificationReport rep;
  rep.shape = atlas.name();
  rep.N = atlas.ambient_dim();
  rep.k = atlas.dim();
  rep.options = opt;
  for (std::size_t c = 0; c < grid.charts(); ++c) {
    std::vector<int> r;
    for (int a = 0; a < grid.lattice(c).dim(); ++a) r.push_back(grid.lattice(c).axis(a).intervals());
    rep.resolutions.push_back(r);
  }

  const CurvatureBound kb = max_principal_curvature(atlas, grid);
  rep.K = kb.K;
  rep.K_where = {kb.where, grid.param(kb.where), Vec()};
  rep.W_cap = w_cap_for(rep.K, opt);

  const NodeSweep sweep = collect_nodes(atlas, grid);
  if (sweep.nodes.empty()) throw std::invalid_argument("no admissible grid nodes for W");
  const auto vs = w_samples(atlas.codim(), rep.W_cap, opt);
  const TaylorBounds tb = bounds_from(sweep, rep.N, rep.k, vs);
  rep.G = tb.G;
  rep.G_where = {tb.G_where, grid.param(tb.G_where), tb.G_where_v};
  rep.Gp = tb.Gp;
  rep.excluded_nodes = sweep.excluded;
  rep.flagged_nodes = sweep.flagged;

  const double inf = std::numeric_limits<double>::infinity();
  rep.delta0_min = rep.delta1_min = rep.delta2_min = rep.delta_pointwise_min = inf;
  for (const NodeData& d : sweep.nodes) {
    for (const Vec& v : vs) {
      const DeltaChain c = delta_chain(assemble_de(d.J, d.jet, v), rep.G, rep.Gp, opt.cap);
      rep.P_max = std::max(rep.P_max, c.P);
      rep.delta0_min = std::min(rep.delta0_min, c.delta0);
      rep.delta1_min = std::min(rep.delta1_min, c.delta1);
      rep.delta2_min = std::min(rep.delta2_min, c.delta2);
      if (c.delta < rep.delta_pointwise_min) {
        rep.delta_pointwise_min = c.delta;
        rep.delta_where = {d.node, d.q, v};
      }
      ++rep.w_points;
    }
  }
  rep.delta = 0.5 * rep.delta_pointwise_min * opt.sigma_grid;
  const double k_inv = rep.K > kFlatCurvature ? opt.sigma_grid / rep.K : inf;
  rep.epsilon = std::min(k_inv, rep.delta / 3.0);
  rep.t_star = rep.epsilon;
  return rep;
}

double delta_global(const ChartAtlas& atlas, const SampleGrid& grid, const CertifyOptions& opt) {
  return t_star(atlas, grid, opt).delta;
}

namespace {

std::vector<Vec> ball_directions(int n) {
  std::vector<Vec> out;
  for (int i = 0; i < n; ++i) {
    for (double s : {1.0, -1.0}) {
      Vec d = Vec::Zero(n);
      d(i) = s;
      out.push_back(d);
    }
  }
  if (n <= 6) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      Vec d(n);
      for (int i = 0; i < n; ++i) d(i) = (mask >> i & 1) ? -1.0 : 1.0;
      out.push_back(d.normalized());
    }
  }
  return out;
}

}  // namespace

double contraction_sup(const Chart& chart, const Vec& q0, const Vec& v0, double radius, int radial_samples) {
  const int k = chart.dim();
  const int n = chart.ambient_dim();
  const NormalFrame nf = normal_frame(chart, q0);
  const FrameJet jet0 = jet_with_index(chart, q0, false, nf.multi_index, nf.basis);
  if (!jet0.valid) throw GeometryError("frame multi-index is not locally constant at this point");
  const Mat Ainv = assemble_de(chart.jacobian(q0), jet0, v0).partialPivLu().inverse();
  const Mat I = Mat::Identity(n, n);
  double sup = 0.0;
  for (const Vec& d : ball_directions(n)) {
    for (int s = 1; s <= radial_samples; ++s) {
      const Vec step = d * (radius * s / radial_samples);
      const Vec q = q0 + step.head(k);
      const Vec v = v0 + step.tail(n - k);
      const FrameJet jet = jet_with_index(chart, q, false, nf.multi_index, nf.basis);
      if (!jet.valid) throw GeometryError("frame multi-index changes inside the contraction ball");
      sup = std::max(sup, sup_norm(I - Ainv * assemble_de(chart.jacobian(q), jet, v)));
    }
  }
  return sup;
}

double contraction_radius(const Chart& chart, const Vec& q0, const Vec& v0, double upper, int iterations) {
  if (contraction_sup(chart, q0, v0, upper) <= 0.5) return upper;
  double lo = 0.0;
  double hi = upper;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (contraction_sup(chart, q0, v0, mid) <= 0.5) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace embedflow

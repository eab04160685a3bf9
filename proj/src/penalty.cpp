#include "embedflow/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace embedflow {

namespace {

// Orthogonal projector onto the normal space at a point with Jacobian J.
Mat normal_projector(const Mat& J) {
  const Mat Q = tangent_basis(J);
  return Mat::Identity(J.rows(), J.rows()) - Q * Q.transpose();
}

double bump(double r) { return r < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r * r)) : 0.0; }

// Exponent vectors of all monomials in k variables of total degree <= d,
// constant first.
std::vector<std::vector<int>> monomials(int k, int d) {
  std::vector<std::vector<int>> out;
  for (int total = 0; total <= d; ++total) {
    std::vector<int> e(static_cast<std::size_t>(k), 0);
    // Enumerate compositions of `total` into k parts.
    std::function<void(int, int)> rec = [&](int axis, int left) {
      if (axis == k - 1) {
        e[static_cast<std::size_t>(axis)] = left;
        out.push_back(e);
        return;
      }
      for (int i = left; i >= 0; --i) {
        e[static_cast<std::size_t>(axis)] = i;
        rec(axis + 1, left - i);
      }
    };
    rec(0, total);
  }
  return out;
}

Vec monomial_values(const std::vector<std::vector<int>>& mono, const Vec& s) {
  Vec p(static_cast<Eigen::Index>(mono.size()));
  for (std::size_t a = 0; a < mono.size(); ++a) {
    double v = 1.0;
    for (int i = 0; i < s.size(); ++i) v *= std::pow(s(i), mono[a][static_cast<std::size_t>(i)]);
    p(static_cast<Eigen::Index>(a)) = v;
  }
  return p;
}

struct Support {
  std::size_t node;  // position in grid.nodes()
  Vec s;             // scaled tangent coordinates at the foot
  double kernel;
};

// Coefficients rho_m with sum_m wv_m rho_m p(s_m) = p(0) for all monomials p
// of degree <= degree, rho_m = kernel_m * c . p(s_m). Falls back to lower
// degrees when the moment matrix is singular.
std::vector<double> reproducing_weights(const std::vector<Support>& sup, const std::vector<double>& wv, int k,
                                        int degree) {
  for (int d = degree; d >= 0; --d) {
    const auto mono = monomials(k, d);
    if (sup.size() < mono.size()) continue;
    const Eigen::Index n = static_cast<Eigen::Index>(mono.size());
    Mat M = Mat::Zero(n, n);
    std::vector<Vec> P;
    P.reserve(sup.size());
    for (const Support& s : sup) {
      P.push_back(monomial_values(mono, s.s));
      M += wv[s.node] * s.kernel * P.back() * P.back().transpose();
    }
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv(n - 1) > 1e-11 * sv(0))) continue;
    Vec e0 = Vec::Zero(n);
    e0(0) = 1.0;
    const Vec c = svd.solve(e0);
    std::vector<double> rho(sup.size());
    for (std::size_t m = 0; m < sup.size(); ++m) rho[m] = sup[m].kernel * c.dot(P[m]);
    return rho;
  }
  return {};
}

std::string describe(const Vec& y) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < y.size(); ++i) os << (i ? ", " : "") << y(i);
  os << ")";
  return os.str();
}

NormalField zero_field(const SampleGrid& grid, int n) {
  NormalField f;
  f.vectors.assign(grid.total_nodes(), Vec::Zero(n));
  return f;
}

void add_scaled(std::vector<Vec>& acc, const std::vector<Vec>& x, double w) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * x[i];
}

// Fourth-order Runge-Kutta flow of X for time tau starting at q.
Vec flow_point(const ChartVectorField& X, std::size_t chart, const Vec& q, double tau, int steps) {
  Vec x = q;
  const double h = tau / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec k1 = X(chart, x);
    const Vec k2 = X(chart, Vec(x + 0.5 * h * k1));
    const Vec k3 = X(chart, Vec(x + 0.5 * h * k2));
    const Vec k4 = X(chart, Vec(x + h * k3));
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace

double NormalField::max_length() const {
  double m = 0.0;
  for (const Vec& v : vectors) m = std::max(m, v.norm());
  return m;
}

std::vector<double> volume_weights(const ChartAtlas& atlas, const SampleGrid& grid) {
  std::vector<double> out;
  out.reserve(grid.total_nodes());
  for (const NodeRef& n : grid.nodes()) {
    const Vec p = grid.param(n);
    const Mat g = first_fundamental_form(atlas.chart(n.chart), p);
    out.push_back(grid.lattice(n.chart).weight(n.index) * std::sqrt(g.determinant()));
  }
  return out;
}

double volume(const ChartAtlas& atlas, const SampleGrid& grid) {
  double v = 0.0;
  for (double w : volume_weights(atlas, grid)) v += w;
  return v;
}

double data_term(const ChartAtlas& atlas, const SampleGrid& grid, const std::vector<Vec>& data) {
  double s = 0.0;
  for (const Vec& y : data) {
    const double d = nearest_point(atlas, grid, y).distance;
    s += d * d;
  }
  return s;
}

double penalty_value(const ChartAtlas& atlas, const SampleGrid& grid, const PenaltyConfig& cfg) {
  double p = 0.0;
  if (cfg.weight_vol != 0.0) p += cfg.weight_vol * volume(atlas, grid);
  if (cfg.weight_data != 0.0 && !cfg.data_points.empty()) p += cfg.weight_data * data_term(atlas, grid, cfg.data_points);
  return p;
}

NormalField grad_volume(const ChartAtlas& atlas, const SampleGrid& grid) {
  NormalField f;
  f.vectors.reserve(grid.total_nodes());
  for (const NodeRef& n : grid.nodes()) {
    const Chart& c = atlas.chart(n.chart);
    const Vec p = grid.param(n);
    const Mat J = c.jacobian(p);
    const SecondDerivatives H = c.hessian(p);
    const Mat ginv = (J.transpose() * J).inverse();
    Vec trace = Vec::Zero(J.rows());
    for (int i = 0; i < c.dim(); ++i) {
      for (int j = 0; j < c.dim(); ++j) trace += ginv(i, j) * H(i, j);
    }
    // The normal part of g^{ij} d_ij phi is the mean-curvature vector.
    f.vectors.push_back(-(normal_projector(J) * trace));
  }
  f.k_phi = f.max_length();
  return f;
}

NormalField grad_data(const ChartAtlas& atlas, const SampleGrid& grid, const PenaltyConfig& cfg) {
  const int N = atlas.ambient_dim();
  const int k = atlas.dim();
  NormalField f = zero_field(grid, N);
  if (cfg.data_points.empty()) return f;

  const auto nodes = grid.nodes();
  const double bw = cfg.bump_bandwidth > 0.0 ? cfg.bump_bandwidth : 4.0 * ambient_spacing(atlas, grid);
  const std::vector<double> wv = volume_weights(atlas, grid);
  std::vector<Vec> x(nodes.size());
  std::vector<Mat> proj(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Chart& c = atlas.chart(nodes[i].chart);
    const Vec p = grid.param(nodes[i]);
    x[i] = c.point(p);
    proj[i] = normal_projector(c.jacobian(p));
  }

  std::size_t used = 0;
  for (const Vec& y : cfg.data_points) {
    const NearestPoint np = nearest_point(atlas, grid, y, cfg.tie_tolerance);
    if (np.tie) {
      f.warnings.push_back("data point " + describe(y) + " has no unique nearest point; skipped");
      continue;
    }
    ++used;
    const Vec force = 2.0 * (np.point - y);
    if (force.norm() == 0.0) continue;
    const Mat Q = tangent_basis(atlas.chart(np.chart).jacobian(np.param));
    std::vector<Support> sup;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Vec d = x[i] - np.point;
      const double r = d.norm() / bw;
      if (r < 1.0) sup.push_back({i, Q.transpose() * d / bw, bump(r)});
    }
    const std::vector<double> rho = reproducing_weights(sup, wv, k, cfg.mollifier_degree);
    if (rho.empty()) {
      f.warnings.push_back("mollifier around the foot of " + describe(y) + " has no support; skipped");
      continue;
    }
    for (std::size_t m = 0; m < sup.size(); ++m) f.vectors[sup[m].node] += rho[m] * (proj[sup[m].node] * force);
  }
  if (used == 0) f.warnings.push_back("every data point is tied; data gradient is zero");
  f.k_phi = f.max_length();
  return f;
}

Projection normal_project(const ChartAtlas& atlas, const SampleGrid& grid, const std::vector<Vec>& field) {
  if (field.size() != grid.total_nodes()) throw std::invalid_argument("field size does not match the grid");
  Projection out;
  out.field.vectors.reserve(field.size());
  std::size_t i = 0;
  for (const NodeRef& n : grid.nodes()) {
    const Mat J = atlas.chart(n.chart).jacobian(grid.param(n));
    const Vec v = field[i++];
    const Vec nv = normal_projector(J) * v;
    const double len = v.norm();
    if (len > 0.0) out.tangential_residual = std::max(out.tangential_residual, (v - nv).norm() / len);
    out.field.vectors.push_back(nv);
  }
  out.field.k_phi = out.field.max_length();
  return out;
}

NormalField penalty_gradient(const ChartAtlas& atlas, const SampleGrid& grid, const PenaltyConfig& cfg) {
  NormalField f = zero_field(grid, atlas.ambient_dim());
  if (cfg.weight_vol != 0.0) add_scaled(f.vectors, grad_volume(atlas, grid).vectors, cfg.weight_vol);
  if (cfg.weight_data != 0.0 && !cfg.data_points.empty()) {
    NormalField d = grad_data(atlas, grid, cfg);
    add_scaled(f.vectors, d.vectors, cfg.weight_data);
    f.warnings = std::move(d.warnings);
  }
  f.k_phi = f.max_length();
  return f;
}

NormalField combined_gradient(const ChartAtlas& atlas, const SampleGrid& grid, const PenaltyConfig& cfg,
                              double grad_tol) {
  NormalField f = penalty_gradient(atlas, grid, cfg);
  if (f.k_phi < grad_tol) {
    for (Vec& v : f.vectors) v.setZero();
    f.converged = true;
    return f;
  }
  for (Vec& v : f.vectors) v /= f.k_phi;
  return f;
}

double l2_pairing(const ChartAtlas& atlas, const SampleGrid& grid, const std::vector<Vec>& a,
                  const std::vector<Vec>& b) {
  const std::vector<double> wv = volume_weights(atlas, grid);
  if (a.size() != wv.size() || b.size() != wv.size()) throw std::invalid_argument("field size does not match the grid");
  double s = 0.0;
  for (std::size_t i = 0; i < wv.size(); ++i) s += wv[i] * a[i].dot(b[i]);
  return s;
}

double dirichlet_energy(const ChartAtlas& atlas, const SampleGrid& grid) {
  double e = 0.0;
  for (const NodeRef& n : grid.nodes()) {
    e += grid.lattice(n.chart).weight(n.index) * atlas.chart(n.chart).jacobian(grid.param(n)).squaredNorm();
  }
  return e;
}

std::vector<Vec> dirichlet_gradient(const ChartAtlas& atlas, const SampleGrid& grid) {
  std::vector<Vec> out;
  out.reserve(grid.total_nodes());
  for (const NodeRef& n : grid.nodes()) {
    const Chart& c = atlas.chart(n.chart);
    const Vec p = grid.param(n);
    const SecondDerivatives H = c.hessian(p);
    Vec lap = Vec::Zero(c.ambient_dim());
    for (int a = 0; a < c.dim(); ++a) lap += H(a, a);
    out.push_back(-2.0 * lap / std::sqrt(first_fundamental_form(c, p).determinant()));
  }
  return out;
}

ChartAtlas reparametrize(const ChartAtlas& atlas, const ChartVectorField& X, double tau, int rk_steps) {
  std::vector<std::shared_ptr<const Chart>> charts;
  for (std::size_t c = 0; c < atlas.size(); ++c) {
    std::shared_ptr<const Chart> base = atlas.chart_ptr(c);
    const ChartDomain dom = base->domain();
    ChartFunctions fns;
    fns.map = [base, dom, X, c, tau, rk_steps](const Vec& q) {
      return base->point(dom.wrap(flow_point(X, c, q, tau, rk_steps)));
    };
    charts.push_back(std::make_shared<ParametricChart>(dom, base->ambient_dim(), std::move(fns),
                                                       DerivativeMode::finite_difference, base->fd_step()));
  }
  ManifoldModel model = [model = atlas.model(), X, tau, rk_steps](std::size_t c, const Vec& q) {
    return model(c, flow_point(X, c, q, tau, rk_steps));
  };
  return ChartAtlas(atlas.name(), std::move(charts), std::move(model));
}

InvarianceResult invariance_check(const ChartAtlas& atlas, const SampleGrid& grid, const Functional& penalty,
                                  const ChartVectorField& X, double tau, int rk_steps) {
  InvarianceResult r;
  r.tau = tau;
  const auto nodes = grid.nodes();
  auto stays_inside = [&](double t) {
    for (const NodeRef& n : nodes) {
      const ChartDomain& dom = atlas.chart(n.chart).domain();
      if (!dom.contains(dom.wrap(flow_point(X, n.chart, grid.param(n), t, rk_steps)), 1e-12)) return false;
    }
    return true;
  };
  for (int i = 0; i < 30 && !stays_inside(r.tau); ++i) {
    r.tau *= 0.5;
    r.tau_reduced = true;
  }
  if (!stays_inside(r.tau)) throw GeometryError("the flow of X leaves the chart domain for every tested time");
  const double base = penalty(reparametrize(atlas, X, 0.0, rk_steps), grid);
  const double moved = penalty(reparametrize(atlas, X, r.tau, rk_steps), grid);
  r.defect = std::abs(moved - base);
  return r;
}

}  // namespace embedflow

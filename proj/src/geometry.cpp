#include "embedflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "close_pairs.hpp"

namespace embedflow {

namespace {

double wrap_scalar(double x, const Axis& axis) {
  const double L = axis.length();
  double r = std::fmod(x - axis.lower, L);
  if (r < 0.0) r += L;
  if (r >= L) r -= L;
  return axis.lower + r;
}

Vec unit(int n, int i) {
  Vec e = Vec::Zero(n);
  e(i) = 1.0;
  return e;
}

}  // namespace

Vec ChartDomain::wrap(const Vec& p) const {
  Vec q = p;
  for (int a = 0; a < dim(); ++a) {
    if (axes[static_cast<std::size_t>(a)].kind == AxisKind::periodic) {
      q(a) = wrap_scalar(p(a), axes[static_cast<std::size_t>(a)]);
    }
  }
  return q;
}

bool ChartDomain::contains(const Vec& p, double slack) const {
  for (int a = 0; a < dim(); ++a) {
    const Axis& ax = axes[static_cast<std::size_t>(a)];
    if (ax.kind == AxisKind::periodic) continue;
    if (p(a) < ax.lower - slack || p(a) > ax.upper + slack) return false;
  }
  return true;
}

FieldDerivatives Chart::differentiate(const Vec& p, const FieldFn& field, bool second_order,
                                      double step_scale) const {
  const int k = dim();
  const double h = fd_step_ * step_scale;
  FieldDerivatives out;
  out.first.resize(static_cast<std::size_t>(k));
  std::vector<Vec> plus(static_cast<std::size_t>(k)), minus(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    Vec e = unit(k, i) * h;
    plus[static_cast<std::size_t>(i)] = field(p + e);
    minus[static_cast<std::size_t>(i)] = field(p - e);
    out.first[static_cast<std::size_t>(i)] =
        (plus[static_cast<std::size_t>(i)] - minus[static_cast<std::size_t>(i)]) / (2.0 * h);
  }
  if (!second_order) return out;
  const Vec center = field(p);
  out.second.assign(static_cast<std::size_t>(k * k), Vec());
  for (int i = 0; i < k; ++i) {
    out.second[static_cast<std::size_t>(i * k + i)] =
        (plus[static_cast<std::size_t>(i)] - 2.0 * center + minus[static_cast<std::size_t>(i)]) / (h * h);
    for (int j = i + 1; j < k; ++j) {
      const Vec ei = unit(k, i) * h;
      const Vec ej = unit(k, j) * h;
      Vec mixed = (field(p + ei + ej) - field(p + ei - ej) - field(p - ei + ej) + field(p - ei - ej)) /
                  (4.0 * h * h);
      out.second[static_cast<std::size_t>(i * k + j)] = mixed;
      out.second[static_cast<std::size_t>(j * k + i)] = mixed;
    }
  }
  return out;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& map, const Vec& p, double h) {
  const int k = static_cast<int>(p.size());
  Vec x0 = map(p);
  Mat J(x0.size(), k);
  for (int i = 0; i < k; ++i) {
    Vec e = unit(k, i) * h;
    J.col(i) = (map(p + e) - map(p - e)) / (2.0 * h);
  }
  return J;
}

SecondDerivatives fd_hessian(const std::function<Vec(const Vec&)>& map, const Vec& p, double h) {
  const int k = static_cast<int>(p.size());
  const Vec x0 = map(p);
  SecondDerivatives H(k, static_cast<int>(x0.size()));
  for (int i = 0; i < k; ++i) {
    const Vec ei = unit(k, i) * h;
    H(i, i) = (map(p + ei) - 2.0 * x0 + map(p - ei)) / (h * h);
    for (int j = i + 1; j < k; ++j) {
      const Vec ej = unit(k, j) * h;
      H(i, j) = (map(p + ei + ej) - map(p + ei - ej) - map(p - ei + ej) + map(p - ei - ej)) / (4.0 * h * h);
      H(j, i) = H(i, j);
    }
  }
  return H;
}

ParametricChart::ParametricChart(ChartDomain domain, int ambient_dim, ChartFunctions fns,
                                 DerivativeMode mode, double h)
    : Chart(std::move(domain), ambient_dim), fns_(std::move(fns)), mode_(mode) {
  if (!fns_.map) throw std::invalid_argument("chart needs a map");
  set_fd_step(h);
  if (mode_ == DerivativeMode::analytic && (!fns_.jacobian || !fns_.hessian)) {
    mode_ = DerivativeMode::finite_difference;
  }
}

Vec ParametricChart::point(const Vec& p) const { return fns_.map(p); }

Mat ParametricChart::jacobian(const Vec& p) const {
  if (mode_ == DerivativeMode::analytic) return fns_.jacobian(p);
  return fd_jacobian(fns_.map, p, fd_step());
}

SecondDerivatives ParametricChart::hessian(const Vec& p) const {
  if (mode_ == DerivativeMode::analytic) return fns_.hessian(p);
  return fd_hessian(fns_.map, p, fd_step());
}

ChartAtlas::ChartAtlas(std::string name, std::vector<std::shared_ptr<const Chart>> charts,
                       ManifoldModel model)
    : name_(std::move(name)), charts_(std::move(charts)), model_(std::move(model)) {
  if (charts_.empty()) throw std::invalid_argument("atlas needs at least one chart");
  k_ = charts_.front()->dim();
  n_ = charts_.front()->ambient_dim();
  if (k_ < 1 || n_ <= k_) throw std::invalid_argument("atlas needs 1 <= k < N");
  for (const auto& c : charts_) {
    if (c->dim() != k_ || c->ambient_dim() != n_) {
      throw std::invalid_argument("all charts of an atlas must share k and N");
    }
  }
  if (!model_) throw std::invalid_argument("atlas needs a manifold model");
}

AxisLattice::AxisLattice(Axis axis, int intervals) : axis_(axis), intervals_(intervals) {
  if (intervals_ < 2) throw std::invalid_argument("lattice needs at least two intervals");
  if (axis_.kind != AxisKind::periodic && intervals_ % 2 != 0) ++intervals_;
  if (!(axis_.upper > axis_.lower)) throw std::invalid_argument("empty chart axis");
}

double AxisLattice::weight(int i) const {
  const double h = spacing();
  if (periodic()) return h;
  if (i == 0 || i == intervals_) return h / 3.0;
  return (i % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0;
}

bool AxisLattice::near_boundary(int i) const {
  if (axis_.kind != AxisKind::boundary) return false;
  return i <= 1 || i >= intervals_ - 1;
}

ChartLattice::ChartLattice(std::vector<AxisLattice> axes) : axes_(std::move(axes)) {
  strides_.resize(axes_.size());
  size_ = 1;
  for (std::size_t a = axes_.size(); a-- > 0;) {
    strides_[a] = size_;
    size_ *= static_cast<std::size_t>(axes_[a].nodes());
  }
}

std::vector<int> ChartLattice::unflatten(std::size_t flat) const {
  std::vector<int> idx(axes_.size());
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    idx[a] = static_cast<int>(flat / strides_[a]);
    flat %= strides_[a];
  }
  return idx;
}

std::size_t ChartLattice::flatten(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < axes_.size(); ++a) flat += static_cast<std::size_t>(idx[a]) * strides_[a];
  return flat;
}

Vec ChartLattice::node(std::size_t flat) const {
  const auto idx = unflatten(flat);
  Vec p(dim());
  for (int a = 0; a < dim(); ++a) p(a) = axes_[static_cast<std::size_t>(a)].node(idx[static_cast<std::size_t>(a)]);
  return p;
}

double ChartLattice::weight(std::size_t flat) const {
  const auto idx = unflatten(flat);
  double w = 1.0;
  for (int a = 0; a < dim(); ++a) w *= axes_[static_cast<std::size_t>(a)].weight(idx[static_cast<std::size_t>(a)]);
  return w;
}

bool ChartLattice::near_boundary(std::size_t flat) const {
  const auto idx = unflatten(flat);
  for (int a = 0; a < dim(); ++a) {
    if (axes_[static_cast<std::size_t>(a)].near_boundary(idx[static_cast<std::size_t>(a)])) return true;
  }
  return false;
}

std::optional<std::size_t> ChartLattice::neighbor(std::size_t flat, int a, int offset) const {
  auto idx = unflatten(flat);
  const AxisLattice& ax = axes_.at(static_cast<std::size_t>(a));
  int j = idx[static_cast<std::size_t>(a)] + offset;
  if (ax.periodic()) {
    j = ((j % ax.nodes()) + ax.nodes()) % ax.nodes();
  } else if (j < 0 || j >= ax.nodes()) {
    return std::nullopt;
  }
  idx[static_cast<std::size_t>(a)] = j;
  return flatten(idx);
}

std::optional<std::size_t> ChartLattice::locate(const Vec& p, double tol) const {
  std::vector<int> idx(axes_.size());
  for (int a = 0; a < dim(); ++a) {
    const AxisLattice& ax = axes_[static_cast<std::size_t>(a)];
    double s = (p(a) - ax.axis().lower) / ax.spacing();
    if (ax.periodic()) {
      s = std::fmod(s, static_cast<double>(ax.nodes()));
      if (s < 0) s += ax.nodes();
    }
    const double r = std::round(s);
    if (std::abs(s - r) > tol) return std::nullopt;
    int j = static_cast<int>(r);
    if (ax.periodic()) j %= ax.nodes();
    if (j < 0 || j >= ax.nodes()) return std::nullopt;
    idx[static_cast<std::size_t>(a)] = j;
  }
  return flatten(idx);
}

SampleGrid SampleGrid::uniform(const ChartAtlas& atlas, int resolution) {
  std::vector<ChartLattice> lattices;
  for (std::size_t c = 0; c < atlas.size(); ++c) {
    std::vector<AxisLattice> axes;
    for (const Axis& ax : atlas.chart(c).domain().axes) axes.emplace_back(ax, resolution);
    lattices.emplace_back(std::move(axes));
  }
  return SampleGrid(std::move(lattices));
}

std::size_t SampleGrid::total_nodes() const {
  std::size_t n = 0;
  for (const auto& l : lattices_) n += l.size();
  return n;
}

std::vector<NodeRef> SampleGrid::nodes() const {
  std::vector<NodeRef> out;
  out.reserve(total_nodes());
  for (std::size_t c = 0; c < lattices_.size(); ++c) {
    for (std::size_t i = 0; i < lattices_[c].size(); ++i) out.push_back({c, i});
  }
  return out;
}

SampleGrid SampleGrid::refined() const {
  std::vector<ChartLattice> lattices;
  for (const auto& l : lattices_) {
    std::vector<AxisLattice> axes;
    for (int a = 0; a < l.dim(); ++a) axes.emplace_back(l.axis(a).axis(), 2 * l.axis(a).intervals());
    lattices.emplace_back(std::move(axes));
  }
  return SampleGrid(std::move(lattices));
}

Mat tangent_basis(const Mat& J) {
  Eigen::JacobiSVD<Mat> svd(J);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 1e-7 * std::max(1.0, s(0))) {
    throw ImmersionError("chart Jacobian is rank deficient", Vec());
  }
  Eigen::HouseholderQR<Mat> qr(J);
  return qr.householderQ() * Mat::Identity(J.rows(), J.cols());
}

std::optional<Mat> frame_for_index(const Mat& J, const std::vector<int>& index, double independence_tol) {
  const int n = static_cast<int>(J.rows());
  const Mat Q = tangent_basis(J);
  const int m = static_cast<int>(index.size());
  Mat proj(n, m);
  for (int c = 0; c < m; ++c) {
    Vec e = unit(n, index[static_cast<std::size_t>(c)]);
    proj.col(c) = e - Q * (Q.transpose() * e);
  }
  Eigen::JacobiSVD<Mat> svd(proj);
  if (svd.singularValues()(m - 1) <= independence_tol) return std::nullopt;
  Mat basis(n, m);
  for (int c = 0; c < m; ++c) {
    Vec w = proj.col(c);
    for (int pass = 0; pass < 2; ++pass) {
      w -= Q * (Q.transpose() * w);
      if (c > 0) w -= basis.leftCols(c) * (basis.leftCols(c).transpose() * w);
    }
    basis.col(c) = w / w.norm();
  }
  return basis;
}

NormalFrame normal_frame(const Mat& J, const Vec& base_point) {
  const int n = static_cast<int>(J.rows());
  const int m = n - static_cast<int>(J.cols());
  std::vector<int> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if (auto basis = frame_for_index(J, idx)) return NormalFrame{base_point, *basis, idx};
    // next combination in lexicographic order
    int i = m - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - m + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < m; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
  throw std::logic_error("no multi-index spans the normal space");
}

NormalFrame normal_frame(const Chart& chart, const Vec& p) {
  try {
    return normal_frame(chart.jacobian(p), chart.point(p));
  } catch (const ImmersionError& e) {
    throw ImmersionError(e.what(), p);
  }
}

Mat first_fundamental_form(const Chart& chart, const Vec& p) {
  const Mat J = chart.jacobian(p);
  Mat g = J.transpose() * J;
  Eigen::LLT<Mat> llt(g);
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  if (llt.info() != Eigen::Success || es.eigenvalues()(0) <= 1e-14 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    throw ImmersionError("first fundamental form is not positive definite", p);
  }
  return g;
}

Mat second_fundamental_form(const SecondDerivatives& H, const Vec& v) {
  const int k = H.dim();
  Mat II(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) II(i, j) = v.dot(H(i, j));
  }
  return 0.5 * (II + II.transpose());
}

Mat second_fundamental_form(const Chart& chart, const Vec& p, const Vec& v) {
  if (std::abs(v.norm() - 1.0) > 1e-8) throw std::invalid_argument("normal vector must have unit length");
  const Mat Q = tangent_basis(chart.jacobian(p));
  if ((Q.transpose() * v).norm() > 1e-8) throw std::invalid_argument("vector is not normal to the chart");
  return second_fundamental_form(chart.hessian(p), v);
}

std::vector<double> principal_curvatures(const Mat& g, const Mat& II) {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) throw ImmersionError("degenerate metric", Vec());
  const Mat L = llt.matrixL();
  const Mat Linv = L.inverse();
  Mat S = Linv * II * Linv.transpose();
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  if (es.info() != Eigen::Success) throw ImmersionError("eigen-solver failed", Vec());
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::vector<double> principal_curvatures(const Chart& chart, const Vec& p, const Vec& v) {
  const Mat g = first_fundamental_form(chart, p);
  return principal_curvatures(g, second_fundamental_form(chart, p, v));
}

namespace {

std::vector<Mat> shape_operators(const Mat& J, const SecondDerivatives& H, const Mat& frame) {
  const Mat g = J.transpose() * J;
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) throw ImmersionError("degenerate metric", Vec());
  const Mat Linv = Mat(llt.matrixL()).inverse();
  std::vector<Mat> S;
  for (int i = 0; i < frame.cols(); ++i) {
    Mat s = Linv * second_fundamental_form(H, frame.col(i)) * Linv.transpose();
    S.push_back(0.5 * (s + s.transpose()));
  }
  return S;
}

}  // namespace

NormalCurvature max_normal_curvature(const Mat& J, const SecondDerivatives& H, const Mat& frame) {
  const auto S = shape_operators(J, H, frame);
  const int m = static_cast<int>(frame.cols());
  const int k = static_cast<int>(J.cols());
  if (m == 1) {
    Eigen::SelfAdjointEigenSolver<Mat> es(S[0], Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(k - 1);
    if (hi >= -lo) return {hi, frame.col(0)};
    return {-lo, -frame.col(0)};
  }
  auto combine = [&](const Vec& v) {
    Mat Sv = Mat::Zero(k, k);
    for (int i = 0; i < m; ++i) Sv += v(i) * S[static_cast<std::size_t>(i)];
    return Sv;
  };
  std::vector<Vec> starts;
  for (int i = 0; i < m; ++i) {
    starts.push_back(unit(m, i));
    for (int j = i + 1; j < m; ++j) {
      starts.push_back((unit(m, i) + unit(m, j)).normalized());
      starts.push_back((unit(m, i) - unit(m, j)).normalized());
    }
  }
  double best = -1.0;
  Vec best_v = unit(m, 0);
  for (Vec v : starts) {
    double value = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
      Eigen::SelfAdjointEigenSolver<Mat> es(combine(v));
      // the sign of v is free, so pick the eigenvalue of largest magnitude
      const double lo = es.eigenvalues()(0);
      const double hi = es.eigenvalues()(k - 1);
      Vec x = es.eigenvectors().col(hi >= -lo ? k - 1 : 0);
      if (hi < -lo) v = -v;
      const double next = std::max(hi, -lo);
      Vec a(m);
      for (int i = 0; i < m; ++i) a(i) = x.dot(S[static_cast<std::size_t>(i)] * x);
      if (a.norm() == 0.0) {
        value = next;
        break;
      }
      v = a.normalized();
      if (std::abs(next - value) <= 1e-15 * std::max(1.0, next)) {
        value = next;
        break;
      }
      value = next;
    }
    if (value > best) {
      best = value;
      best_v = v;
    }
  }
  // final evaluation at best_v so that magnitude matches direction exactly
  Eigen::SelfAdjointEigenSolver<Mat> es(combine(best_v), Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues()(k - 1);
  const double lo = es.eigenvalues()(0);
  Vec dir = frame * best_v;
  if (hi >= -lo) return {hi, dir};
  return {-lo, -dir};
}

CurvatureBound max_principal_curvature(const ChartAtlas& atlas, const SampleGrid& grid) {
  if (grid.total_nodes() == 0) throw std::invalid_argument("empty sample grid");
  CurvatureBound out;
  bool any = false;
  for (const NodeRef& n : grid.nodes()) {
    const auto& lat = grid.lattice(n.chart);
    if (lat.near_boundary(n.index)) {
      ++out.excluded_nodes;
      continue;
    }
    const Chart& chart = atlas.chart(n.chart);
    const Vec p = lat.node(n.index);
    Mat J;
    Mat frame;
    try {
      J = chart.jacobian(p);
      frame = normal_frame(J, chart.point(p)).basis;
    } catch (const ImmersionError& e) {
      throw ImmersionError(e.what(), p);
    }
    const NormalCurvature c = max_normal_curvature(J, chart.hessian(p), frame);
    if (!any || c.magnitude > out.K) {
      out.K = c.magnitude;
      out.where = n;
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("every grid node is excluded");
  return out;
}

double model_spacing(const ChartAtlas& atlas, const SampleGrid& grid) {
  double s = 0.0;
  for (const NodeRef& n : grid.nodes()) {
    const auto& lat = grid.lattice(n.chart);
    const Vec m0 = atlas.model_point(n.chart, lat.node(n.index));
    for (int a = 0; a < lat.dim(); ++a) {
      if (auto nb = lat.neighbor(n.index, a, 1)) {
        s = std::max(s, (atlas.model_point(n.chart, lat.node(*nb)) - m0).norm());
      }
    }
  }
  return s;
}

double ambient_spacing(const ChartAtlas& atlas, const SampleGrid& grid) {
  double s = 0.0;
  for (const NodeRef& n : grid.nodes()) {
    const auto& lat = grid.lattice(n.chart);
    const Vec x0 = atlas.chart(n.chart).point(lat.node(n.index));
    for (int a = 0; a < lat.dim(); ++a) {
      if (auto nb = lat.neighbor(n.index, a, 1)) {
        s = std::max(s, (atlas.chart(n.chart).point(lat.node(*nb)) - x0).norm());
      }
    }
  }
  return s;
}

namespace {

struct Refined {
  Vec param;
  double distance = 0.0;
  bool hit_boundary = false;
};

// Damped Newton on f(p) = |phi(p) - y|^2 / 2, projected onto the chart box.
Refined refine_foot(const Chart& chart, const Vec& start, const Vec& y) {
  const ChartDomain& dom = chart.domain();
  const int k = chart.dim();
  auto objective = [&](const Vec& p) { return 0.5 * (chart.point(p) - y).squaredNorm(); };
  auto project = [&](Vec p, bool& clamped_boundary) {
    p = dom.wrap(p);
    for (int a = 0; a < k; ++a) {
      const Axis& ax = dom.axes[static_cast<std::size_t>(a)];
      if (ax.kind == AxisKind::periodic) continue;
      if (p(a) < ax.lower || p(a) > ax.upper) {
        p(a) = std::clamp(p(a), ax.lower, ax.upper);
        if (ax.kind == AxisKind::boundary) clamped_boundary = true;
      }
    }
    return p;
  };
  Vec p = start;
  double f = objective(p);
  bool hit = false;
  for (int it = 0; it < 100; ++it) {
    const Vec r = chart.point(p) - y;
    const Mat J = chart.jacobian(p);
    const Vec grad = J.transpose() * r;
    Mat A = J.transpose() * J;
    const SecondDerivatives H = chart.hessian(p);
    Mat full = A;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) full(i, j) += r.dot(H(i, j));
    }
    Eigen::LLT<Mat> llt(full);
    Vec step;
    if (llt.info() == Eigen::Success) {
      step = -llt.solve(grad);
    } else {
      const double mu = 1e-8 * std::max(1.0, A.trace());
      step = -(A + mu * Mat::Identity(k, k)).ldlt().solve(grad);
    }
    double alpha = 1.0;
    bool improved = false;
    bool clamped = false;
    Vec trial;
    double ft = f;
    for (int ls = 0; ls < 40; ++ls) {
      clamped = false;
      trial = project(p + alpha * step, clamped);
      ft = objective(trial);
      if (ft <= f) {
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
    const double moved = (trial - p).norm();
    p = trial;
    hit = clamped;
    const double df = f - ft;
    f = ft;
    if (moved <= 1e-15 * std::max(1.0, p.norm()) || (df <= 1e-300 && moved < 1e-12)) break;
  }
  return {p, std::sqrt(2.0 * f), hit};
}

}  // namespace

NearestPoint nearest_point(const ChartAtlas& atlas, const SampleGrid& grid, const Vec& y,
                           double tie_tolerance) {
  if (grid.total_nodes() == 0) throw std::invalid_argument("empty sample grid");
  const auto nodes = grid.nodes();
  std::vector<double> dist(nodes.size());
  std::vector<Vec> model(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Vec p = grid.param(nodes[i]);
    dist[i] = (atlas.chart(nodes[i].chart).point(p) - y).norm();
    model[i] = atlas.model_point(nodes[i].chart, p);
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
  const double h_amb = ambient_spacing(atlas, grid);
  const double h_model = model_spacing(atlas, grid);
  const double slack = 2.0 * h_amb;

  // Refine the best node of every chart that is competitive with the global best.
  std::vector<std::size_t> per_chart(atlas.size(), nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& b = per_chart[nodes[i].chart];
    if (b == nodes.size() || dist[i] < dist[b]) b = i;
  }
  NearestPoint out;
  out.distance = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < atlas.size(); ++c) {
    const std::size_t i = per_chart[c];
    if (i == nodes.size() || dist[i] > dist[best] + slack) continue;
    const Chart& chart = atlas.chart(c);
    Refined r = refine_foot(chart, grid.param(nodes[i]), y);
    NearestPoint cand;
    cand.chart = c;
    if (r.hit_boundary) {
      cand.param = grid.param(nodes[i]);
      cand.distance = dist[i];
      cand.diverged = true;
    } else {
      cand.param = r.param;
      cand.distance = r.distance;
    }
    cand.point = chart.point(cand.param);
    if (cand.distance < out.distance) out = cand;
  }

  // Near-tie test: refine coarse local minima well separated from the optimum.
  const Vec m_opt = atlas.model_point(out.chart, out.param);
  const double sep = 4.0 * h_model;
  const double tol = tie_tolerance * std::max(1.0, out.distance);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (dist[i] > out.distance + slack) continue;
    if ((model[i] - m_opt).norm() <= sep) continue;
    const auto& lat = grid.lattice(nodes[i].chart);
    bool local_min = true;
    for (int a = 0; a < lat.dim() && local_min; ++a) {
      for (int off : {-1, 1}) {
        if (auto nb = lat.neighbor(nodes[i].index, a, off)) {
          const std::size_t j = i - nodes[i].index + *nb;
          if (dist[j] < dist[i]) local_min = false;
        }
      }
    }
    if (local_min) candidates.push_back(i);
  }
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  });
  if (candidates.size() > 8) candidates.resize(8);
  for (std::size_t i : candidates) {
    const Chart& chart = atlas.chart(nodes[i].chart);
    Refined r = refine_foot(chart, grid.param(nodes[i]), y);
    const Vec m_r = atlas.model_point(nodes[i].chart, r.param);
    if ((m_r - m_opt).norm() > 0.5 * sep && std::abs(r.distance - out.distance) <= tol) {
      out.tie = true;
      break;
    }
  }
  return out;
}

OverlapReport check_overlap_consistency(const ChartAtlas& atlas, const SampleGrid& grid, double tol) {
  const auto nodes = grid.nodes();
  std::vector<Vec> model(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) model[i] = atlas.model_point(nodes[i].chart, grid.param(nodes[i]));
  OverlapReport out;
  detail::for_each_close_pair(model, tol, [&](std::size_t i, std::size_t j, double) {
    if (nodes[i].chart == nodes[j].chart) return;
    const Chart& ci = atlas.chart(nodes[i].chart);
    const Chart& cj = atlas.chart(nodes[j].chart);
    const Vec pi = grid.param(nodes[i]);
    const Vec pj = grid.param(nodes[j]);
    if ((ci.point(pi) - cj.point(pj)).norm() > tol * std::max(1.0, ci.point(pi).norm())) return;
    const Mat Qi = tangent_basis(ci.jacobian(pi));
    const Mat Qj = tangent_basis(cj.jacobian(pj));
    Eigen::JacobiSVD<Mat> svd(Qi.transpose() * Qj);
    const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
    out.max_angle = std::max(out.max_angle, std::acos(c));
    ++out.pairs_checked;
  });
  return out;
}

}  // namespace embedflow

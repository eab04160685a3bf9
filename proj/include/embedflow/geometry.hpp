#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace embedflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The chart Jacobian lost rank (or the metric is not positive definite).
class ImmersionError : public GeometryError {
 public:
  ImmersionError(const std::string& what, Vec where)
      : GeometryError(what), where_(std::move(where)) {}
  const Vec& where() const { return where_; }

 private:
  Vec where_;
};

/// Second derivatives of an R^N valued map of k parameters.
/// Entry (i, j) is the vector d^2 x / dq^i dq^j.
class SecondDerivatives {
 public:
  SecondDerivatives() = default;
  SecondDerivatives(int k, int n) : k_(k), d_(static_cast<std::size_t>(k * k), Vec::Zero(n)) {}

  int dim() const { return k_; }
  Vec& operator()(int i, int j) { return d_[static_cast<std::size_t>(i * k_ + j)]; }
  const Vec& operator()(int i, int j) const { return d_[static_cast<std::size_t>(i * k_ + j)]; }

 private:
  int k_ = 0;
  std::vector<Vec> d_;
};

/// First and (optionally) second parameter derivatives of a vector field
/// attached to a chart. `second` is row-major k x k.
struct FieldDerivatives {
  std::vector<Vec> first;
  std::vector<Vec> second;
  const Vec& d2(int i, int j, int k) const { return second[static_cast<std::size_t>(i * k + j)]; }
};

using FieldFn = std::function<Vec(const Vec&)>;

enum class AxisKind {
  periodic,  // wraps; no endpoint node duplicated
  boundary,  // a true boundary of M
  seam,      // closed interval whose ends are covered by a neighbouring chart
};

struct Axis {
  double lower = 0.0;
  double upper = 1.0;
  AxisKind kind = AxisKind::boundary;

  double length() const { return upper - lower; }
};

struct ChartDomain {
  std::vector<Axis> axes;

  int dim() const { return static_cast<int>(axes.size()); }
  /// Periodic coordinates reduced into [lower, upper).
  Vec wrap(const Vec& p) const;
  bool contains(const Vec& p, double slack = 0.0) const;
};

enum class DerivativeMode { analytic, finite_difference };

/// A parametrized piece of the embedding phi restricted to one chart of M.
class Chart {
 public:
  Chart(ChartDomain domain, int ambient_dim) : domain_(std::move(domain)), ambient_(ambient_dim) {}
  virtual ~Chart() = default;

  virtual Vec point(const Vec& p) const = 0;
  virtual Mat jacobian(const Vec& p) const = 0;
  virtual SecondDerivatives hessian(const Vec& p) const = 0;

  /// Derivatives of `field` around p, using the same differencing this chart
  /// uses for its own derivatives. The default is central differences with
  /// step `step_scale * fd_step()`.
  virtual FieldDerivatives differentiate(const Vec& p, const FieldFn& field, bool second_order,
                                         double step_scale = 1.0) const;

  /// True when derivatives are only available on a fixed lattice.
  virtual bool lattice_only() const { return false; }

  const ChartDomain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  int ambient_dim() const { return ambient_; }
  double fd_step() const { return fd_step_; }
  void set_fd_step(double h) { fd_step_ = h; }

 private:
  ChartDomain domain_;
  int ambient_;
  double fd_step_ = 1e-4;
};

/// Closures describing a parametrized chart. `jacobian`/`hessian` may be
/// empty, in which case finite differences of `map` are used.
struct ChartFunctions {
  std::function<Vec(const Vec&)> map;
  std::function<Mat(const Vec&)> jacobian;
  std::function<SecondDerivatives(const Vec&)> hessian;
};

class ParametricChart final : public Chart {
 public:
  ParametricChart(ChartDomain domain, int ambient_dim, ChartFunctions fns,
                  DerivativeMode mode = DerivativeMode::analytic, double h = 1e-4);

  Vec point(const Vec& p) const override;
  Mat jacobian(const Vec& p) const override;
  SecondDerivatives hessian(const Vec& p) const override;

  DerivativeMode mode() const { return mode_; }
  const ChartFunctions& functions() const { return fns_; }

 private:
  ChartFunctions fns_;
  DerivativeMode mode_;
};

Mat fd_jacobian(const std::function<Vec(const Vec&)>& map, const Vec& p, double h);
SecondDerivatives fd_hessian(const std::function<Vec(const Vec&)>& map, const Vec& p, double h);

/// Maps (chart index, parameter) to a point of a fixed reference model of M.
/// Distances in the model stand in for the intrinsic separation of two
/// points of M; they do not change when phi is deformed.
using ManifoldModel = std::function<Vec(std::size_t, const Vec&)>;

class ChartAtlas {
 public:
  ChartAtlas(std::string name, std::vector<std::shared_ptr<const Chart>> charts, ManifoldModel model);

  const std::string& name() const { return name_; }
  std::size_t size() const { return charts_.size(); }
  const Chart& chart(std::size_t i) const { return *charts_.at(i); }
  std::shared_ptr<const Chart> chart_ptr(std::size_t i) const { return charts_.at(i); }
  int dim() const { return k_; }
  int ambient_dim() const { return n_; }
  int codim() const { return n_ - k_; }
  Vec model_point(std::size_t chart, const Vec& p) const { return model_(chart, p); }
  const ManifoldModel& model() const { return model_; }

 private:
  std::string name_;
  std::vector<std::shared_ptr<const Chart>> charts_;
  ManifoldModel model_;
  int k_ = 0;
  int n_ = 0;
};

/// Regular lattice along one chart axis. Periodic axes carry `intervals`
/// nodes with trapezoid weights; closed axes carry `intervals + 1` nodes with
/// composite Simpson weights (intervals is kept even).
class AxisLattice {
 public:
  AxisLattice(Axis axis, int intervals);

  const Axis& axis() const { return axis_; }
  int intervals() const { return intervals_; }
  int nodes() const { return axis_.kind == AxisKind::periodic ? intervals_ : intervals_ + 1; }
  double spacing() const { return axis_.length() / intervals_; }
  double node(int i) const { return axis_.lower + spacing() * i; }
  double weight(int i) const;
  bool periodic() const { return axis_.kind == AxisKind::periodic; }
  /// Within one lattice spacing of a true boundary of M.
  bool near_boundary(int i) const;

 private:
  Axis axis_;
  int intervals_;
};

class ChartLattice {
 public:
  explicit ChartLattice(std::vector<AxisLattice> axes);

  int dim() const { return static_cast<int>(axes_.size()); }
  const AxisLattice& axis(int a) const { return axes_.at(static_cast<std::size_t>(a)); }
  std::size_t size() const { return size_; }

  std::vector<int> unflatten(std::size_t flat) const;
  std::size_t flatten(const std::vector<int>& idx) const;
  Vec node(std::size_t flat) const;
  double weight(std::size_t flat) const;
  bool near_boundary(std::size_t flat) const;
  /// Neighbour `offset` steps along axis `a`, wrapping periodic axes;
  /// nullopt when it falls off a closed axis.
  std::optional<std::size_t> neighbor(std::size_t flat, int a, int offset) const;
  /// Lattice index of p if p is a node (within tol in units of spacing).
  std::optional<std::size_t> locate(const Vec& p, double tol = 1e-7) const;

 private:
  std::vector<AxisLattice> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
};

struct NodeRef {
  std::size_t chart = 0;
  std::size_t index = 0;
  bool operator==(const NodeRef&) const = default;
};

/// Per-chart regular lattices of parameter points.
class SampleGrid {
 public:
  SampleGrid() = default;
  explicit SampleGrid(std::vector<ChartLattice> lattices) : lattices_(std::move(lattices)) {}

  /// `resolution` intervals on every axis of every chart.
  static SampleGrid uniform(const ChartAtlas& atlas, int resolution);

  std::size_t charts() const { return lattices_.size(); }
  const ChartLattice& lattice(std::size_t c) const { return lattices_.at(c); }
  std::size_t total_nodes() const;
  std::vector<NodeRef> nodes() const;
  Vec param(const NodeRef& n) const { return lattice(n.chart).node(n.index); }

  /// Doubles every axis resolution; the old nodes are a subset of the new.
  SampleGrid refined() const;

 private:
  std::vector<ChartLattice> lattices_;
};

struct NormalFrame {
  Vec base_point;
  Mat basis;                      // N x (N - k), orthonormal columns
  std::vector<int> multi_index;   // zero based, increasing
};

/// Orthonormal basis of the column space of J (N x k). Throws ImmersionError
/// if J is rank deficient.
Mat tangent_basis(const Mat& J);

/// Frame from the projections of e_I into the normal space, Gram-Schmidt
/// orthonormalized in index order. nullopt when the projections are not
/// independent (smallest singular value <= independence_tol).
std::optional<Mat> frame_for_index(const Mat& J, const std::vector<int>& index,
                                   double independence_tol = 1e-8);

/// Lexicographically smallest multi-index whose projections span the normal space.
NormalFrame normal_frame(const Mat& J, const Vec& base_point);
NormalFrame normal_frame(const Chart& chart, const Vec& p);

Mat first_fundamental_form(const Chart& chart, const Vec& p);
Mat second_fundamental_form(const Chart& chart, const Vec& p, const Vec& v);
Mat second_fundamental_form(const SecondDerivatives& H, const Vec& v);

/// Eigenvalues of g^{-1/2} II_v g^{-1/2}, sorted descending.
std::vector<double> principal_curvatures(const Mat& g, const Mat& II);
std::vector<double> principal_curvatures(const Chart& chart, const Vec& p, const Vec& v);

struct NormalCurvature {
  double magnitude = 0.0;  // max over unit normals of |p_i(q, v)|
  Vec direction;           // unit normal attaining it, with p_max(direction) = +magnitude
};

/// max |p_i(q, v)| over unit normals v at one point. Exact in codimension one;
/// in higher codimension a multi-start alternating ascent over the normal sphere.
NormalCurvature max_normal_curvature(const Mat& J, const SecondDerivatives& H, const Mat& frame);

struct CurvatureBound {
  double K = 0.0;
  NodeRef where;
  std::size_t excluded_nodes = 0;
};

CurvatureBound max_principal_curvature(const ChartAtlas& atlas, const SampleGrid& grid);

struct NearestPoint {
  std::size_t chart = 0;
  Vec param;
  Vec point;
  double distance = 0.0;
  bool tie = false;        // a separated second candidate is within tie tolerance
  bool diverged = false;   // refinement left the chart; coarse minimizer returned
};

NearestPoint nearest_point(const ChartAtlas& atlas, const SampleGrid& grid, const Vec& y,
                           double tie_tolerance = 1e-6);

/// Largest model-space distance between lattice neighbours.
double model_spacing(const ChartAtlas& atlas, const SampleGrid& grid);

/// Largest ambient distance between the images of lattice neighbours.
double ambient_spacing(const ChartAtlas& atlas, const SampleGrid& grid);

struct OverlapReport {
  std::size_t pairs_checked = 0;
  double max_angle = 0.0;  // radians, largest principal angle between tangent spaces
};

/// Compares tangent spaces at nodes of different charts that represent the
/// same point of M (model distance and ambient distance below `tol`).
OverlapReport check_overlap_consistency(const ChartAtlas& atlas, const SampleGrid& grid,
                                        double tol = 1e-9);

}  // namespace embedflow

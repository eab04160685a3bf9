#pragma once

#include <vector>

#include "embedflow/geometry.hpp"

namespace embedflow {

/// A chart known only through its values on a regular lattice. At lattice
/// nodes derivatives are fourth-order finite differences on the lattice
/// (central five-point stencils, shifted six-node windows at closed ends,
/// tensor products for mixed derivatives). Between nodes a tensor four-point
/// Lagrange interpolant is used; that is only meant for nearest-point search.
class SampledChart final : public Chart {
 public:
  SampledChart(ChartDomain domain, int ambient_dim, ChartLattice lattice, std::vector<Vec> values);

  Vec point(const Vec& p) const override;
  Mat jacobian(const Vec& p) const override;
  SecondDerivatives hessian(const Vec& p) const override;
  /// p must be a lattice node; `field` is evaluated at lattice nodes only.
  FieldDerivatives differentiate(const Vec& p, const FieldFn& field, bool second_order,
                                 double step_scale = 1.0) const override;
  bool lattice_only() const override { return true; }

  const ChartLattice& lattice() const { return lattice_; }
  const std::vector<Vec>& values() const { return values_; }

 private:
  struct Stencil {
    std::vector<std::size_t> index;   // lattice index along the axis
    std::vector<double> w[3];         // weights for derivative order 0, 1, 2
  };
  std::vector<Stencil> stencils(const Vec& p, bool require_node) const;
  template <class Value>
  Vec combine(const std::vector<Stencil>& st, const std::vector<int>& order, const Value& value) const;

  ChartLattice lattice_;
  std::vector<Vec> values_;
};

/// Finite-difference weights (Fornberg) at z for derivative orders 0..m on
/// the nodes x. Result[d][j] multiplies f(x[j]) for the d-th derivative.
std::vector<std::vector<double>> fornberg_weights(double z, const std::vector<double>& x, int m);

/// Samples every chart of `atlas` on the matching lattice of `grid`.
ChartAtlas sample_atlas(const ChartAtlas& atlas, const SampleGrid& grid);

/// Per-node ambient values of `atlas` on `grid`, in grid.nodes() order.
std::vector<Vec> node_values(const ChartAtlas& atlas, const SampleGrid& grid);

/// The sampled atlas with node values phi + t * field (field in grid.nodes() order).
ChartAtlas displace(const ChartAtlas& atlas, const SampleGrid& grid, const std::vector<Vec>& field,
                    double t);

/// Sampled atlas built from explicit node values (grid.nodes() order).
ChartAtlas atlas_from_values(const ChartAtlas& like, const SampleGrid& grid,
                             const std::vector<Vec>& values);

}  // namespace embedflow

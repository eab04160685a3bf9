#include "embedflow/sampled_chart.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace embedflow {

std::vector<std::vector<double>> fornberg_weights(double z, const std::vector<double>& x, int m) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(static_cast<std::size_t>(m + 1),
                                     std::vector<double>(x.size(), 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[static_cast<std::size_t>(i)] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        }
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

SampledChart::SampledChart(ChartDomain domain, int ambient_dim, ChartLattice lattice,
                           std::vector<Vec> values)
    : Chart(std::move(domain), ambient_dim), lattice_(std::move(lattice)), values_(std::move(values)) {
  if (lattice_.dim() != dim()) throw std::invalid_argument("lattice dimension does not match chart");
  if (values_.size() != lattice_.size()) throw std::invalid_argument("one value per lattice node required");
  for (int a = 0; a < dim(); ++a) {
    if (lattice_.axis(a).nodes() < 6) throw std::invalid_argument("sampled charts need at least 6 nodes per axis");
  }
}

std::vector<SampledChart::Stencil> SampledChart::stencils(const Vec& p, bool require_node) const {
  std::vector<Stencil> out(static_cast<std::size_t>(dim()));
  for (int a = 0; a < dim(); ++a) {
    const AxisLattice& ax = lattice_.axis(a);
    const int nodes = ax.nodes();
    const double h = ax.spacing();
    double s = (p(a) - ax.axis().lower) / h;
    if (ax.periodic()) {
      s = std::fmod(s, static_cast<double>(nodes));
      if (s < 0.0) s += nodes;
    }
    const double r = std::round(s);
    const bool on_node = std::abs(s - r) < 1e-7;
    if (require_node && !on_node) {
      throw GeometryError("sampled chart derivatives exist only at lattice nodes");
    }
    std::vector<int> js;
    if (on_node) {
      const int i = static_cast<int>(r);
      int first = i - 2;
      int count = 5;
      if (!ax.periodic()) {
        const int last = nodes - 1;
        if (i < 2) {
          first = 0;
          count = 6;
        } else if (i > last - 2) {
          first = last - 5;
          count = 6;
        }
      }
      for (int j = 0; j < count; ++j) js.push_back(first + j);
    } else {
      int first = static_cast<int>(std::floor(s)) - 1;
      if (!ax.periodic()) first = std::clamp(first, 0, nodes - 4);
      for (int j = 0; j < 4; ++j) js.push_back(first + j);
    }
    std::vector<double> x;
    for (int j : js) x.push_back((j - (on_node ? r : s)) * h);
    auto w = fornberg_weights(0.0, x, 2);
    Stencil& st = out[static_cast<std::size_t>(a)];
    for (int j : js) {
      const int idx = ax.periodic() ? ((j % nodes) + nodes) % nodes : j;
      st.index.push_back(static_cast<std::size_t>(idx));
    }
    for (int d = 0; d < 3; ++d) st.w[d] = w[static_cast<std::size_t>(d)];
    if (on_node) {
      for (std::size_t j = 0; j < js.size(); ++j) st.w[0][j] = (js[j] == static_cast<int>(r)) ? 1.0 : 0.0;
    }
  }
  return out;
}

template <class Value>
Vec SampledChart::combine(const std::vector<Stencil>& st, const std::vector<int>& order,
                          const Value& value) const {
  const int k = dim();
  Vec acc;
  std::vector<std::size_t> pos(static_cast<std::size_t>(k), 0);
  std::vector<int> idx(static_cast<std::size_t>(k));
  while (true) {
    double w = 1.0;
    for (int a = 0; a < k && w != 0.0; ++a) {
      const std::size_t aa = static_cast<std::size_t>(a);
      w *= st[aa].w[order[aa]][pos[aa]];
      idx[aa] = static_cast<int>(st[aa].index[pos[aa]]);
    }
    if (w != 0.0) {
      const Vec& v = value(lattice_.flatten(idx));
      if (acc.size() == 0) acc = Vec::Zero(v.size());
      acc += w * v;
    }
    int a = k - 1;
    while (a >= 0) {
      const std::size_t aa = static_cast<std::size_t>(a);
      if (++pos[aa] < st[aa].index.size()) break;
      pos[aa] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return acc;
}

Vec SampledChart::point(const Vec& p) const {
  if (auto flat = lattice_.locate(p)) return values_[*flat];
  const auto st = stencils(p, false);
  return combine(st, std::vector<int>(static_cast<std::size_t>(dim()), 0),
                 [&](std::size_t f) -> const Vec& { return values_[f]; });
}

Mat SampledChart::jacobian(const Vec& p) const {
  const auto st = stencils(p, false);
  Mat J(ambient_dim(), dim());
  for (int a = 0; a < dim(); ++a) {
    std::vector<int> order(static_cast<std::size_t>(dim()), 0);
    order[static_cast<std::size_t>(a)] = 1;
    J.col(a) = combine(st, order, [&](std::size_t f) -> const Vec& { return values_[f]; });
  }
  return J;
}

SecondDerivatives SampledChart::hessian(const Vec& p) const {
  const auto st = stencils(p, false);
  SecondDerivatives H(dim(), ambient_dim());
  for (int a = 0; a < dim(); ++a) {
    for (int b = a; b < dim(); ++b) {
      std::vector<int> order(static_cast<std::size_t>(dim()), 0);
      order[static_cast<std::size_t>(a)] += 1;
      order[static_cast<std::size_t>(b)] += 1;
      H(a, b) = combine(st, order, [&](std::size_t f) -> const Vec& { return values_[f]; });
      H(b, a) = H(a, b);
    }
  }
  return H;
}

FieldDerivatives SampledChart::differentiate(const Vec& p, const FieldFn& field, bool second_order,
                                             double) const {
  const auto st = stencils(p, true);
  std::map<std::size_t, Vec> cache;
  auto value = [&](std::size_t f) -> const Vec& {
    auto it = cache.find(f);
    if (it == cache.end()) it = cache.emplace(f, field(lattice_.node(f))).first;
    return it->second;
  };
  const int k = dim();
  FieldDerivatives out;
  for (int a = 0; a < k; ++a) {
    std::vector<int> order(static_cast<std::size_t>(k), 0);
    order[static_cast<std::size_t>(a)] = 1;
    out.first.push_back(combine(st, order, value));
  }
  if (second_order) {
    out.second.assign(static_cast<std::size_t>(k * k), Vec());
    for (int a = 0; a < k; ++a) {
      for (int b = a; b < k; ++b) {
        std::vector<int> order(static_cast<std::size_t>(k), 0);
        order[static_cast<std::size_t>(a)] += 1;
        order[static_cast<std::size_t>(b)] += 1;
        Vec d = combine(st, order, value);
        out.second[static_cast<std::size_t>(a * k + b)] = d;
        out.second[static_cast<std::size_t>(b * k + a)] = d;
      }
    }
  }
  return out;
}

std::vector<Vec> node_values(const ChartAtlas& atlas, const SampleGrid& grid) {
  std::vector<Vec> out;
  out.reserve(grid.total_nodes());
  for (const NodeRef& n : grid.nodes()) out.push_back(atlas.chart(n.chart).point(grid.param(n)));
  return out;
}

ChartAtlas atlas_from_values(const ChartAtlas& like, const SampleGrid& grid,
                             const std::vector<Vec>& values) {
  if (values.size() != grid.total_nodes()) throw std::invalid_argument("one value per grid node required");
  if (grid.charts() != like.size()) throw std::invalid_argument("grid does not match atlas");
  std::vector<std::shared_ptr<const Chart>> charts;
  std::size_t offset = 0;
  for (std::size_t c = 0; c < like.size(); ++c) {
    const ChartLattice& lat = grid.lattice(c);
    std::vector<Vec> vals(values.begin() + static_cast<std::ptrdiff_t>(offset),
                          values.begin() + static_cast<std::ptrdiff_t>(offset + lat.size()));
    offset += lat.size();
    auto chart = std::make_shared<SampledChart>(like.chart(c).domain(), like.ambient_dim(), lat, std::move(vals));
    chart->set_fd_step(like.chart(c).fd_step());
    charts.push_back(std::move(chart));
  }
  return ChartAtlas(like.name(), std::move(charts), like.model());
}

ChartAtlas sample_atlas(const ChartAtlas& atlas, const SampleGrid& grid) {
  return atlas_from_values(atlas, grid, node_values(atlas, grid));
}

ChartAtlas displace(const ChartAtlas& atlas, const SampleGrid& grid, const std::vector<Vec>& field,
                    double t) {
  if (field.size() != grid.total_nodes()) throw std::invalid_argument("one field vector per grid node required");
  std::vector<Vec> values = node_values(atlas, grid);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += t * field[i];
  return atlas_from_values(atlas, grid, values);
}

}  // namespace embedflow

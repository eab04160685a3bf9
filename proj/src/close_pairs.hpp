#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace embedflow::detail {

/// Calls visit(i, j, distance) with i < j for every unordered pair of points
/// closer than `radius`. Points are bucketed in a hash of cubic cells of side
/// `radius`, so only the 3^d neighbouring cells are scanned. Above six
/// dimensions this degrades to a sweep along the first coordinate. Visiting
/// order depends only on the input.
template <class Visit>
void for_each_close_pair(const std::vector<Eigen::VectorXd>& points, double radius, Visit&& visit) {
  const std::size_t n = points.size();
  if (n < 2 || !(radius > 0.0)) return;
  const int d = static_cast<int>(points[0].size());
  const double r2 = radius * radius;

  if (d > 6) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (points[a](0) != points[b](0)) return points[a](0) < points[b](0);
      return a < b;
    });
    for (std::size_t ii = 0; ii < n; ++ii) {
      const std::size_t i = order[ii];
      for (std::size_t jj = ii + 1; jj < n; ++jj) {
        const std::size_t j = order[jj];
        if (points[j](0) - points[i](0) >= radius) break;
        const double d2 = (points[i] - points[j]).squaredNorm();
        if (d2 < r2) visit(std::min(i, j), std::max(i, j), std::sqrt(d2));
      }
    }
    return;
  }

  auto cell_of = [&](const Eigen::VectorXd& p) {
    std::vector<std::int64_t> c(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) c[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(std::floor(p(a) / radius));
    return c;
  };
  auto key_of = [](const std::vector<std::int64_t>& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t x : c) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 1099511628211ull;
    }
    return h;
  };
  std::vector<std::vector<std::int64_t>> cells(n);
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < n; ++i) {
    cells[i] = cell_of(points[i]);
    buckets[key_of(cells[i])].push_back(i);
  }

  std::vector<std::int64_t> probe(static_cast<std::size_t>(d));
  std::vector<int> off(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(off.begin(), off.end(), -1);
    while (true) {
      for (int a = 0; a < d; ++a) probe[static_cast<std::size_t>(a)] = cells[i][static_cast<std::size_t>(a)] + off[static_cast<std::size_t>(a)];
      auto it = buckets.find(key_of(probe));
      if (it != buckets.end()) {
        for (std::size_t j : it->second) {
          // Hash collisions can put a far cell in the same bucket; the
          // distance test below rejects those, and j > i avoids duplicates.
          if (j <= i || cells[j] != probe) continue;
          const double d2 = (points[i] - points[j]).squaredNorm();
          if (d2 < r2) visit(i, j, std::sqrt(d2));
        }
      }
      int a = 0;
      while (a < d && ++off[static_cast<std::size_t>(a)] > 1) off[static_cast<std::size_t>(a++)] = -1;
      if (a == d) break;
    }
  }
}

}  // namespace embedflow::detail

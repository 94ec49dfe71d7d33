#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mfc {

// Uniform 1D grid with n nodes spanning [lo, hi] inclusive.
struct Grid1D {
  double lo = 0.0;
  double hi = 1.0;
  int n = 2;

  Grid1D() = default;
  Grid1D(double lo_, double hi_, int n_) : lo(lo_), hi(hi_), n(n_) {
    if (!(lo < hi)) throw std::invalid_argument("Grid1D: requires lo < hi");
    if (n < 2) throw std::invalid_argument("Grid1D: requires at least 2 nodes");
  }

  double spacing() const { return (hi - lo) / (n - 1); }
  double node(int i) const { return lo + spacing() * i; }

  std::vector<double> nodes() const {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = node(i);
    return xs;
  }

  // Index of the nearest node; x outside [lo, hi] clamps to the end node.
  int nearest(double x) const {
    if (x <= lo) return 0;
    if (x >= hi) return n - 1;
    return static_cast<int>(std::lround((x - lo) / spacing()));
  }

  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Trapezoid weight of node i: h for interior nodes, h/2 at the ends.
inline double trapezoid_weight(const Grid1D& g, int i) {
  const double h = g.spacing();
  return (i == 0 || i == g.n - 1) ? 0.5 * h : h;
}

inline double trapezoid_sum(const Grid1D& g, const std::vector<double>& values) {
  if (static_cast<int>(values.size()) != g.n)
    throw std::invalid_argument("trapezoid_sum: value count must match grid");
  double acc = 0.5 * (values.front() + values.back());
  for (int i = 1; i + 1 < g.n; ++i) acc += values[i];
  return acc * g.spacing();
}

}  // namespace mfc

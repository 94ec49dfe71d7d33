#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "mfclab/grid.hpp"

namespace mfc {

// Density values at the nodes of a uniform grid; the measure is the piecewise
// linear interpolant, so trapezoidal sums are its exact integrals.  Mass must
// be 1 within 1e-9.
struct DiscreteDensity {
  Grid1D grid;
  std::vector<double> weights;

  DiscreteDensity() = default;
  DiscreteDensity(Grid1D g, std::vector<double> w);

  // Normalizes nonnegative weights to unit trapezoidal mass.
  static DiscreteDensity normalized(Grid1D g, std::vector<double> w);
  static DiscreteDensity gaussian(Grid1D g, double mean, double variance);

  double mass() const { return trapezoid_sum(grid, weights); }
  // Piecewise linear interpolant; zero outside the grid.
  double density_at(double x) const;
};

// n points in R^d, each carrying mass 1/n.  Row-major storage.
struct EmpiricalMeasure {
  int dim = 1;
  std::vector<double> points;

  EmpiricalMeasure() = default;
  EmpiricalMeasure(int d, std::vector<double> pts);
  static EmpiricalMeasure from_1d(std::vector<double> xs);

  int size() const { return static_cast<int>(points.size()) / dim; }
  std::span<const double> point(int i) const { return {points.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  double at1d(int i) const { return points[i]; }
};

// Equal-weight mixture of Gaussians with shared isotropic covariance
// scale * I, centers translated by a common drift offset.  scale is a
// variance; scale == 0 degenerates to the empirical measure of the shifted
// centers.
struct GaussianMixture {
  int dim = 1;
  std::vector<double> centers;
  double scale = 0.0;
  std::vector<double> offset;

  GaussianMixture() = default;
  GaussianMixture(int d, std::vector<double> c, double scale_, std::vector<double> offset_);
  static GaussianMixture from_1d(std::vector<double> centers, double scale, double offset);

  int size() const { return static_cast<int>(centers.size()) / dim; }
  double center1d(int i) const { return centers[i] + offset[0]; }
  EmpiricalMeasure as_empirical() const;  // valid for any scale; drops the blur

  double density_at(double x) const;  // d = 1, scale > 0
  double cdf_at(double x) const;      // d = 1, scale > 0
};

using Measure = std::variant<DiscreteDensity, EmpiricalMeasure, GaussianMixture>;

int measure_dim(const Measure& m);

// --- standard normal helpers (double precision throughout) ---
double norm_pdf(double z);
double norm_cdf(double z);
// Inverse of norm_cdf; |p| in (0,1).  Acklam initializer plus Newton polish,
// accurate to ~2 ulp.
double norm_quantile(double p);
// A(z) = integral of norm_cdf from -inf to z = z*Phi(z) + phi(z).
double norm_cdf_antideriv(double z);

// --- 1D transport ---

// Exact Wasserstein-1 distance between two 1D measures via CDF integration.
// Atom/atom and atom/Gaussian pairs use closed forms; pairs with a density
// factor resolve CDF crossings to machine precision; mixture/mixture and
// mixture/density pairs use adaptive quadrature with relative error < 1e-8.
double w1_exact_1d(const Measure& a, const Measure& b);

// Optimal-assignment W1 between equal-size clouds in R^d (exact: sorting in
// d = 1, shortest augmenting path assignment otherwise).
double w1_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// p-th absolute moment, p >= 0.  Exact for empirical measures and for
// mixtures with p in {1, 2}; quadrature otherwise.
double moment(const Measure& m, double p);

// Mean of the linear statistic sum_c x_c (the coordinate sum).
double mean_coordinate_sum(const Measure& m);

// Image of m under x -> x + z.
Measure pushforward_shift(const Measure& m, std::span<const double> z);
Measure pushforward_shift(const Measure& m, double z);  // d = 1

// n iid draws; fully determined by (seed, stream).  Density sampling inverts
// the piecewise quadratic CDF cell by cell; mixtures draw a component index
// and then a Gaussian.
EmpiricalMeasure sample(const Measure& m, int n, std::uint64_t seed, std::uint64_t stream = 0);

// Exact integral of a piecewise linear function against m (d = 1).  The
// function interpolates (breakpoints[i], values[i]) and continues with its
// end values outside the breakpoint range.
double integrate_pwl(const Measure& m, std::span<const double> breakpoints,
                     std::span<const double> values);

}  // namespace mfc

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mfclab/measures.hpp"

namespace mfc {

using Vec = std::vector<double>;

// Hamiltonian and its Legendre-dual control cost, with closed-form
// derivatives.  growth_c and growth_C are the declared constants of the
// quadratic growth envelope; control_radius_R bounds |grad_p_h| over the
// gradient range solvers will feed it.
struct HamiltonianModel {
  std::function<double(std::span<const double> x, std::span<const double> p)> eval_h;
  std::function<Vec(std::span<const double> x, std::span<const double> p)> grad_p_h;
  std::function<Vec(std::span<const double> x, std::span<const double> p)> grad_x_h;
  std::function<double(std::span<const double> x, std::span<const double> a)> eval_l;
  std::function<Vec(std::span<const double> x, std::span<const double> a)> grad_a_l;
  double growth_c = 1.0;
  double growth_C = 1.0;
  double control_radius_R = 1.0;
};

// Mean-field running and terminal costs.  Flat derivatives follow the
// zero-mean convention: integrating them against their base measure gives 0.
// bound_* and lip_* are declared envelopes checked by sampling.
struct MeanFieldCost {
  std::function<double(const Measure&)> eval_f;
  std::function<double(const Measure&)> eval_g;
  std::function<double(const Measure&, std::span<const double> x)> flat_df;
  std::function<double(const Measure&, std::span<const double> x)> flat_dg;
  std::function<Vec(const Measure&, std::span<const double> x)> grad_m_f;
  std::function<Vec(const Measure&, std::span<const double> x)> grad_m_g;
  double bound_f = 0.0;
  double bound_g = 0.0;
  double lip_f = 0.0;
  double lip_g = 0.0;
};

// Control cost of the shape |a + drift(x)|^2/4 applied per coordinate, the
// form every catalog Hamiltonian has.  Solvers use it to minimize over
// controls in closed form instead of scanning a control grid.
struct QuadraticStructure {
  bool valid = false;
  std::function<double(double)> axis_drift;  // V(x_c) on one coordinate
};

// Costs that see the measure only through the mean of the coordinate sum.
// Powers the one-dimensional projection oracle and the direct mean-field
// minimization.
struct MeanOnlyCosts {
  bool valid = false;
  std::function<double(double)> g, dg;
  std::function<double(double)> f, df;
};

struct ModelConfig {
  int dim_d = 1;
  double horizon_T = 1.0;
  double common_noise_a0 = 0.0;
  HamiltonianModel hamiltonian;
  MeanFieldCost cost;
  std::string label;
  QuadraticStructure quad;
  MeanOnlyCosts mean_costs;
};

// Catalog: quadratic-mean, quadratic-drift, nonconvex-mean.  Recognized
// params (all optional): dim, horizon, a0, gain, f_gain, kappa,
// control_radius.  Unknown names or params throw.
ModelConfig builtin_model(const std::string& name,
                          const std::map<std::string, double>& params = {});

// Numerical sup_p [ -a.p - H(x,p) ] over a p-grid of p_steps points per axis
// in [-p_radius, p_radius]^d, refined around the maximizer until successive
// values differ by < 1e-8.  Throws if the maximizer sits on the grid
// boundary.
double legendre_transform(const HamiltonianModel& h, std::span<const double> x,
                          std::span<const double> a, double p_radius, int p_steps);

struct AssumptionCheck {
  std::string name;
  bool passed = false;
  double worst = 0.0;        // largest violation seen, 0 when clean
  std::string witness;       // sample realizing the worst violation
};

// Randomized verification of the standing assumptions: Legendre duality,
// growth envelope, gradient bounds, local convexity in p, closed-form
// derivative consistency, cost boundedness, flat-derivative normalization,
// and distance-Lipschitz continuity of the costs.  Failures are reported,
// not thrown; sample_count must be >= 100.
std::vector<AssumptionCheck> check_assumptions(const ModelConfig& cfg, int sample_count,
                                               std::uint64_t seed);

}  // namespace mfc

#pragma once

#include <cstdint>
#include <vector>

#include "mfclab/measures.hpp"

namespace mfc {

// Piecewise linear function through (breakpoints[i], values[i]), continued
// with its end values outside the breakpoint range.  Neighboring values must
// differ by at most the breakpoint gap (1-Lipschitz).
struct PiecewiseLinearLip {
  std::vector<double> breakpoints;
  std::vector<double> values;

  double operator()(double x) const;
};

// Throws unless breakpoints increase strictly and slopes stay within
// [-1, 1] + 1e-12.
void require_lipschitz(const PiecewiseLinearLip& phi);

// Taper extension: the function itself on [-R, R], scaled linearly down to 0
// on R <= |x| <= 2R, zero beyond.  The result is again piecewise linear and
// 1-Lipschitz provided |phi(+-R)| <= R.
PiecewiseLinearLip extend_tilde(const PiecewiseLinearLip& phi, double radius_R);

// Exact integral of the taper extension against a 1D measure.
double integrate_tapered(const PiecewiseLinearLip& phi, double radius_R,
                         const Measure& m);

// Net of 1-Lipschitz functions on [-R, R] with values in [-R, R]: breakpoints
// spaced by `step`, values on the step-grid, increments limited to
// {-step, 0, +step} and clamped.  `members` is materialized only while the
// enumeration stays small; `member_count` always counts the enumeration.
// Hand-assembled nets carry generated = false and any member list.
struct LipNet {
  double epsilon = 0.0;
  double radius_R = 0.0;
  double step = 0.0;
  int steps = 0;
  long long member_count = 0;
  bool generated = false;
  std::vector<PiecewiseLinearLip> members;
};

// Enumerated step-quantized net; an epsilon-cover of the 1-Lipschitz ball.
// Requires epsilon <= R and at most 24 steps.
LipNet build_net_1d(double epsilon, double radius_R);

// max over net members of the taper-extended integral against mu - nu.
// Always a lower bound for W1(mu, nu).  Generated nets are maximized exactly
// by dynamic programming over value levels, so the full enumeration never
// needs to be materialized; hand-assembled nets are scanned member by member.
double dual_lower_bound(const Measure& mu, const Measure& nu, const LipNet& net);

// Exceedance statistics of S = E[phi(Y_h)] - mean_k phi(Y^k_h) over
// independent trials of N drifted Brownian particles started at 0, where the
// expectation is under the exact Gaussian law at time h.  xs[j] carries
// log(#{S > xs[j]} / trials) in log_tail[j]; levels with no exceedances are
// dropped.
struct TailCurve {
  std::vector<double> xs;
  std::vector<double> log_tail;
  double statistic_mean = 0.0;
  double statistic_variance = 0.0;
  int trials = 0;
};

// Requires trials >= 10000 and a 1-Lipschitz phi.  Deterministic per seed:
// trial t draws from stream (seed, 1 + t).
TailCurve tail_experiment(const PiecewiseLinearLip& phi, int n_particles,
                          double h, double alpha, int trials,
                          std::uint64_t seed);

}  // namespace mfc

#pragma once

#include <cstdint>
#include <vector>

#include "mfclab/grid.hpp"
#include "mfclab/measures.hpp"
#include "mfclab/model.hpp"

namespace mfc {

// Feedback control on a space-time grid.  Slice n acts on [t_n, t_{n+1});
// |values| must stay within bound_R.
struct ControlField {
  Grid1D grid;
  int steps = 0;
  double horizon = 0.0;
  double bound_R = 0.0;
  std::vector<double> values;  // steps * grid.n, time-major

  double at(int n, int i) const { return values[static_cast<std::size_t>(n) * grid.n + i]; }
  double& at(int n, int i) { return values[static_cast<std::size_t>(n) * grid.n + i]; }
  static ControlField constant(Grid1D g, int steps, double horizon, double value, double bound);
};

// Density path under the controlled Fokker-Planck flow; steps+1 slices.
struct MFTrajectory {
  double dt = 0.0;
  std::vector<DiscreteDensity> slices;
};

struct MFCSolveOptions {
  int max_iters = 60;
  double tol = 1e-8;
  int steps = 0;  // 0: derived from the advection CFL bound
};

enum class MfcMethod { FixedPoint, Direct, Best };

struct MFCSolution {
  ControlField control;
  MFTrajectory trajectory;
  double value = 0.0;
  std::vector<double> adjoint;  // (steps+1) * grid.n; control slice n pairs with slice n+1
  bool converged = false;
  int iterations = 0;
};

// Conservative finite-volume solve of dm/dt = m'' - (m alpha)' with implicit
// diffusion and explicit upwind advection; zero-flux boundaries keep the
// node sum exact.  Throws when the advection CFL dt*max|alpha| <= h fails.
MFTrajectory solve_fp(const ControlField& alpha, const DiscreteDensity& m0);

// Left-endpoint time quadrature of running control and mean-field costs
// along the solve_fp trajectory, plus the terminal cost.
double mfc_cost(const ModelConfig& cfg, const ControlField& alpha, const DiscreteDensity& m0);

// Mean-field optimal control on m0's grid.  FixedPoint alternates backward
// Hamilton-Jacobi and forward Fokker-Planck solves with damped feedback
// updates; Direct runs projected adjoint descent on the control field; Best
// runs both.  Always returns the lowest-cost iterate seen, so the value is
// an upper bound on the infimum.
MFCSolution solve_mfc(const ModelConfig& cfg, const DiscreteDensity& m0, MfcMethod method,
                      const MFCSolveOptions& opts = {});

// |U(0,m0) - (cost of the optimal control on [0,t1] + U(t1, m_t1))|; t1 is
// snapped to the nearest interior time step.
double dpp_check(const ModelConfig& cfg, const DiscreteDensity& m0, double t1,
                 const MFCSolveOptions& opts = {});

// Nonnegative sub-density written as weight * shape with shape a probability
// density; part weights must sum to 1.
struct WeightedDensity {
  DiscreteDensity shape;
  double weight = 1.0;
};

// Joint optimization over one independent feedback control per part, with
// the mean-field costs seeing only the summed measure.  Agrees with
// solve_mfc on the sum.
double group_split_value(const ModelConfig& cfg, const std::vector<WeightedDensity>& parts,
                         const MFCSolveOptions& opts = {});

struct ReducedOptions {
  int nodes = 2001;
  double halfwidth = 10.0;  // grid spans y0 +- halfwidth
  int steps = 0;            // 0: from the CFL bound
};

// Value w(0, y0) of the one-dimensional projection of the mean-structured
// problem: -w_t - viscosity*w'' + H(w') = f(y), w(T,.) = g.  viscosity 1/N
// reproduces the N-particle value at states with mean y0; viscosity 0 gives
// the mean-field limit.  Requires a drift-free mean-structured model.
double reduced_oracle(const ModelConfig& cfg, double viscosity, double y0,
                      const ReducedOptions& opts = {});

// Max over sampled (t, state) of the residual left by w(t, mean(x)) in the
// N-particle equation.  For mean-structured models the residual reduces to
// |w''(t, mean)|/N, evaluated on the viscosity-0 solution; requires the
// smooth regime (no terminal-cost focusing on the horizon).
double projection_residual(const ModelConfig& cfg, int N, int sample_states, std::uint64_t seed);

}  // namespace mfc

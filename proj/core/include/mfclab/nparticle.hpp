#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfclab/grid.hpp"
#include "mfclab/model.hpp"

namespace mfc {

// Finite-difference dynamic programming for a small particle system on a
// tensor grid; every particle coordinate shares one axis grid.
struct NParticleProblem {
  ModelConfig cfg;
  int n_particles = 1;
  Grid1D axis_grid;
  int n_time_steps = 2;  // stored time slices, including t=0 and t=T
};

// Value function on the tensor grid.  values is time-major; within a slice
// the flat index runs with the first particle coordinate fastest.
struct ValueTensor {
  Grid1D axis;
  int n_particles = 0;
  int dim_d = 1;
  std::vector<double> times;   // increasing, times.front()=0, times.back()=T
  std::vector<double> values;  // times.size() * axis.n^rank

  int rank() const { return n_particles * dim_d; }
  std::size_t nodes_per_slice() const {
    std::size_t p = 1;
    for (int j = 0; j < rank(); ++j) p *= static_cast<std::size_t>(axis.n);
    return p;
  }
  const double* slice(int t_index) const {
    return values.data() + static_cast<std::size_t>(t_index) * nodes_per_slice();
  }
  // Multilinear interpolation within a stored slice; x clamps to the box.
  double value_at(int t_index, std::span<const double> x) const;
};

// Backward solve of the particle-system equation: implicit per-axis
// diffusion, implicit shared-noise diffusion along diagonal grid lines,
// and a monotone upwind control-form treatment of the Hamiltonian with
// internal substepping under the advection CFL bound.
ValueTensor solve_hjb(const NParticleProblem& prob);

// Feedback control at state x from the stored slice t_index: per-particle
// gradient by central differences of the interpolant, scaled by the
// particle count and mapped through -grad_p_h; clamped to control_radius_R.
std::vector<double> optimal_feedback(const ModelConfig& cfg, const ValueTensor& v, int t_index,
                                     std::span<const double> x);

struct LipschitzReport {
  double bound = 0.0;       // N * max block-gradient norm over nodes and slices
  int time_index = 0;       // where the max is achieved
  std::vector<int> node;    // grid index per tensor axis
};
LipschitzReport lipschitz_check(const ValueTensor& v);

// Worst sampled second-difference quotient of the value along directions
// (xi_1..xi_N, xi_0), normalized by |xi|^2/N + |xi_0|^2; bounded above
// uniformly in N for semiconcave values.
double semiconcavity_check(const ValueTensor& v, int samples, std::uint64_t seed);

struct PolicyValue {
  double mean = 0.0;
  double std_error = 0.0;
  int discarded = 0;
};

// Euler-Maruyama rollout of the controlled dynamics under the tensor
// feedback, with independent particle noises plus the shared noise term.
// Trials leaving the padded box are discarded; a discard rate above 1%
// fails the run.
PolicyValue policy_evaluate_mc(const NParticleProblem& prob, const ValueTensor& v,
                               std::span<const double> x0, int trials, std::uint64_t seed);

// Raw doubles in storage order plus a sidecar JSON metadata file at
// path + ".json".
void export_binary(const ValueTensor& v, const std::string& path);
// One stored slice as CSV rows "x_1,..,x_rank,value".
void export_slice_csv(const ValueTensor& v, int t_index, const std::string& path);

}  // namespace mfc

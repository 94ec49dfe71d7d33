#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mfclab/report.hpp"

namespace mfc {

// Outcome of one experiment driver.  results goes to results.csv, the
// summary string to summary.json; extra_files carries named artifact bytes.
// diverged marks a solver failure, with the cause in diagnostic_json.
struct ExperimentOutput {
  std::string experiment;
  Csv results;
  std::string summary_json;
  bool checks_passed = true;
  bool diverged = false;
  std::string diagnostic_json;
  std::vector<std::pair<std::string, std::string>> extra_files;
};

// ---- experiment configurations ----
// Every config has a JSON parser that accepts an object with the same field
// names, rejects unknown keys, and treats an empty string as the defaults.

struct CheckModelConfig {
  std::string model = "quadratic-mean";
  std::map<std::string, double> params;
  int samples = 400;
};

struct SolveNConfig {
  std::string model = "quadratic-mean";
  std::map<std::string, double> params;
  int n_particles = 2;
  double axis_lo = -6.0;
  double axis_hi = 6.0;
  int axis_nodes = 61;
  int time_slices = 3;
  std::vector<double> probe_state;  // optional, evaluated at t = 0
  bool export_field = true;         // emit value.bin, value.bin.json, slice0.csv
};

struct SolveMfConfig {
  std::string model = "quadratic-mean";
  std::map<std::string, double> params;
  double grid_lo = -8.0;
  double grid_hi = 8.0;
  int grid_nodes = 401;
  double m0_mean = 0.3;
  double m0_variance = 1.0;
  std::string method = "best";  // fixed-point | direct | best
  int max_iters = 60;
  int steps = 0;  // 0: from the advection CFL bound
};

struct RateConfig {
  std::string model = "quadratic-mean";
  std::map<std::string, double> params;
  std::string tier = "oracle";  // oracle: viscosity sweep; direct: tensor solves
  std::vector<int> n_list;      // empty: tier default
  double probe_y = 0.6;
};

// Drifted Brownian cloud started at the origin, empirical law at time h
// against the exact Gaussian, swept over the particle count.
struct ConcentrationSweepConfig {
  std::vector<int> n_list = {100, 1000, 10000};
  double horizon_h = 0.25;
  double drift = 0.3;
  int trials = 200;
};

// Sampling rate of W1 between n iid draws of a Gaussian and the Gaussian.
struct FournierConfig {
  std::vector<int> n_list = {100, 400, 1600};
  int trials = 200;
  double mean = 0.0;
  double variance = 1.0;
};

// Feedback values of a solved particle system, grouped into delta-cells;
// reports group counts and the Legendre-identity residuals.
struct PartitionDemoConfig {
  std::string model = "quadratic-mean";
  std::map<std::string, double> params;
  int n_particles = 2;
  double axis_halfwidth = 6.0;
  int axis_nodes = 101;
  int n_states = 500;
  double state_radius = 4.0;
  std::vector<double> deltas = {0.2, 0.1, 0.05};
};

// Exceedance curve of the dual statistic for identity clipped to
// [-clip_radius, clip_radius], against the sub-gaussian envelope.
struct TailConfig {
  int n_particles = 100;
  double horizon_h = 0.25;
  double drift = 0.3;
  int trials = 20000;
  double clip_radius = 4.0;
};

CheckModelConfig parse_check_model_config(const std::string& json_text);
SolveNConfig parse_solve_n_config(const std::string& json_text);
SolveMfConfig parse_solve_mf_config(const std::string& json_text);
RateConfig parse_rate_config(const std::string& json_text);
ConcentrationSweepConfig parse_concentration_config(const std::string& json_text);
FournierConfig parse_fournier_config(const std::string& json_text);
PartitionDemoConfig parse_partition_demo_config(const std::string& json_text);
TailConfig parse_tail_config(const std::string& json_text);

// ---- drivers ----
// Invalid configurations throw std::invalid_argument; solver failures are
// captured as diverged outputs instead of propagating.

ExperimentOutput run_check_model(const CheckModelConfig& cfg, std::uint64_t seed);
ExperimentOutput run_solve_n(const SolveNConfig& cfg, std::uint64_t seed);
ExperimentOutput run_solve_mf(const SolveMfConfig& cfg, std::uint64_t seed);
ExperimentOutput run_rate(const RateConfig& cfg, std::uint64_t seed);
ExperimentOutput run_concentration_sweep(const ConcentrationSweepConfig& cfg, std::uint64_t seed);
ExperimentOutput run_fournier(const FournierConfig& cfg, std::uint64_t seed);
ExperimentOutput run_partition_demo(const PartitionDemoConfig& cfg, std::uint64_t seed);
ExperimentOutput run_tail(const TailConfig& cfg, std::uint64_t seed);

// ---- acceptance suite ----
// Numbered end-to-end claims with thresholds and runtime budgets fixed in
// code.  Each criterion is self-contained and deterministic per seed.

inline constexpr std::uint64_t kAcceptanceSeed = 20260821;

int acceptance_criterion_count();
std::string acceptance_criterion_name(int index);  // 1-based

struct CriterionResult {
  int index = 0;
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  std::string detail;  // measured values against their pinned bounds
};

CriterionResult run_acceptance_criterion(int index, std::uint64_t seed);

// Runs the listed criteria (empty: all) and aggregates them into one output.
ExperimentOutput run_accept(const std::vector<int>& indices, std::uint64_t seed);

}  // namespace mfc

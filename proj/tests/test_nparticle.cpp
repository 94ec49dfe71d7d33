#include "mfclab/nparticle.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mfclab/meanfield.hpp"
#include "mfclab/model.hpp"
#include "mfclab/rates.hpp"
#include "mfclab/rng.hpp"

using namespace mfc;

namespace {

NParticleProblem make_problem(ModelConfig cfg, int n, Grid1D axis, int slices) {
  NParticleProblem p;
  p.cfg = std::move(cfg);
  p.n_particles = n;
  p.axis_grid = axis;
  p.n_time_steps = slices;
  return p;
}

ModelConfig arctan_model(double gain) {
  return builtin_model("quadratic-mean", {{"gain", gain}});
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("zero costs solve to the zero value") {
  for (const char* name : {"quadratic-mean", "quadratic-drift"}) {
    const ModelConfig cfg = builtin_model(name, {{"gain", 0.0}});
    const auto v = solve_hjb(make_problem(cfg, 2, Grid1D{-6.0, 6.0, 41}, 4));
    CHECK(max_abs(v.values) < 1e-10);
  }
}

TEST_CASE("terminal slice carries the exact terminal cost") {
  const ModelConfig cfg = arctan_model(1.0);
  const Grid1D axis{-6.0, 6.0, 41};
  const auto v = solve_hjb(make_problem(cfg, 2, axis, 3));
  const double* term = v.slice(2);
  for (int j = 0; j < axis.n; j += 7) {
    for (int i = 0; i < axis.n; i += 7) {
      const double expect = std::atan(0.5 * (axis.node(i) + axis.node(j)));
      CHECK(term[i + axis.n * j] == doctest::Approx(expect).epsilon(1e-15));
    }
  }
  // Comparison with the zero control bounds the whole tensor.
  CHECK(max_abs(v.values) <= 0.5 * 3.14159265358979 + 1e-9);
}

TEST_CASE("a constant added to the terminal cost shifts the value by it") {
  const Grid1D axis{-6.0, 6.0, 61};
  const ModelConfig base = arctan_model(1.0);
  ModelConfig shifted = base;
  const auto g0 = shifted.mean_costs.g;
  shifted.mean_costs.g = [g0](double s) { return g0(s) + 0.37; };

  const auto v1 = solve_hjb(make_problem(base, 2, axis, 4));
  const auto v2 = solve_hjb(make_problem(shifted, 2, axis, 4));
  double worst = 0.0;
  for (std::size_t i = 0; i < v1.values.size(); ++i)
    worst = std::max(worst, std::abs(v2.values[i] - (v1.values[i] + 0.37)));
  CHECK(worst < 1e-9);
}

TEST_CASE("pointwise larger terminal data never lowers the value") {
  const Grid1D axis{-6.0, 6.0, 61};
  const ModelConfig base = arctan_model(1.0);
  ModelConfig raised = base;
  const auto g0 = raised.mean_costs.g;
  raised.mean_costs.g = [g0](double s) { return g0(s) + 0.1 * (1.2 + std::tanh(s)); };

  const auto v1 = solve_hjb(make_problem(base, 2, axis, 4));
  const auto v2 = solve_hjb(make_problem(raised, 2, axis, 4));
  double worst = 0.0;
  for (std::size_t i = 0; i < v1.values.size(); ++i)
    worst = std::min(worst, v2.values[i] - v1.values[i]);
  CHECK(worst > -1e-12);
}

TEST_CASE("single particle value meets the viscous scalar solve") {
  const ModelConfig cfg = arctan_model(1.0);
  const auto v = solve_hjb(make_problem(cfg, 1, Grid1D{-8.0, 8.0, 201}, 6));
  for (double y : {0.0, 0.6, -0.6}) {
    const double probe[1] = {y};
    CHECK(std::abs(v.value_at(0, probe) - reduced_oracle(cfg, 1.0, y)) < 1e-2);
  }
}

TEST_CASE("two symmetric particles halve the effective viscosity") {
  const ModelConfig cfg = arctan_model(1.0);
  const auto v = solve_hjb(make_problem(cfg, 2, Grid1D{-8.0, 8.0, 151}, 5));
  for (double y : {0.0, 0.6}) {
    const double probe[2] = {y, y};
    CHECK(std::abs(v.value_at(0, probe) - reduced_oracle(cfg, 0.5, y)) < 1e-2);
  }

  // Exchangeability of the two particles, nodewise.
  const int M = 151;
  const double* s = v.slice(0);
  double asym = 0.0;
  for (int j = 0; j < M; j += 3)
    for (int i = 0; i < M; i += 3)
      asym = std::max(asym, std::abs(s[i + M * j] - s[j + M * i]));
  CHECK(asym < 1e-9);
}

TEST_CASE("shared noise adds straight to the reduced viscosity") {
  const ModelConfig cfg =
      builtin_model("quadratic-mean", {{"gain", 1.0}, {"a0", 0.3}});
  const auto v = solve_hjb(make_problem(cfg, 2, Grid1D{-8.0, 8.0, 151}, 5));
  for (double y : {0.0, 0.6}) {
    const double probe[2] = {y, y};
    CHECK(std::abs(v.value_at(0, probe) - reduced_oracle(cfg, 0.5 + 0.3, y)) < 1e-2);
  }
}

TEST_CASE("feedback on a flat value reduces to the drift pull") {
  const ModelConfig cfg = builtin_model("quadratic-drift", {{"gain", 0.0}, {"kappa", 0.6}});
  const auto v = solve_hjb(make_problem(cfg, 2, Grid1D{-6.0, 6.0, 61}, 3));
  CHECK(max_abs(v.values) < 1e-10);
  for (double x : {-1.3, 0.4, 2.0}) {
    const double probe[2] = {x, -x};
    const auto a = optimal_feedback(cfg, v, 0, probe);
    CHECK(a[0] == doctest::Approx(-0.6 * std::tanh(x)).epsilon(1e-9));
    CHECK(a[1] == doctest::Approx(-0.6 * std::tanh(-x)).epsilon(1e-9));
  }
}

TEST_CASE("feedback respects exchangeability and the control radius") {
  const ModelConfig cfg = arctan_model(1.0);
  const auto v = solve_hjb(make_problem(cfg, 2, Grid1D{-8.0, 8.0, 101}, 5));
  for (double y : {-0.8, 0.1, 1.4}) {
    const double probe[2] = {y, y};
    const auto a = optimal_feedback(cfg, v, 1, probe);
    CHECK(a[0] == doctest::Approx(a[1]).epsilon(1e-10));
  }
  CounterRng rng(41, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    const double probe[2] = {rng.uniform(-7.5, 7.5), rng.uniform(-7.5, 7.5)};
    const auto a = optimal_feedback(cfg, v, static_cast<int>(rng.below(5)), probe);
    CHECK(std::abs(a[0]) <= cfg.hamiltonian.control_radius_R + 1e-12);
    CHECK(std::abs(a[1]) <= cfg.hamiltonian.control_radius_R + 1e-12);
  }
}

TEST_CASE("scaled gradient bound is uniform across population sizes") {
  const ModelConfig cfg = arctan_model(1.0);
  const auto zero = solve_hjb(make_problem(arctan_model(0.0), 2, Grid1D{-6.0, 6.0, 41}, 3));
  CHECK(lipschitz_check(zero).bound == 0.0);

  const auto v1 = solve_hjb(make_problem(cfg, 1, Grid1D{-8.0, 8.0, 201}, 6));
  const auto v2 = solve_hjb(make_problem(cfg, 2, Grid1D{-8.0, 8.0, 101}, 6));
  const double b1 = lipschitz_check(v1).bound;
  const double b2 = lipschitz_check(v2).bound;
  CHECK(b1 > 0.5);
  CHECK(b1 < 1.5);
  CHECK(b2 > 0.5);
  CHECK(b2 < 1.5);
  CHECK(std::abs(b1 - b2) / std::max(b1, b2) < 0.25);
}

TEST_CASE("second difference quotients stay bounded across population sizes") {
  const auto zero = solve_hjb(make_problem(arctan_model(0.0), 2, Grid1D{-6.0, 6.0, 41}, 3));
  CHECK(semiconcavity_check(zero, 200, 5) == 0.0);

  const ModelConfig cfg = arctan_model(1.0);
  const auto v1 = solve_hjb(make_problem(cfg, 1, Grid1D{-8.0, 8.0, 201}, 6));
  const auto v2 = solve_hjb(make_problem(cfg, 2, Grid1D{-8.0, 8.0, 101}, 6));
  const double r1 = semiconcavity_check(v1, 500, 5);
  const double r2 = semiconcavity_check(v2, 500, 5);
  CHECK(std::isfinite(r1));
  CHECK(std::isfinite(r2));
  CHECK(r1 < 2.0);
  CHECK(r2 < 2.0);
  const double hi = std::max(r1, r2), lo = std::min(r1, r2);
  CHECK((hi <= 0.0 || lo > hi / 2.0 - 0.5));
}

TEST_CASE("rollouts under the tensor feedback reproduce the solved value") {
  const ModelConfig zero_cfg = arctan_model(0.0);
  const auto vz = solve_hjb(make_problem(zero_cfg, 2, Grid1D{-8.0, 8.0, 41}, 4));
  const double z0[2] = {0.2, -0.4};
  const auto pz = policy_evaluate_mc(make_problem(zero_cfg, 2, Grid1D{-8.0, 8.0, 41}, 4), vz,
                                     z0, 1000, 9);
  CHECK(pz.mean == 0.0);
  CHECK(pz.std_error == 0.0);
  CHECK(pz.discarded == 0);

  const ModelConfig cfg = arctan_model(1.0);
  const auto prob = make_problem(cfg, 2, Grid1D{-8.0, 8.0, 101}, 6);
  const auto v = solve_hjb(prob);
  const double x0[2] = {0.3, 0.9};
  const auto mc = policy_evaluate_mc(prob, v, x0, 2000, 17);
  CHECK(mc.discarded == 0);
  const double ref = v.value_at(0, x0);
  CHECK(std::abs(mc.mean - ref) < 3.0 * mc.std_error + 0.02);

  const auto again = policy_evaluate_mc(prob, v, x0, 2000, 17);
  CHECK(again.mean == mc.mean);
  CHECK(again.std_error == mc.std_error);
}

TEST_CASE("rollouts with shared noise match their own solve") {
  const ModelConfig cfg = builtin_model("quadratic-mean", {{"gain", 1.0}, {"a0", 0.5}});
  const auto prob = make_problem(cfg, 2, Grid1D{-8.0, 8.0, 101}, 6);
  const auto v = solve_hjb(prob);
  const double x0[2] = {0.3, 0.9};
  const auto mc = policy_evaluate_mc(prob, v, x0, 2000, 23);
  CHECK(mc.discarded == 0);
  CHECK(std::abs(mc.mean - v.value_at(0, x0)) < 3.0 * mc.std_error + 0.02);
}

TEST_CASE("value converges at first order under grid refinement") {
  const ModelConfig cfg = arctan_model(1.0);
  const auto solve_at = [&](int m) {
    const auto v = solve_hjb(make_problem(cfg, 1, Grid1D{-8.0, 8.0, m}, 6));
    const double probe[1] = {0.3};
    return v.value_at(0, probe);
  };
  const double ref = solve_at(401);
  std::vector<double> hs, errs;
  for (int m : {51, 101, 201}) {
    hs.push_back(16.0 / (m - 1));
    errs.push_back(std::abs(solve_at(m) - ref) + 1e-12);
  }
  const auto fit = loglog_fit(hs, errs);
  CHECK(fit.slope > 0.9);
}

TEST_CASE("branch minimization agrees with the sampled control fallback") {
  const ModelConfig cfg = arctan_model(1.0);
  ModelConfig generic = cfg;
  generic.quad.valid = false;  // forces the sampled-control path
  const Grid1D axis{-8.0, 8.0, 101};
  const auto vq = solve_hjb(make_problem(cfg, 1, axis, 4));
  const auto vg = solve_hjb(make_problem(generic, 1, axis, 4));
  double worst = 0.0;
  for (std::size_t i = 0; i < vq.values.size(); ++i)
    worst = std::max(worst, std::abs(vq.values[i] - vg.values[i]));
  CHECK(worst < 2.5e-3);
  // Scanning a finer control set can only lower a min; values must not rise
  // beyond roundoff.
  double rise = 0.0;
  for (std::size_t i = 0; i < vq.values.size(); ++i)
    rise = std::max(rise, vq.values[i] - vg.values[i] - 1e-9);
  CHECK(rise <= 2.5e-3);
}

TEST_CASE("infeasible problems and inputs are refused") {
  const ModelConfig cfg = arctan_model(1.0);
  CHECK_THROWS_AS(solve_hjb(make_problem(cfg, 5, Grid1D{-4.0, 4.0, 21}, 3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_hjb(make_problem(cfg, 2, Grid1D{-4.0, 4.0, 3}, 3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_hjb(make_problem(cfg, 2, Grid1D{-4.0, 4.0, 21}, 1)),
                  std::invalid_argument);
  const ModelConfig planar = builtin_model("quadratic-mean", {{"dim", 3.0}});
  CHECK_THROWS_AS(solve_hjb(make_problem(planar, 2, Grid1D{-4.0, 4.0, 21}, 3)),
                  std::invalid_argument);

  const auto prob = make_problem(cfg, 2, Grid1D{-6.0, 6.0, 41}, 3);
  const auto v = solve_hjb(prob);
  const double inside[2] = {0.0, 0.0};
  CHECK_THROWS_AS(policy_evaluate_mc(prob, v, inside, 500, 1), std::invalid_argument);
  const double edge[2] = {5.95, 0.0};
  CHECK_THROWS_AS(policy_evaluate_mc(prob, v, edge, 1000, 1), std::invalid_argument);
  CHECK_THROWS_AS(semiconcavity_check(v, 50, 1), std::invalid_argument);

  // A box this tight loses more than 1% of trials to the boundary.
  const auto tight = make_problem(cfg, 2, Grid1D{-2.5, 2.5, 51}, 3);
  const auto vt = solve_hjb(tight);
  const double x0[2] = {1.8, 1.8};
  CHECK_THROWS_AS(policy_evaluate_mc(tight, vt, x0, 1000, 3), std::runtime_error);
}

TEST_CASE("tensors round-trip through the export formats") {
  const ModelConfig cfg = arctan_model(1.0);
  const auto v = solve_hjb(make_problem(cfg, 2, Grid1D{-4.0, 4.0, 21}, 3));
  const std::string base = "/tmp/mfclab_tensor_test.bin";
  export_binary(v, base);
  {
    std::ifstream in(base, std::ios::binary | std::ios::ate);
    REQUIRE(in.good());
    CHECK(static_cast<std::size_t>(in.tellg()) == v.values.size() * sizeof(double));
    in.seekg(0);
    std::vector<double> back(v.values.size());
    in.read(reinterpret_cast<char*>(back.data()),
            static_cast<std::streamsize>(back.size() * sizeof(double)));
    CHECK(back == v.values);
  }
  {
    std::ifstream meta(base + ".json");
    REQUIRE(meta.good());
    std::stringstream ss;
    ss << meta.rdbuf();
    CHECK(ss.str().find("\"n_particles\": 2") != std::string::npos);
    CHECK(ss.str().find("\"layout\"") != std::string::npos);
  }
  const std::string csv = "/tmp/mfclab_tensor_slice.csv";
  export_slice_csv(v, 0, csv);
  {
    std::ifstream in(csv);
    REQUIRE(in.good());
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 21 * 21 + 1);
  }
  CHECK_THROWS_AS(export_slice_csv(v, 7, csv), std::invalid_argument);
  std::remove(base.c_str());
  std::remove((base + ".json").c_str());
  std::remove(csv.c_str());
}

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfclab/model.hpp"

using namespace mfc;

namespace {

bool all_passed(const std::vector<AssumptionCheck>& report) {
  for (const auto& chk : report)
    if (!chk.passed) return false;
  return true;
}

const AssumptionCheck& find_check(const std::vector<AssumptionCheck>& report,
                                  const std::string& name) {
  for (const auto& chk : report)
    if (chk.name == name) return chk;
  throw std::runtime_error("missing check " + name);
}

}  // namespace

TEST_CASE("quadratic model evaluates its closed forms") {
  const auto cfg = builtin_model("quadratic-mean");
  const std::vector<double> x{0.3}, p{2.0}, a{2.0}, zero{0.0};
  CHECK(cfg.hamiltonian.eval_h(x, p) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(cfg.hamiltonian.eval_h(x, zero) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(cfg.hamiltonian.eval_l(x, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cfg.hamiltonian.grad_p_h(x, p)[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(cfg.hamiltonian.grad_a_l(x, a)[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("numerical Legendre transform hits closed forms") {
  const auto cfg = builtin_model("quadratic-mean");
  const std::vector<double> x{0.0}, a0{0.0}, a2{2.0};
  CHECK(legendre_transform(cfg.hamiltonian, x, a0, 5.0, 21) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
  CHECK(legendre_transform(cfg.hamiltonian, x, a2, 5.0, 21) ==
        doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("Legendre transform of a tilted parabola") {
  // H = p^2 + p as the drift model at x far in the positive tail, where
  // tanh saturates; sup_p(-p - p^2 - p) = 1 at p = -1.
  const auto cfg = builtin_model("quadratic-drift", {{"kappa", 1.0}});
  const std::vector<double> x{40.0}, a{1.0};
  CHECK(legendre_transform(cfg.hamiltonian, x, a, 6.0, 21) ==
        doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("transform demands an interior maximizer") {
  const auto cfg = builtin_model("quadratic-mean");
  const std::vector<double> x{0.0}, a{30.0};
  // Maximizer p = -a/2 = -15 sits outside radius 4.
  CHECK_THROWS_AS(legendre_transform(cfg.hamiltonian, x, a, 4.0, 21), std::invalid_argument);
  CHECK_THROWS_AS(legendre_transform(cfg.hamiltonian, x, a, 4.0, 2), std::invalid_argument);
}

TEST_CASE("double Legendre round-trip on the catalog") {
  for (const char* name : {"quadratic-mean", "quadratic-drift", "nonconvex-mean"}) {
    const auto cfg = builtin_model(name, name == std::string("quadratic-drift")
                                             ? std::map<std::string, double>{{"kappa", 0.7}}
                                             : std::map<std::string, double>{});
    // H~(x,p) = sup_a [ -a.p - L(x,a) ] should reproduce H.
    for (double xv : {-1.5, 0.0, 0.8}) {
      for (double pv : {-2.0, -0.3, 0.0, 1.0, 2.5}) {
        const std::vector<double> x{xv}, p{pv};
        double best = -1e300;
        for (int i = 0; i <= 4000; ++i) {
          const double a = -20.0 + 0.01 * i;
          const std::vector<double> av{a};
          best = std::max(best, -a * pv - cfg.hamiltonian.eval_l(x, av));
        }
        CHECK(std::abs(best - cfg.hamiltonian.eval_h(x, p)) < 1e-4);
      }
    }
  }
}

TEST_CASE("catalog models pass the assumption checks") {
  for (const char* name : {"quadratic-mean", "quadratic-drift", "nonconvex-mean"}) {
    const auto report = check_assumptions(builtin_model(name), 200, 42);
    CHECK(report.size() >= 8);
    if (!all_passed(report)) {
      for (const auto& chk : report) {
        CAPTURE(chk.name);
        CAPTURE(chk.witness);
        CHECK(chk.passed);
      }
    }
  }
}

TEST_CASE("assumption checks run in two dimensions") {
  const auto cfg = builtin_model("quadratic-drift", {{"dim", 2.0}, {"kappa", 0.4}});
  CHECK(all_passed(check_assumptions(cfg, 120, 7)));
}

TEST_CASE("quartic growth is caught with a witness") {
  auto cfg = builtin_model("quadratic-mean");
  cfg.hamiltonian.eval_h = [](std::span<const double>, std::span<const double> p) {
    double s = 0.0;
    for (double v : p) s += v * v;
    return s * s;
  };
  const auto report = check_assumptions(cfg, 150, 1);
  const auto& growth = find_check(report, "growth-envelope");
  CHECK_FALSE(growth.passed);
  CHECK(growth.worst > 0.0);
  CHECK_FALSE(growth.witness.empty());
}

TEST_CASE("mislabeled gradients are caught") {
  auto cfg = builtin_model("quadratic-mean");
  cfg.hamiltonian.grad_p_h = [](std::span<const double>, std::span<const double> p) {
    return Vec(p.begin(), p.end());  // forgot the factor 2
  };
  const auto report = check_assumptions(cfg, 150, 3);
  CHECK_FALSE(find_check(report, "p-gradient-consistency").passed);
}

TEST_CASE("checker rejects thin sampling") {
  CHECK_THROWS_AS(check_assumptions(builtin_model("quadratic-mean"), 0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(check_assumptions(builtin_model("quadratic-mean"), 99, 1),
                  std::invalid_argument);
}

TEST_CASE("catalog rejects unknown names and params") {
  CHECK_THROWS_AS(builtin_model("cubic-chaos"), std::invalid_argument);
  CHECK_THROWS_AS(builtin_model("quadratic-mean", {{"kappa", 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(builtin_model("quadratic-mean", {{"dim", 2.5}}), std::invalid_argument);
  CHECK_THROWS_AS(builtin_model("quadratic-mean", {{"horizon", -1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(builtin_model("quadratic-drift", {{"kappa", -0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(builtin_model("quadratic-mean", {{"a0", -0.1}}), std::invalid_argument);
}

TEST_CASE("costs see only the mean statistic") {
  const auto cfg = builtin_model("quadratic-mean", {{"gain", 2.0}});
  const Measure a = EmpiricalMeasure::from_1d({0.0, 1.0});
  const Measure b = EmpiricalMeasure::from_1d({0.5, 0.5});
  CHECK(cfg.cost.eval_g(a) == doctest::Approx(cfg.cost.eval_g(b)).epsilon(1e-14));
  CHECK(cfg.cost.eval_g(a) == doctest::Approx(2.0 * std::atan(0.5)).epsilon(1e-14));
  REQUIRE(cfg.mean_costs.valid);
  CHECK(cfg.mean_costs.g(0.5) == doctest::Approx(2.0 * std::atan(0.5)).epsilon(1e-14));
  CHECK(cfg.mean_costs.dg(0.5) == doctest::Approx(2.0 / 1.25).epsilon(1e-14));
}

TEST_CASE("flat terminal derivative centers itself") {
  const auto cfg = builtin_model("nonconvex-mean", {{"gain", 1.5}});
  const EmpiricalMeasure e = EmpiricalMeasure::from_1d({-1.0, 0.4, 2.2});
  const Measure m = e;
  double acc = 0.0;
  for (int i = 0; i < e.size(); ++i) acc += cfg.cost.flat_dg(m, e.point(i));
  CHECK(acc == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // Matches g'(s) (phi(x) - s) directly.
  const double s = mean_coordinate_sum(m);
  const double q = 1.0 + s * s;
  const double expect = 1.5 * (-2.0 * s / (q * q)) * (-1.0 - s);
  const std::vector<double> x{-1.0};
  CHECK(cfg.cost.flat_dg(m, x) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("drift structure is exposed for solvers") {
  const auto cfg = builtin_model("quadratic-drift", {{"kappa", 0.9}});
  REQUIRE(cfg.quad.valid);
  CHECK(cfg.quad.axis_drift(0.7) == doctest::Approx(0.9 * std::tanh(0.7)).epsilon(1e-14));
  const auto plain = builtin_model("quadratic-mean");
  CHECK(plain.quad.axis_drift(3.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

#include "mfclab/lipnet.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mfclab/measures.hpp"
#include "mfclab/rng.hpp"

using namespace mfc;

namespace {

PiecewiseLinearLip clipped_identity(double r) {
  return {{-r, r}, {-r, r}};
}

PiecewiseLinearLip random_lip(CounterRng& rng, double r) {
  std::vector<double> bps{-r};
  for (int i = 0; i < 6; ++i) bps.push_back(rng.uniform(-r, r));
  bps.push_back(r);
  std::sort(bps.begin(), bps.end());
  std::vector<double> clean{bps[0]};
  for (double b : bps)
    if (b > clean.back() + 1e-6) clean.push_back(b);
  std::vector<double> vals{rng.uniform(-r, r)};
  for (std::size_t i = 0; i + 1 < clean.size(); ++i) {
    const double dx = clean[i + 1] - clean[i];
    vals.push_back(std::clamp(vals.back() + rng.uniform(-dx, dx), -r, r));
  }
  return {std::move(clean), std::move(vals)};
}

double linf_sampled(const PiecewiseLinearLip& a, const PiecewiseLinearLip& b,
                    double lo, double hi, int n) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    worst = std::max(worst, std::abs(a(x) - b(x)));
  }
  return worst;
}

}  // namespace

TEST_CASE("taper extension follows the three-case formula") {
  const PiecewiseLinearLip zero{{-1.0, 1.0}, {0.0, 0.0}};
  const auto zt = extend_tilde(zero, 1.0);
  for (double x : {-3.0, -1.5, 0.0, 0.7, 2.0, 5.0}) CHECK(zt(x) == 0.0);

  const auto it = extend_tilde(clipped_identity(1.0), 1.0);
  CHECK(it(1.5) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(it(-1.5) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(it(0.3) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(it(2.0) == 0.0);
  CHECK(it(-2.0) == 0.0);
  CHECK(it(3.7) == 0.0);

  // Difference quotients of the extension stay within the Lipschitz bound.
  CounterRng rng(11, 1);
  const auto phi = random_lip(rng, 2.0);
  const auto ext = extend_tilde(phi, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-5.0, 5.0);
    const double y = rng.uniform(-5.0, 5.0);
    if (std::abs(x - y) < 1e-9) continue;
    CHECK(std::abs(ext(x) - ext(y)) <= std::abs(x - y) * (1.0 + 1e-12));
  }
}

TEST_CASE("net enumeration has the promised size and members") {
  const auto net = build_net_1d(1.0, 1.0);
  CHECK(net.steps == 2);
  CHECK(net.member_count <= 27);
  CHECK(!net.members.empty());
  bool has_zero = false;
  for (const auto& m : net.members) {
    require_lipschitz(m);
    bool all0 = true;
    for (double v : m.values) all0 = all0 && v == 0.0;
    has_zero = has_zero || all0;
    for (double v : m.values) CHECK(std::abs(v) <= 1.0);
  }
  CHECK(has_zero);

  CHECK_THROWS_AS(build_net_1d(0.01, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_net_1d(1.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_net_1d(0.0, 1.0), std::invalid_argument);

  // Large nets skip materialization but keep the enumeration count.
  const auto big = build_net_1d(0.25, 2.0);
  CHECK(big.members.empty());
  CHECK(big.member_count == 17LL * 43046721LL);
}

TEST_CASE("every random Lipschitz function is near some net member") {
  const auto net = build_net_1d(0.5, 1.0);
  REQUIRE(!net.members.empty());
  CounterRng rng(7, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto phi = random_lip(rng, 1.0);
    double best = 1e300;
    for (const auto& m : net.members) {
      best = std::min(best, linf_sampled(phi, m, -1.0, 1.0, 81));
      if (best <= 0.25) break;
    }
    worst = std::max(worst, best);
  }
  CHECK(worst <= net.epsilon + 1e-9);
}

TEST_CASE("dual bound is exact on atom pairs and bounded by transport") {
  const Measure d0{EmpiricalMeasure::from_1d({0.0})};
  const Measure d1{EmpiricalMeasure::from_1d({1.0})};

  const auto net = build_net_1d(0.25, 2.0);
  const double v = dual_lower_bound(d0, d1, net);
  CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dual_lower_bound(d0, d0, net) == 0.0);

  CounterRng rng(19, 4);
  for (int pair = 0; pair < 50; ++pair) {
    std::vector<double> xs, ys;
    const int n = 3 + static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) {
      xs.push_back(rng.uniform(-1.5, 1.5));
      ys.push_back(rng.uniform(-1.5, 1.5));
    }
    const Measure mu{EmpiricalMeasure::from_1d(xs)};
    const Measure nu{EmpiricalMeasure::from_1d(ys)};
    const double w1 = w1_exact_1d(mu, nu);
    const double lb = dual_lower_bound(mu, nu, net);
    CHECK(lb <= w1 + 1e-12);
    CHECK(lb >= w1 - 2.0 * net.epsilon - 1e-9);
  }
}

TEST_CASE("path maximization agrees with a member scan") {
  const auto net = build_net_1d(0.5, 1.0);
  REQUIRE(net.generated);
  REQUIRE(!net.members.empty());

  const Grid1D g{-3.0, 3.0, 301};
  const Measure mu{DiscreteDensity::gaussian(g, -0.3, 0.4)};
  const Measure nu{DiscreteDensity::gaussian(g, 0.5, 0.7)};
  const Measure emu{EmpiricalMeasure::from_1d({-0.9, 0.1, 0.4})};
  const Measure enu{EmpiricalMeasure::from_1d({0.2, 0.6, -0.5})};

  for (const auto* p : {&mu, &emu}) {
    const auto& a = *p;
    const auto& b = (p == &mu) ? nu : enu;
    double brute = -1e300;
    for (const auto& m : net.members)
      brute = std::max(brute, integrate_tapered(m, net.radius_R, a) -
                                  integrate_tapered(m, net.radius_R, b));
    CHECK(dual_lower_bound(a, b, net) == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("adding members to a net never lowers the dual bound") {
  LipNet small;
  small.radius_R = 2.0;
  small.epsilon = 0.5;
  small.members.push_back({{-2.0, 2.0}, {0.0, 0.0}});
  small.members.push_back({{-2.0, 2.0}, {-1.0, 1.0}});

  LipNet bigger = small;
  bigger.members.push_back({{-2.0, 2.0}, {2.0, -2.0}});

  const Measure d0{EmpiricalMeasure::from_1d({0.0})};
  const Measure d1{EmpiricalMeasure::from_1d({1.0})};
  const double lo = dual_lower_bound(d0, d1, small);
  const double hi = dual_lower_bound(d0, d1, bigger);
  CHECK(hi >= lo);
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));

  LipNet empty;
  empty.radius_R = 1.0;
  CHECK_THROWS_AS(dual_lower_bound(d0, d1, empty), std::invalid_argument);
}

TEST_CASE("tail statistic is centered with the predicted variance") {
  const PiecewiseLinearLip zero{{-1.0, 1.0}, {0.0, 0.0}};
  const auto flat = tail_experiment(zero, 50, 1.0, 0.0, 10000, 3);
  CHECK(flat.xs.empty());
  CHECK(flat.statistic_mean == 0.0);
  CHECK(flat.statistic_variance == 0.0);

  // For near-linear phi the statistic is Gaussian with variance 2h/N.
  const auto t = tail_experiment(clipped_identity(6.0), 100, 1.0, 0.0, 100000, 21);
  CHECK(std::abs(t.statistic_variance - 0.02) < 0.001);
  CHECK(std::abs(t.statistic_mean) < 2e-3);

  // Drift shifts law and particles together, so centering is exact.
  const auto drifted = tail_experiment(clipped_identity(6.0), 100, 1.0, 0.7, 20000, 22);
  CHECK(std::abs(drifted.statistic_mean) < 4e-3);

  const auto rerun = tail_experiment(clipped_identity(6.0), 100, 1.0, 0.0, 100000, 21);
  CHECK(rerun.statistic_mean == t.statistic_mean);
  REQUIRE(rerun.xs.size() == t.xs.size());
  CHECK(rerun.log_tail == t.log_tail);
}

TEST_CASE("empirical exceedance stays under the sub-Gaussian envelope") {
  const int n = 100;
  const double h = 1.0;
  const auto curve = tail_experiment(clipped_identity(1.5), n, h, 0.0, 20000, 29);
  REQUIRE(curve.xs.size() > 5);
  for (std::size_t i = 0; i < curve.xs.size(); ++i) {
    const double bound = -n * curve.xs[i] * curve.xs[i] / (4.0 * h);
    CHECK(curve.log_tail[i] <= bound + 1e-9);
  }
}

TEST_CASE("malformed tail inputs are refused") {
  CHECK_THROWS_AS(tail_experiment(clipped_identity(1.0), 10, 1.0, 0.0, 5000, 1),
                  std::invalid_argument);
  const PiecewiseLinearLip steep{{-1.0, 1.0}, {-2.0, 2.0}};
  CHECK_THROWS_AS(tail_experiment(steep, 10, 1.0, 0.0, 10000, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(tail_experiment(clipped_identity(1.0), 0, 1.0, 0.0, 10000, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(tail_experiment(clipped_identity(1.0), 10, -1.0, 0.0, 10000, 1),
                  std::invalid_argument);
}

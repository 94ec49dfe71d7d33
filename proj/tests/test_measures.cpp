#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mfclab/measures.hpp"
#include "mfclab/rng.hpp"

using namespace mfc;

namespace {

// Independent W1 oracle: trapezoid integration of |F_a - F_b| on a fine grid,
// with CDFs evaluated from first principles per measure kind.  Slow and
// deliberately naive; shares no code with the library path.
double oracle_cdf(const Measure& m, double x) {
  if (const auto* e = std::get_if<EmpiricalMeasure>(&m)) {
    int c = 0;
    for (int i = 0; i < e->size(); ++i) c += e->at1d(i) <= x;
    return static_cast<double>(c) / e->size();
  }
  if (const auto* g = std::get_if<GaussianMixture>(&m)) {
    const double sd = std::sqrt(g->scale);
    double acc = 0.0;
    for (int i = 0; i < g->size(); ++i) {
      const double c = g->center1d(i);
      acc += sd > 0.0 ? norm_cdf((x - c) / sd) : (c <= x ? 1.0 : 0.0);
    }
    return acc / g->size();
  }
  const auto& d = std::get<DiscreteDensity>(m);
  // Cumulative trapezoid of the interpolant up to x, renormalized.
  const double h = d.grid.spacing();
  double acc = 0.0, total = 0.0;
  for (int i = 0; i + 1 < d.grid.n; ++i) {
    const double seg = 0.5 * (d.weights[i] + d.weights[i + 1]) * h;
    total += seg;
    const double a = d.grid.node(i), b = d.grid.node(i + 1);
    if (x >= b) {
      acc += seg;
    } else if (x > a) {
      const double t = (x - a) / h;
      const double mid = d.weights[i] + t * (d.weights[i + 1] - d.weights[i]);
      acc += 0.5 * (d.weights[i] + mid) * t * h;
    }
  }
  return acc / total;
}

double oracle_w1(const Measure& a, const Measure& b, double lo, double hi, int n = 400001) {
  const double h = (hi - lo) / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + i * h;
    const double v = std::abs(oracle_cdf(a, x) - oracle_cdf(b, x));
    acc += (i == 0 || i == n - 1) ? 0.5 * v : v;
  }
  return acc * h;
}

// Exact minimum over all permutations; usable for n <= 7.
double oracle_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  const int n = a.size();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      double sq = 0.0;
      const auto p = a.point(i), q = b.point(perm[i]);
      for (int c = 0; c < a.dim; ++c) sq += (p[c] - q[c]) * (p[c] - q[c]);
      cost += std::sqrt(sq);
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;
}

DiscreteDensity uniform_density(double lo, double hi, int n = 201) {
  return DiscreteDensity::normalized({lo, hi, n}, std::vector<double>(n, 1.0));
}

}  // namespace

TEST_CASE("sorted matching on two-point clouds") {
  const auto a = EmpiricalMeasure::from_1d({0.0, 1.0});
  const auto b = EmpiricalMeasure::from_1d({1.5, 0.5});
  CHECK(w1_exact_1d(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w1_assignment(a, b) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("unequal atom counts integrate the step CDFs") {
  const auto a = EmpiricalMeasure::from_1d({0.0});
  const auto b = EmpiricalMeasure::from_1d({0.0, 1.0});
  // Half the mass moves from 0 to 1.
  CHECK(w1_exact_1d(a, b) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("point mass against a standard Gaussian") {
  const auto atom = EmpiricalMeasure::from_1d({0.0});
  const auto gauss = GaussianMixture::from_1d({0.0}, 1.0, 0.0);
  // E|Z| = sqrt(2/pi).
  const double expect = std::sqrt(2.0 / std::acos(-1.0));
  CHECK(w1_exact_1d(atom, gauss) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("Gaussians differing only in mean are a translation apart") {
  const auto a = GaussianMixture::from_1d({0.0}, 1.0, 0.0);
  const auto b = GaussianMixture::from_1d({0.7}, 1.0, 0.0);
  CHECK(w1_exact_1d(a, b) == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("centered Gaussians with different spread") {
  const auto a = GaussianMixture::from_1d({0.0}, 1.0, 0.0);
  const auto b = GaussianMixture::from_1d({0.0}, 4.0, 0.0);
  // |sigma1 - sigma2| * E|Z|.
  const double expect = (2.0 - 1.0) * std::sqrt(2.0 / std::acos(-1.0));
  CHECK(w1_exact_1d(a, b) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("uniform density against its median atom") {
  const auto d = uniform_density(0.0, 1.0);
  const auto atom = EmpiricalMeasure::from_1d({0.5});
  CHECK(w1_exact_1d(d, atom) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("translated uniform densities") {
  const auto a = uniform_density(0.0, 1.0);
  const auto b = uniform_density(0.5, 1.5);
  CHECK(w1_exact_1d(a, b) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("mixture pairs match the brute-force CDF oracle") {
  const auto a = GaussianMixture::from_1d({-1.0, 0.4, 2.0}, 0.5, 0.0);
  const auto b = GaussianMixture::from_1d({0.3, 1.1}, 0.2, 0.0);
  CHECK(w1_exact_1d(a, b) == doctest::Approx(oracle_w1(a, b, -12.0, 12.0)).epsilon(1e-5));
}

TEST_CASE("mixture against density matches the brute-force CDF oracle") {
  const auto a = GaussianMixture::from_1d({0.1, -0.6}, 0.3, 0.0);
  const auto d = DiscreteDensity::gaussian({-8.0, 8.0, 801}, 0.2, 0.8);
  CHECK(w1_exact_1d(a, d) == doctest::Approx(oracle_w1(a, d, -12.0, 12.0)).epsilon(1e-4));
}

TEST_CASE("atoms against mixture matches the brute-force CDF oracle") {
  const auto a = EmpiricalMeasure::from_1d({-0.7, 0.2, 0.2, 1.9});
  const auto b = GaussianMixture::from_1d({-0.5, 1.0}, 0.4, 0.1);
  CHECK(w1_exact_1d(a, b) == doctest::Approx(oracle_w1(a, b, -14.0, 14.0)).epsilon(1e-5));
}

TEST_CASE("atoms against density matches the brute-force CDF oracle") {
  const auto a = EmpiricalMeasure::from_1d({0.1, 0.55, 0.9});
  const auto d = uniform_density(0.0, 1.0);
  CHECK(w1_exact_1d(a, d) == doctest::Approx(oracle_w1(a, d, -1.0, 2.0)).epsilon(1e-5));
}

TEST_CASE("distance is symmetric and vanishes on a diagonal") {
  const auto a = GaussianMixture::from_1d({0.0, 1.0}, 0.25, 0.0);
  const auto b = EmpiricalMeasure::from_1d({-0.3, 0.8, 0.8});
  CHECK(w1_exact_1d(a, b) == doctest::Approx(w1_exact_1d(b, a)).epsilon(1e-10));
  CHECK(w1_exact_1d(a, a) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(w1_exact_1d(b, b) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("triangle inequality on random triples") {
  CounterRng rng(314, 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> xs(6), ys(4), cs(3);
    for (auto& x : xs) x = 2.0 * rng.normal();
    for (auto& y : ys) y = 2.0 * rng.normal();
    for (auto& c : cs) c = rng.normal();
    const Measure a = EmpiricalMeasure::from_1d(xs);
    const Measure b = EmpiricalMeasure::from_1d(ys);
    const Measure c = GaussianMixture::from_1d(cs, 0.1 + rng.uniform(), 0.0);
    const double ab = w1_exact_1d(a, b), bc = w1_exact_1d(b, c), ac = w1_exact_1d(a, c);
    CHECK(ac <= ab + bc + 1e-8);
    CHECK(ab <= ac + bc + 1e-8);
  }
}

TEST_CASE("a zero-scale mixture is its empirical skeleton") {
  const auto g = GaussianMixture::from_1d({0.5, -1.0, 2.5}, 0.0, 0.25);
  const auto e = g.as_empirical();
  REQUIRE(e.size() == 3);
  CHECK(e.at1d(0) == doctest::Approx(0.75));
  CHECK(w1_exact_1d(g, e) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("translating both marginals preserves the distance") {
  const auto a = GaussianMixture::from_1d({0.0, 1.2}, 0.3, 0.0);
  const auto b = EmpiricalMeasure::from_1d({0.4, 0.9, -0.2});
  const double base = w1_exact_1d(a, b);
  const double shifted = w1_exact_1d(pushforward_shift(Measure{a}, 2.5),
                                     pushforward_shift(Measure{b}, 2.5));
  CHECK(shifted == doctest::Approx(base).epsilon(1e-8));
}

TEST_CASE("translating one marginal of a translation-invariant pair costs the shift") {
  const auto a = GaussianMixture::from_1d({-0.5, 0.5}, 0.4, 0.0);
  const auto b = pushforward_shift(Measure{a}, 0.8);
  CHECK(w1_exact_1d(a, b) == doctest::Approx(0.8).epsilon(1e-8));
}

TEST_CASE("sorted 1D assignment agrees with the exact CDF distance") {
  CounterRng rng(99, 1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> xs(8), ys(8);
    for (auto& x : xs) x = rng.normal();
    for (auto& y : ys) y = 0.5 + rng.normal();
    const auto a = EmpiricalMeasure::from_1d(xs);
    const auto b = EmpiricalMeasure::from_1d(ys);
    CHECK(w1_assignment(a, b) == doctest::Approx(w1_exact_1d(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("planar assignment on a crossing pair") {
  const EmpiricalMeasure a(2, {0.0, 0.0, 1.0, 1.0});
  const EmpiricalMeasure b(2, {0.0, 1.0, 1.0, 0.0});
  CHECK(w1_assignment(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("planar assignment matches brute-force enumeration") {
  CounterRng rng(555, 2);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 6;
    std::vector<double> pa(2 * n), pb(2 * n);
    for (auto& v : pa) v = rng.normal();
    for (auto& v : pb) v = rng.normal();
    const EmpiricalMeasure a(2, pa), b(2, pb);
    CHECK(w1_assignment(a, b) == doctest::Approx(oracle_assignment(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("moments of standard measures") {
  const auto unif = uniform_density(0.0, 1.0);
  CHECK(moment(unif, 1.0) == doctest::Approx(0.5).epsilon(1e-9));
  const auto gauss = GaussianMixture::from_1d({0.0}, 1.0, 0.0);
  CHECK(moment(gauss, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(moment(gauss, 1.0) == doctest::Approx(std::sqrt(2.0 / std::acos(-1.0))).epsilon(1e-10));
  const auto atoms = EmpiricalMeasure::from_1d({-2.0, 1.0});
  CHECK(moment(atoms, 2.0) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(mean_coordinate_sum(atoms) == doctest::Approx(-0.5).epsilon(1e-14));
  const EmpiricalMeasure cloud(2, {1.0, 2.0, 3.0, 4.0});
  CHECK(mean_coordinate_sum(cloud) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("second moment of a shifted mixture") {
  // E|c + sZ|^2 averaged over centers, c = 0.5 and -1.5, s^2 = 0.3.
  const auto g = GaussianMixture::from_1d({0.0, -2.0}, 0.3, 0.5);
  const double expect = 0.5 * (0.25 + 2.25) + 0.3;
  CHECK(moment(g, 2.0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sampling reproduces the mean and is deterministic") {
  const auto g = GaussianMixture::from_1d({-1.0, 3.0}, 0.5, 0.0);
  const auto s1 = sample(g, 20000, 42, 0);
  const auto s2 = sample(g, 20000, 42, 0);
  CHECK(s1.points == s2.points);
  double acc = 0.0;
  for (int i = 0; i < s1.size(); ++i) acc += s1.at1d(i);
  // Mixture mean 1.0; component spread dominates the standard error.
  CHECK(std::abs(acc / s1.size() - 1.0) < 0.07);
  const auto s3 = sample(g, 20000, 42, 1);
  CHECK(s1.points != s3.points);
}

TEST_CASE("density sampling inverts the CDF") {
  const auto d = uniform_density(0.0, 1.0, 101);
  const auto s = sample(d, 20000, 7, 0);
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    REQUIRE(s.at1d(i) >= 0.0);
    REQUIRE(s.at1d(i) <= 1.0);
    acc += s.at1d(i);
    acc2 += s.at1d(i) * s.at1d(i);
  }
  CHECK(std::abs(acc / s.size() - 0.5) < 0.01);
  CHECK(std::abs(acc2 / s.size() - 1.0 / 3.0) < 0.01);
}

TEST_CASE("piecewise linear integrals against each kind") {
  // |x| against uniform on [-1,1].
  const auto d = uniform_density(-1.0, 1.0);
  const std::vector<double> bp{-1.0, 0.0, 1.0}, val{1.0, 0.0, 1.0};
  CHECK(integrate_pwl(d, bp, val) == doctest::Approx(0.5).epsilon(1e-9));

  // Identity (clamped far out) against a mixture recovers its mean.
  const auto g = GaussianMixture::from_1d({0.1, 0.5}, 0.25, 0.0);
  const std::vector<double> line_bp{-50.0, 50.0}, line_val{-50.0, 50.0};
  CHECK(integrate_pwl(g, line_bp, line_val) == doctest::Approx(0.3).epsilon(1e-10));

  // Empirical: plain average of the interpolant.
  const auto e = EmpiricalMeasure::from_1d({-2.0, 0.5});
  const std::vector<double> hat_bp{-1.0, 0.0, 1.0}, hat_val{0.0, 1.0, 0.0};
  CHECK(integrate_pwl(e, hat_bp, hat_val) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("pwl integral against a mixture matches quadrature") {
  const auto g = GaussianMixture::from_1d({-0.4, 1.3}, 0.6, 0.0);
  const std::vector<double> bp{-2.0, -0.5, 0.3, 2.5}, val{0.7, -1.0, 0.4, 0.1};
  // Riemann oracle over a wide window; the function is bounded so tails die
  // with the Gaussian densities.
  double acc = 0.0;
  const int n = 2000001;
  const double lo = -14.0, hi = 14.0, h = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double x = lo + i * h;
    double f;
    if (x <= bp.front()) {
      f = val.front();
    } else if (x >= bp.back()) {
      f = val.back();
    } else {
      auto it = std::upper_bound(bp.begin(), bp.end(), x);
      const std::size_t j = static_cast<std::size_t>(it - bp.begin()) - 1;
      const double t = (x - bp[j]) / (bp[j + 1] - bp[j]);
      f = val[j] + t * (val[j + 1] - val[j]);
    }
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    acc += w * f * g.density_at(x);
  }
  acc *= h;
  CHECK(integrate_pwl(g, bp, val) == doctest::Approx(acc).epsilon(1e-6));
}

TEST_CASE("normal quantile inverts the CDF") {
  for (double p : {1e-7, 1e-3, 0.1, 0.25, 0.5, 0.75, 0.9, 0.999, 1.0 - 1e-7}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}

TEST_CASE("antiderivative of the normal CDF") {
  // A(z) - A(-z) = z for any z by symmetry of phi.
  for (double z : {0.3, 1.0, 2.7}) {
    CHECK(norm_cdf_antideriv(z) - norm_cdf_antideriv(-z) == doctest::Approx(z).epsilon(1e-12));
  }
  CHECK(norm_cdf_antideriv(0.0) == doctest::Approx(norm_pdf(0.0)).epsilon(1e-14));
}

TEST_CASE("invalid constructions are rejected") {
  CHECK_THROWS_AS(DiscreteDensity({0.0, 1.0, 11}, std::vector<double>(11, 2.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(DiscreteDensity({0.0, 1.0, 5}, std::vector<double>(4, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalMeasure(2, {1.0, 2.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(1, {0.0}, -0.5, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(w1_assignment(EmpiricalMeasure::from_1d({0.0}),
                                EmpiricalMeasure::from_1d({0.0, 1.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(norm_quantile(0.0), std::invalid_argument);
}

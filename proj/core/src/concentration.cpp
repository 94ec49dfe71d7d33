#include "mfclab/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfclab/rng.hpp"

namespace mfc {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Fresh-sample streams live far from the per-trial increment streams.
constexpr std::uint64_t kSampleStreamBase = 1ull << 32;
constexpr std::uint64_t kIndependentStreamBase = 1ull << 33;

struct MeanAcc {
  double sum = 0.0;
  double sumsq = 0.0;
  int n = 0;

  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  double mean() const { return sum / n; }
  double se() const {
    if (n < 2) return 0.0;
    const double var = std::max(0.0, (sumsq - sum * sum / n) / (n - 1));
    return std::sqrt(var / n);
  }
};

GaussianMixture law_at(const EmpiricalMeasure& start, std::span<const double> drift,
                       double h, std::span<const double> extra_offset) {
  std::vector<double> offset(static_cast<std::size_t>(start.dim), 0.0);
  for (int c = 0; c < start.dim; ++c) {
    offset[c] = drift[c] * h;
    if (!extra_offset.empty()) offset[c] += extra_offset[c];
  }
  return GaussianMixture(start.dim, start.points, 2.0 * h, std::move(offset));
}

// Exact in d = 1; in d = 2 the law is proxied by a fresh equal-size sample.
double cloud_vs_law(const GaussianMixture& law, const EmpiricalMeasure& cloud,
                    std::uint64_t seed, std::uint64_t stream) {
  if (cloud.dim == 1) return w1_exact_1d(Measure{law}, Measure{cloud});
  return w1_assignment(sample(Measure{law}, cloud.size(), seed, stream), cloud);
}

void check_config(const ConcentrationConfig& cfg) {
  require(cfg.dim_d == 1 || cfg.dim_d == 2, "concentration: dim must be 1 or 2");
  require(cfg.n_particles >= 2, "concentration: need at least 2 particles");
  require(cfg.trials >= 30, "concentration: need at least 30 trials");
  require(static_cast<int>(cfg.drift_alpha.size()) == cfg.dim_d,
          "concentration: drift dimension mismatch");
  require(cfg.initial_points.dim == cfg.dim_d,
          "concentration: initial point dimension mismatch");
  require(cfg.initial_points.size() == cfg.n_particles,
          "concentration: initial point count mismatch");
  require(cfg.horizon_h >= 0.0, "concentration: horizon must be >= 0");
  require(cfg.h_levels >= 1, "concentration: need at least one h level");
}

}  // namespace

EmpiricalMeasure simulate_cloud(const EmpiricalMeasure& start,
                                std::span<const double> drift, double h,
                                std::uint64_t seed, std::uint64_t stream) {
  require(static_cast<int>(drift.size()) == start.dim, "simulate: drift dimension mismatch");
  require(h >= 0.0, "simulate: time must be >= 0");
  CounterRng rng(seed, stream);
  const double root = std::sqrt(2.0 * h);
  std::vector<double> pts(start.points);
  for (int i = 0; i < start.size(); ++i)
    for (int c = 0; c < start.dim; ++c)
      pts[static_cast<std::size_t>(i) * start.dim + c] += drift[c] * h + root * rng.normal();
  return EmpiricalMeasure(start.dim, std::move(pts));
}

std::vector<ConcentrationRow> run_single_group(const ConcentrationConfig& cfg) {
  check_config(cfg);
  if (cfg.horizon_h == 0.0) return {{0.0, 0.0, 0.0}};

  const int d = cfg.dim_d, n = cfg.n_particles, levels = cfg.h_levels;
  std::vector<MeanAcc> acc(static_cast<std::size_t>(levels));
  std::vector<double> xi(static_cast<std::size_t>(n) * d);
  for (int t = 0; t < cfg.trials; ++t) {
    CounterRng rng(cfg.seed, 1 + static_cast<std::uint64_t>(t));
    for (double& x : xi) x = rng.normal();
    for (int k = 0; k < levels; ++k) {
      const double h = cfg.horizon_h * std::pow(2.0, -k);
      const double root = std::sqrt(2.0 * h);
      std::vector<double> pts(cfg.initial_points.points);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c)
          pts[static_cast<std::size_t>(i) * d + c] +=
              cfg.drift_alpha[c] * h + root * xi[static_cast<std::size_t>(i) * d + c];
      const EmpiricalMeasure cloud(d, std::move(pts));
      const GaussianMixture law = law_at(cfg.initial_points, cfg.drift_alpha, h, {});
      acc[k].add(cloud_vs_law(law, cloud, cfg.seed,
                              kSampleStreamBase + static_cast<std::uint64_t>(t) * levels + k));
    }
  }
  std::vector<ConcentrationRow> rows(static_cast<std::size_t>(levels));
  for (int k = 0; k < levels; ++k)
    rows[k] = {cfg.horizon_h * std::pow(2.0, -k), acc[k].mean(), acc[k].se()};
  return rows;
}

GroupedResult run_grouped(const GroupedConfig& cfg, double h, int trials,
                          std::uint64_t seed) {
  require(!cfg.groups.empty(), "grouped: need at least one group");
  require(trials >= 30, "grouped: need at least 30 trials");
  require(h >= 0.0, "grouped: time must be >= 0");
  const int d = cfg.groups.front().initial_points.dim;
  require(d == 1 || d == 2, "grouped: dim must be 1 or 2");
  int total = 0;
  for (const auto& g : cfg.groups) {
    require(g.initial_points.dim == d, "grouped: mixed dimensions");
    require(g.initial_points.size() >= 1, "grouped: empty group");
    require(static_cast<int>(g.drift.size()) == d, "grouped: drift dimension mismatch");
    total += g.initial_points.size();
  }

  const int J = static_cast<int>(cfg.groups.size());
  // Pooled law: every center advanced by its own group drift, shared blur.
  std::vector<double> pooled_centers;
  pooled_centers.reserve(static_cast<std::size_t>(total) * d);
  for (const auto& g : cfg.groups)
    for (int i = 0; i < g.initial_points.size(); ++i)
      for (int c = 0; c < d; ++c)
        pooled_centers.push_back(g.initial_points.points[static_cast<std::size_t>(i) * d + c] +
                                 g.drift[c] * h);
  const GaussianMixture pooled_law(d, std::move(pooled_centers), 2.0 * h,
                                   std::vector<double>(static_cast<std::size_t>(d), 0.0));

  MeanAcc agg;
  std::vector<MeanAcc> per(static_cast<std::size_t>(J));
  const double root = std::sqrt(2.0 * h);
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 1 + static_cast<std::uint64_t>(t));
    std::vector<double> pooled_pts;
    pooled_pts.reserve(static_cast<std::size_t>(total) * d);
    for (int j = 0; j < J; ++j) {
      const auto& g = cfg.groups[j];
      std::vector<double> pts(g.initial_points.points);
      for (int i = 0; i < g.initial_points.size(); ++i)
        for (int c = 0; c < d; ++c)
          pts[static_cast<std::size_t>(i) * d + c] += g.drift[c] * h + root * rng.normal();
      pooled_pts.insert(pooled_pts.end(), pts.begin(), pts.end());
      const GaussianMixture law = law_at(g.initial_points, g.drift, h, {});
      per[j].add(cloud_vs_law(law, EmpiricalMeasure(d, std::move(pts)), seed,
                              kSampleStreamBase +
                                  static_cast<std::uint64_t>(t) * (J + 1) + 1 + j));
    }
    agg.add(cloud_vs_law(pooled_law, EmpiricalMeasure(d, std::move(pooled_pts)), seed,
                         kSampleStreamBase + static_cast<std::uint64_t>(t) * (J + 1)));
  }

  GroupedResult out;
  out.aggregate_mean = agg.mean();
  out.aggregate_se = agg.se();
  for (const auto& m : per) out.per_group_mean.push_back(m.mean());
  return out;
}

FournierResult fournier_guillin(const Measure& m, const std::vector<int>& n_list,
                                int trials, std::uint64_t seed) {
  require(measure_dim(m) == 1, "fournier: 1D measures only");
  require(n_list.size() >= 3, "fournier: need at least 3 sizes");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    require(n_list[i] >= 1, "fournier: sizes must be positive");
    require(i == 0 || n_list[i] > n_list[i - 1], "fournier: sizes must increase");
  }
  require(trials >= 30, "fournier: need at least 30 trials");

  FournierResult out;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    MeanAcc acc;
    for (int t = 0; t < trials; ++t) {
      const auto emp = sample(m, n_list[i], seed,
                              1 + static_cast<std::uint64_t>(i) * trials + t);
      acc.add(w1_exact_1d(Measure{emp}, m));
    }
    out.ns.push_back(static_cast<double>(n_list[i]));
    out.mean_w1.push_back(acc.mean());
    out.std_error.push_back(acc.se());
  }
  // A point mass yields identically zero distances; clamp so the fit stays
  // defined (flat line, slope 0).
  std::vector<double> ys(out.mean_w1);
  for (double& y : ys) y = std::max(y, 1e-300);
  out.fit = loglog_fit(out.ns, ys);
  out.ci = bootstrap_ci(out.ns, ys, out.std_error, 400, seed);
  return out;
}

ShiftCheckResult common_noise_shift_check(const ConcentrationConfig& cfg,
                                          double a0, int trials,
                                          std::uint64_t seed) {
  ConcentrationConfig local = cfg;
  local.trials = trials;
  local.seed = seed;
  check_config(local);
  require(a0 >= 0.0, "shift check: a0 must be >= 0");

  const int d = cfg.dim_d, n = cfg.n_particles;
  const double h = cfg.horizon_h;
  const double root = std::sqrt(2.0 * h);
  const double common_root = std::sqrt(2.0 * a0 * h);

  ShiftCheckResult out;
  MeanAcc with, without;
  std::vector<double> z(static_cast<std::size_t>(d));
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 1 + static_cast<std::uint64_t>(t));
    std::vector<double> pts(cfg.initial_points.points);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c)
        pts[static_cast<std::size_t>(i) * d + c] += cfg.drift_alpha[c] * h + root * rng.normal();
    for (int c = 0; c < d; ++c) z[c] = common_root * rng.normal();

    // The translated-back cloud is the pre-shift one, kept exactly.
    std::vector<double> shifted_pts(pts);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c) pts[static_cast<std::size_t>(i) * d + c] += z[c];
    const EmpiricalMeasure cloud(d, std::move(pts));
    const EmpiricalMeasure cloud_back(d, std::move(shifted_pts));

    const GaussianMixture law = law_at(cfg.initial_points, cfg.drift_alpha, h, z);
    const GaussianMixture law_back = law_at(cfg.initial_points, cfg.drift_alpha, h, {});
    double before, after;
    if (d == 1) {
      before = w1_exact_1d(Measure{law}, Measure{cloud});
      after = w1_exact_1d(Measure{law_back}, Measure{cloud_back});
    } else {
      // The same fresh sample, translated along with both arguments, keeps
      // the assignment costs aligned pair by pair.
      const auto fresh = sample(Measure{law}, n, seed,
                                kSampleStreamBase + static_cast<std::uint64_t>(t));
      std::vector<double> fresh_back(fresh.points);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c) fresh_back[static_cast<std::size_t>(i) * d + c] -= z[c];
      before = w1_assignment(fresh, cloud);
      after = w1_assignment(EmpiricalMeasure(d, std::move(fresh_back)), cloud_back);
    }
    out.max_pair_diff = std::max(out.max_pair_diff, std::abs(before - after));
    with.add(after);

    CounterRng rng2(seed, kIndependentStreamBase + static_cast<std::uint64_t>(t));
    std::vector<double> wo_pts(cfg.initial_points.points);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c)
        wo_pts[static_cast<std::size_t>(i) * d + c] += cfg.drift_alpha[c] * h + root * rng2.normal();
    const EmpiricalMeasure wo_cloud(d, std::move(wo_pts));
    if (d == 1) {
      without.add(w1_exact_1d(Measure{law_back}, Measure{wo_cloud}));
    } else {
      without.add(w1_assignment(sample(Measure{law_back}, n, seed,
                                       kIndependentStreamBase + kSampleStreamBase +
                                           static_cast<std::uint64_t>(t)),
                                wo_cloud));
    }
  }
  out.mean_with = with.mean();
  out.se_with = with.se();
  out.mean_without = without.mean();
  out.se_without = without.se();
  return out;
}

}  // namespace mfc

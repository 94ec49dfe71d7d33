#include "mfclab/lipnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfclab/rng.hpp"

namespace mfc {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

long long pow3(int k) {
  long long p = 1;
  for (int i = 0; i < k; ++i) p *= 3;
  return p;
}

// Integral of the hat (or taper-extended end hat) at net breakpoint i against
// m.  The sum of v_i * hat_i over levels reproduces the taper extension of
// any net member exactly, which makes the dual objective linear in the
// member's nodal values.
double hat_integral(const Measure& m, int i, int steps, double lo, double step,
                    double radius) {
  std::vector<double> bp, vl;
  if (i == 0) {
    bp = {-2.0 * radius, lo, lo + step};
    vl = {0.0, 1.0, 0.0};
  } else if (i == steps) {
    bp = {lo + (steps - 1) * step, radius, 2.0 * radius};
    vl = {0.0, 1.0, 0.0};
  } else {
    const double b = lo + i * step;
    bp = {b - step, b, b + step};
    vl = {0.0, 1.0, 0.0};
  }
  return integrate_pwl(m, bp, vl);
}

}  // namespace

double PiecewiseLinearLip::operator()(double x) const {
  if (x <= breakpoints.front()) return values.front();
  if (x >= breakpoints.back()) return values.back();
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - breakpoints.begin()) - 1;
  const double t = (x - breakpoints[i]) / (breakpoints[i + 1] - breakpoints[i]);
  return values[i] + t * (values[i + 1] - values[i]);
}

void require_lipschitz(const PiecewiseLinearLip& phi) {
  require(phi.breakpoints.size() == phi.values.size(), "lip: size mismatch");
  require(phi.breakpoints.size() >= 2, "lip: need at least 2 breakpoints");
  for (std::size_t i = 0; i + 1 < phi.breakpoints.size(); ++i) {
    const double dx = phi.breakpoints[i + 1] - phi.breakpoints[i];
    require(dx > 0.0, "lip: breakpoints must increase");
    require(std::abs(phi.values[i + 1] - phi.values[i]) <= dx * (1.0 + 1e-12),
            "lip: slope exceeds 1");
  }
}

PiecewiseLinearLip extend_tilde(const PiecewiseLinearLip& phi, double radius_R) {
  require(radius_R > 0.0, "extend: radius must be positive");
  require_lipschitz(phi);
  const double R = radius_R;
  const double vl = phi(-R), vr = phi(R);
  require(std::abs(vl) <= R + 1e-9 && std::abs(vr) <= R + 1e-9,
          "extend: |values| at the radius exceed it");
  PiecewiseLinearLip out;
  out.breakpoints = {-2.0 * R, -R};
  out.values = {0.0, vl};
  for (std::size_t i = 0; i < phi.breakpoints.size(); ++i) {
    const double b = phi.breakpoints[i];
    if (b > -R + 1e-12 * R && b < R - 1e-12 * R) {
      out.breakpoints.push_back(b);
      out.values.push_back(phi.values[i]);
    }
  }
  out.breakpoints.push_back(R);
  out.values.push_back(vr);
  out.breakpoints.push_back(2.0 * R);
  out.values.push_back(0.0);
  return out;
}

double integrate_tapered(const PiecewiseLinearLip& phi, double radius_R,
                         const Measure& m) {
  const PiecewiseLinearLip ext = extend_tilde(phi, radius_R);
  return integrate_pwl(m, ext.breakpoints, ext.values);
}

LipNet build_net_1d(double epsilon, double radius_R) {
  require(epsilon > 0.0 && radius_R > 0.0, "net: positive epsilon and radius");
  require(epsilon <= radius_R, "net: epsilon must not exceed the radius");
  const int steps = static_cast<int>(std::ceil(2.0 * radius_R / epsilon - 1e-12));
  require(steps <= 24, "net: more than 24 steps");

  LipNet net;
  net.epsilon = epsilon;
  net.radius_R = radius_R;
  net.steps = steps;
  net.step = 2.0 * radius_R / steps;
  net.generated = true;
  net.member_count = (steps + 1) * pow3(steps);

  // Materialize only while the full enumeration stays small; the dual bound
  // handles larger nets without a member list.
  if (net.member_count <= 200000) {
    std::vector<std::vector<double>> seen;
    seen.reserve(static_cast<std::size_t>(net.member_count));
    std::vector<double> vals(static_cast<std::size_t>(steps) + 1);
    for (int anchor = 0; anchor <= steps; ++anchor) {
      for (long long code = 0; code < pow3(steps); ++code) {
        vals[0] = -radius_R + anchor * net.step;
        long long c = code;
        for (int s = 0; s < steps; ++s) {
          const int move = static_cast<int>(c % 3) - 1;
          c /= 3;
          vals[static_cast<std::size_t>(s) + 1] =
              std::clamp(vals[s] + move * net.step, -radius_R, radius_R);
        }
        seen.push_back(vals);
      }
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    net.members.reserve(seen.size());
    std::vector<double> bps(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) bps[i] = -radius_R + i * net.step;
    for (auto& v : seen) net.members.push_back({bps, std::move(v)});
    net.member_count = static_cast<long long>(net.members.size());
  }
  return net;
}

double dual_lower_bound(const Measure& mu, const Measure& nu, const LipNet& net) {
  require(measure_dim(mu) == 1 && measure_dim(nu) == 1, "dual: 1D measures only");
  if (!net.generated) {
    require(!net.members.empty(), "dual: net has no members");
    double best = -1e300;
    for (const auto& phi : net.members)
      best = std::max(best, integrate_tapered(phi, net.radius_R, mu) -
                                integrate_tapered(phi, net.radius_R, nu));
    return best;
  }

  // The objective is sum_i w_i * v_i over clamped step-quantized value paths,
  // so a forward maximum over (step, level) states scans the whole
  // enumeration exactly.
  const int K = net.steps;
  const double lo = -net.radius_R;
  std::vector<double> w(static_cast<std::size_t>(K) + 1);
  for (int i = 0; i <= K; ++i)
    w[i] = hat_integral(mu, i, K, lo, net.step, net.radius_R) -
           hat_integral(nu, i, K, lo, net.step, net.radius_R);

  const auto level = [&](int j) { return lo + j * net.step; };
  std::vector<double> best(static_cast<std::size_t>(K) + 1);
  std::vector<double> next(static_cast<std::size_t>(K) + 1);
  for (int j = 0; j <= K; ++j) best[j] = w[0] * level(j);
  for (int i = 1; i <= K; ++i) {
    std::fill(next.begin(), next.end(), -1e300);
    for (int j = 0; j <= K; ++j) {
      for (int move = -1; move <= 1; ++move) {
        const int jt = std::clamp(j + move, 0, K);
        next[jt] = std::max(next[jt], best[j] + w[i] * level(jt));
      }
    }
    best.swap(next);
  }
  return *std::max_element(best.begin(), best.end());
}

TailCurve tail_experiment(const PiecewiseLinearLip& phi, int n_particles,
                          double h, double alpha, int trials,
                          std::uint64_t seed) {
  require_lipschitz(phi);
  require(n_particles >= 1, "tail: need at least one particle");
  require(h > 0.0, "tail: horizon must be positive");
  require(trials >= 10000, "tail: need at least 10000 trials");

  const GaussianMixture law = GaussianMixture::from_1d({0.0}, 2.0 * h, alpha * h);
  const double ephi = integrate_pwl(Measure{law}, phi.breakpoints, phi.values);

  const double root = std::sqrt(2.0 * h);
  std::vector<double> stat(static_cast<std::size_t>(trials));
  double mean = 0.0;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 1 + static_cast<std::uint64_t>(t));
    double acc = 0.0;
    for (int k = 0; k < n_particles; ++k)
      acc += phi(alpha * h + root * rng.normal());
    stat[t] = ephi - acc / n_particles;
    mean += stat[t];
  }
  mean /= trials;
  double var = 0.0;
  for (double s : stat) var += (s - mean) * (s - mean);
  var /= std::max(1, trials - 1);

  TailCurve out;
  out.statistic_mean = mean;
  out.statistic_variance = var;
  out.trials = trials;

  std::sort(stat.begin(), stat.end());
  const double xmax = stat.back();
  if (xmax <= 0.0) return out;
  const int levels = 40;
  for (int j = 0; j < levels; ++j) {
    const double x = xmax * j / levels;
    const auto cnt = stat.end() - std::upper_bound(stat.begin(), stat.end(), x);
    if (cnt == 0) break;
    out.xs.push_back(x);
    out.log_tail.push_back(std::log(static_cast<double>(cnt) / trials));
  }
  return out;
}

}  // namespace mfc

#include "mfclab/rates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfclab/rng.hpp"

namespace mfc {

namespace {

void validate_points(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("loglog_fit: size mismatch");
  if (xs.size() < 3) throw std::invalid_argument("loglog_fit: needs at least 3 points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::invalid_argument("loglog_fit: coordinates must be positive");
  }
}

RateFit fit_logged(const std::vector<double>& lx, const std::vector<double>& ly) {
  const std::size_t n = lx.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0, span = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
    span = std::max(span, std::abs(lx[i]));
  }
  // Centered sums; roundoff can leave sxx tiny but nonzero when all
  // abscissae coincide, so the degeneracy test is relative.
  if (sxx <= 1e-12 * std::max(1.0, span * span))
    throw std::invalid_argument("loglog_fit: degenerate abscissae");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  // Constant ordinates leave nothing to explain; the exact fit scores 1.
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

}  // namespace

RateFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  validate_points(xs, ys);
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  return fit_logged(lx, ly);
}

SlopeCi bootstrap_ci(const std::vector<double>& xs, const std::vector<double>& ys,
                     const std::vector<double>& stderrs, int resamples, std::uint64_t seed,
                     double confidence) {
  validate_points(xs, ys);
  if (stderrs.size() != ys.size()) throw std::invalid_argument("bootstrap_ci: stderr size mismatch");
  for (double s : stderrs)
    if (!(s >= 0.0)) throw std::invalid_argument("bootstrap_ci: stderrs must be >= 0");
  if (resamples < 200) throw std::invalid_argument("bootstrap_ci: needs at least 200 resamples");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("bootstrap_ci: confidence must lie in (0,1)");

  std::vector<double> lx(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) lx[i] = std::log(xs[i]);

  std::vector<double> slopes(resamples);
  std::vector<double> ly(ys.size());
  for (int b = 0; b < resamples; ++b) {
    CounterRng rng(seed, 0x626f6f74u + static_cast<std::uint64_t>(b));
    for (std::size_t i = 0; i < ys.size(); ++i) {
      double y = ys[i] + stderrs[i] * rng.normal();
      // a perturbed value at or below zero carries no log-scale information;
      // floor it well below the observation instead of discarding the draw
      y = std::max(y, 1e-6 * ys[i]);
      ly[i] = std::log(y);
    }
    slopes[b] = fit_logged(lx, ly).slope;
  }
  std::sort(slopes.begin(), slopes.end());
  const double alpha = 0.5 * (1.0 - confidence);
  auto percentile = [&](double q) {
    const double pos = q * (resamples - 1);
    const int i = static_cast<int>(pos);
    if (i + 1 >= resamples) return slopes[resamples - 1];
    const double t = pos - i;
    return slopes[i] * (1.0 - t) + slopes[i + 1] * t;
  };
  return SlopeCi{percentile(alpha), percentile(1.0 - alpha)};
}

}  // namespace mfc

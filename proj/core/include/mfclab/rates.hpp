#pragma once

#include <cstdint>
#include <vector>

namespace mfc {

// Least-squares fit of log y = intercept + slope * log x.  r_squared is the
// explained-variance fraction of the logged ordinates; exactly collinear data
// give 1, and so does constant data (the fit is then exact).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

// Closed-form fit; requires at least 3 points, all coordinates positive.
RateFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys);

struct SlopeCi {
  double lo = 0.0;
  double hi = 0.0;
};

// Parametric bootstrap: resamples y_i + stderr_i * normal draws, refits, and
// returns the percentile interval of the slope at the given confidence level.
// Requires resamples >= 200.  Zero stderrs collapse the interval onto the
// point fit.
SlopeCi bootstrap_ci(const std::vector<double>& xs, const std::vector<double>& ys,
                     const std::vector<double>& stderrs, int resamples, std::uint64_t seed,
                     double confidence = 0.95);

}  // namespace mfc

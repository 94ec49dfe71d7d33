#include "mfclab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mfclab/rng.hpp"

namespace mfc {

namespace {

constexpr double kMassTol = 1e-9;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

DiscreteDensity::DiscreteDensity(Grid1D g, std::vector<double> w) : grid(g), weights(std::move(w)) {
  require(static_cast<int>(weights.size()) == grid.n, "DiscreteDensity: weight count must match grid");
  require(all_finite(weights), "DiscreteDensity: weights must be finite");
  for (double x : weights) require(x >= 0.0, "DiscreteDensity: weights must be nonnegative");
  require(std::abs(mass() - 1.0) <= kMassTol, "DiscreteDensity: trapezoidal mass must be 1");
}

DiscreteDensity DiscreteDensity::normalized(Grid1D g, std::vector<double> w) {
  require(static_cast<int>(w.size()) == g.n, "DiscreteDensity: weight count must match grid");
  for (double x : w) require(x >= 0.0 && std::isfinite(x), "DiscreteDensity: weights must be nonnegative");
  const double m = trapezoid_sum(g, w);
  require(m > 0.0, "DiscreteDensity: cannot normalize zero mass");
  for (double& x : w) x /= m;
  return DiscreteDensity(g, std::move(w));
}

DiscreteDensity DiscreteDensity::gaussian(Grid1D g, double mean, double variance) {
  require(variance > 0.0, "DiscreteDensity::gaussian: variance must be positive");
  std::vector<double> w(g.n);
  const double s = std::sqrt(variance);
  for (int i = 0; i < g.n; ++i) w[i] = norm_pdf((g.node(i) - mean) / s) / s;
  return normalized(g, std::move(w));
}

double DiscreteDensity::density_at(double x) const {
  if (x <= grid.lo || x >= grid.hi) {
    if (x == grid.lo) return weights.front();
    if (x == grid.hi) return weights.back();
    return 0.0;
  }
  const double h = grid.spacing();
  const int i = std::min(grid.n - 2, static_cast<int>((x - grid.lo) / h));
  const double t = (x - grid.node(i)) / h;
  return weights[i] * (1.0 - t) + weights[i + 1] * t;
}

EmpiricalMeasure::EmpiricalMeasure(int d, std::vector<double> pts) : dim(d), points(std::move(pts)) {
  require(dim >= 1, "EmpiricalMeasure: dimension must be >= 1");
  require(!points.empty(), "EmpiricalMeasure: needs at least one point");
  require(static_cast<int>(points.size()) % dim == 0, "EmpiricalMeasure: point data not divisible by dim");
  require(all_finite(points), "EmpiricalMeasure: coordinates must be finite");
}

EmpiricalMeasure EmpiricalMeasure::from_1d(std::vector<double> xs) {
  return EmpiricalMeasure(1, std::move(xs));
}

GaussianMixture::GaussianMixture(int d, std::vector<double> c, double scale_, std::vector<double> offset_)
    : dim(d), centers(std::move(c)), scale(scale_), offset(std::move(offset_)) {
  require(dim >= 1, "GaussianMixture: dimension must be >= 1");
  require(!centers.empty(), "GaussianMixture: needs at least one center");
  require(static_cast<int>(centers.size()) % dim == 0, "GaussianMixture: center data not divisible by dim");
  require(static_cast<int>(offset.size()) == dim, "GaussianMixture: offset dimension mismatch");
  require(scale >= 0.0 && std::isfinite(scale), "GaussianMixture: scale must be >= 0");
  require(all_finite(centers) && all_finite(offset), "GaussianMixture: data must be finite");
}

GaussianMixture GaussianMixture::from_1d(std::vector<double> centers, double scale, double offset) {
  return GaussianMixture(1, std::move(centers), scale, {offset});
}

EmpiricalMeasure GaussianMixture::as_empirical() const {
  std::vector<double> pts(centers);
  const int n = size();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < dim; ++c) pts[static_cast<std::size_t>(i) * dim + c] += offset[c];
  return EmpiricalMeasure(dim, std::move(pts));
}

double GaussianMixture::density_at(double x) const {
  require(dim == 1 && scale > 0.0, "GaussianMixture::density_at: needs d = 1 and scale > 0");
  const double s = std::sqrt(scale);
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) acc += norm_pdf((x - center1d(i)) / s) / s;
  return acc / size();
}

double GaussianMixture::cdf_at(double x) const {
  require(dim == 1 && scale > 0.0, "GaussianMixture::cdf_at: needs d = 1 and scale > 0");
  const double s = std::sqrt(scale);
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) acc += norm_cdf((x - center1d(i)) / s);
  return acc / size();
}

int measure_dim(const Measure& m) {
  return std::visit([](const auto& v) -> int {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, DiscreteDensity>) return 1;
    else return v.dim;
  }, m);
}

// --- normal helpers ---

double norm_pdf(double z) { return std::exp(-0.5 * z * z) * 0.3989422804014326779; }

double norm_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

double norm_quantile(double p) {
  require(p > 0.0 && p < 1.0, "norm_quantile: p must lie in (0,1)");
  // Acklam's rational approximation, then two Newton corrections.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01, -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = norm_cdf(x) - p;
    const double u = e / std::max(norm_pdf(x), 1e-300);
    x -= u / (1.0 + 0.5 * x * u);  // Halley step
  }
  return x;
}

double norm_cdf_antideriv(double z) { return z * norm_cdf(z) + norm_pdf(z); }

// --- W1 machinery ---

namespace {

enum class Kind { Atoms, Mixture, Density };

struct Classified {
  Kind kind;
  std::vector<double> atoms;              // sorted, Kind::Atoms
  const GaussianMixture* mix = nullptr;   // Kind::Mixture (scale > 0)
  const DiscreteDensity* dens = nullptr;  // Kind::Density
};

Classified classify_1d(const Measure& m) {
  Classified out{Kind::Atoms, {}, nullptr, nullptr};
  if (const auto* e = std::get_if<EmpiricalMeasure>(&m)) {
    require(e->dim == 1, "w1_exact_1d: empirical measure must be 1D");
    out.atoms = e->points;
  } else if (const auto* g = std::get_if<GaussianMixture>(&m)) {
    require(g->dim == 1, "w1_exact_1d: mixture must be 1D");
    if (g->scale > 0.0) {
      out.kind = Kind::Mixture;
      out.mix = g;
      return out;
    }
    out.atoms.resize(g->size());
    for (int i = 0; i < g->size(); ++i) out.atoms[i] = g->center1d(i);
  } else {
    out.kind = Kind::Density;
    out.dens = &std::get<DiscreteDensity>(m);
    return out;
  }
  std::sort(out.atoms.begin(), out.atoms.end());
  return out;
}

// CDF, its antiderivative, and quantiles for the continuous kinds.  Densities
// are renormalized by their trapezoidal mass (within 1e-9 of 1 by invariant)
// so the CDF reaches exactly 1 and tail integrals stay finite.
struct ContinuousCdf {
  const GaussianMixture* mix = nullptr;
  const DiscreteDensity* dens = nullptr;
  double sigma = 0.0;
  double inv_mass = 1.0;
  std::vector<double> cum;   // density: unnormalized CDF at each node
  std::vector<double> cumA;  // density: unnormalized antiderivative of the CDF at each node

  explicit ContinuousCdf(const Classified& c) : mix(c.mix), dens(c.dens) {
    if (mix) {
      sigma = std::sqrt(mix->scale);
      return;
    }
    const auto& g = dens->grid;
    const double h = g.spacing();
    cum.resize(g.n, 0.0);
    cumA.resize(g.n, 0.0);
    for (int i = 1; i < g.n; ++i) {
      const double w0 = dens->weights[i - 1];
      const double dw = (dens->weights[i] - w0) / h;
      cum[i] = cum[i - 1] + 0.5 * h * (w0 + dens->weights[i]);
      cumA[i] = cumA[i - 1] + cum[i - 1] * h + 0.5 * w0 * h * h + dw * h * h * h / 6.0;
    }
    inv_mass = 1.0 / cum.back();
  }

  double cdf(double x) const {
    if (mix) return mix->cdf_at(x);
    const auto& g = dens->grid;
    if (x <= g.lo) return 0.0;
    if (x >= g.hi) return 1.0;
    const double h = g.spacing();
    const int i = std::min(g.n - 2, static_cast<int>((x - g.lo) / h));
    const double t = x - g.node(i);
    const double dw = (dens->weights[i + 1] - dens->weights[i]) / h;
    return (cum[i] + dens->weights[i] * t + 0.5 * dw * t * t) * inv_mass;
  }

  // integral of cdf over (-inf, x]
  double antideriv(double x) const {
    if (mix) {
      double acc = 0.0;
      for (int i = 0; i < mix->size(); ++i)
        acc += sigma * norm_cdf_antideriv((x - mix->center1d(i)) / sigma);
      return acc / mix->size();
    }
    const auto& g = dens->grid;
    if (x <= g.lo) return 0.0;
    if (x >= g.hi) return cumA.back() * inv_mass + (x - g.hi);
    const double h = g.spacing();
    const int i = std::min(g.n - 2, static_cast<int>((x - g.lo) / h));
    const double t = x - g.node(i);
    const double dw = (dens->weights[i + 1] - dens->weights[i]) / h;
    return (cumA[i] + cum[i] * t + 0.5 * dens->weights[i] * t * t + dw * t * t * t / 6.0) * inv_mass;
  }

  double mean() const {
    if (mix) {
      double acc = 0.0;
      for (int i = 0; i < mix->size(); ++i) acc += mix->center1d(i);
      return acc / mix->size();
    }
    // mean = hi - integral of the CDF over the support
    return dens->grid.hi - cumA.back() * inv_mass;
  }

  double support_lo() const {
    if (dens) return dens->grid.lo;
    double lo = mix->center1d(0);
    for (int i = 1; i < mix->size(); ++i) lo = std::min(lo, mix->center1d(i));
    return lo - 10.0 * sigma;
  }
  double support_hi() const {
    if (dens) return dens->grid.hi;
    double hi = mix->center1d(0);
    for (int i = 1; i < mix->size(); ++i) hi = std::max(hi, mix->center1d(i));
    return hi + 10.0 * sigma;
  }

  // x with cdf(x) = c, for c strictly inside the CDF range over [lo, hi].
  double quantile(double c, double lo, double hi) const {
    if (mix && mix->size() == 1) {
      double x = mix->center1d(0) + sigma * norm_quantile(c);
      return std::clamp(x, lo, hi);
    }
    double a = lo, b = hi;
    for (int it = 0; it < 90 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
      const double mid = 0.5 * (a + b);
      (cdf(mid) < c ? a : b) = mid;
    }
    return 0.5 * (a + b);
  }
};

// W1 between two atom lists (sorted), masses 1/n and 1/m.
double w1_atoms_atoms(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  if (n == m) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
    return acc / n;
  }
  // integrate |F_a - F_b| across the merged breakpoints
  double acc = 0.0;
  int i = 0, j = 0;
  double prev = std::min(a[0], b[0]);
  while (i < n || j < m) {
    const double xa = i < n ? a[i] : std::numeric_limits<double>::infinity();
    const double xb = j < m ? b[j] : std::numeric_limits<double>::infinity();
    const double x = std::min(xa, xb);
    acc += std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m) * (x - prev);
    prev = x;
    while (i < n && a[i] == x) ++i;
    while (j < m && b[j] == x) ++j;
  }
  return acc;
}

// Exact W1 between sorted atoms and a continuous CDF.
double w1_atoms_continuous(const std::vector<double>& atoms, const ContinuousCdf& F) {
  const int n = static_cast<int>(atoms.size());
  // Left tail: atom CDF is 0 below the first atom, so the integrand is F.
  double acc = F.antideriv(atoms.front());
  // Interior segments at level i/n between consecutive atoms.  With
  // G(x) = antideriv(x) - c*x the integrand is |G'|; F is monotone, so G has
  // at most one interior minimum, at the c-quantile.
  double prev_x = atoms.front();
  double prev_A = acc;
  for (int i = 1; i < n; ++i) {
    const double c = static_cast<double>(i) / n;
    const double x = atoms[i];
    const double A = F.antideriv(x);
    if (x > prev_x) {
      const double Fl = F.cdf(prev_x), Fr = F.cdf(x);
      if (Fl >= c || Fr <= c) {
        acc += std::abs((A - c * x) - (prev_A - c * prev_x));
      } else {
        const double xs = F.quantile(c, prev_x, x);
        const double As = F.antideriv(xs);
        const double g_prev = prev_A - c * prev_x, gs = As - c * xs, g_x = A - c * x;
        acc += (g_prev - gs) + (g_x - gs);
      }
    }
    prev_x = x;
    prev_A = A;
  }
  // Right tail: integral of (1 - F) over [x_max, inf) = mean - x_max + A(x_max).
  acc += std::max(0.0, F.mean() - atoms.back() + prev_A);
  return acc;
}

// Adaptive Simpson for |Fa - Fb| on a segment where the sign of (Fa - Fb) is constant.
double simpson_signed(const std::function<double(double)>& D, double a, double fa, double b, double fb,
                      double fm, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = D(lm), frm = D(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_signed(D, a, fa, m, fm, flm, 0.5 * tol, depth - 1) +
         simpson_signed(D, m, fm, b, fb, frm, 0.5 * tol, depth - 1);
}

double integrate_abs_diff(const std::function<double(double)>& D, double a, double b, double tol) {
  // Isolate sign changes on a scan grid, then integrate |D| piecewise.
  const int kScan = 16;
  double total = 0.0;
  std::vector<double> xs(kScan + 1), fs(kScan + 1);
  for (int i = 0; i <= kScan; ++i) {
    xs[i] = a + (b - a) * i / kScan;
    fs[i] = D(xs[i]);
  }
  double seg_lo = xs[0], f_lo = fs[0];
  for (int i = 0; i < kScan; ++i) {
    double seg_hi = xs[i + 1], f_hi = fs[i + 1];
    if (f_lo == 0.0 || f_hi == 0.0 || (f_lo > 0) == (f_hi > 0)) {
      const double fm = D(0.5 * (seg_lo + seg_hi));
      total += std::abs(simpson_signed(D, seg_lo, f_lo, seg_hi, f_hi, fm, tol, 28));
      seg_lo = seg_hi;
      f_lo = f_hi;
      continue;
    }
    double lo = seg_lo, hi = seg_hi, flo = f_lo;
    for (int it = 0; it < 80 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = D(mid);
      if (fm == 0.0) { lo = hi = mid; break; }
      if ((fm > 0) == (flo > 0)) { lo = mid; flo = fm; } else hi = mid;
    }
    const double root = 0.5 * (lo + hi);
    const double fm1 = D(0.5 * (seg_lo + root));
    total += std::abs(simpson_signed(D, seg_lo, f_lo, root, 0.0, fm1, tol, 28));
    seg_lo = root;
    f_lo = 0.0;
  }
  return total;
}

double w1_continuous_continuous(const ContinuousCdf& A, const ContinuousCdf& B) {
  const double lo = std::min(A.support_lo(), B.support_lo());
  const double hi = std::max(A.support_hi(), B.support_hi());
  auto D = [&](double x) { return A.cdf(x) - B.cdf(x); };
  // Split at representation breakpoints so each piece is smooth.
  std::vector<double> cuts{lo, hi};
  auto add_cuts = [&](const ContinuousCdf& C) {
    if (C.dens)
      for (int i = 0; i < C.dens->grid.n; ++i) cuts.push_back(C.dens->grid.node(i));
    else
      for (int i = 0; i < C.mix->size(); ++i) cuts.push_back(C.mix->center1d(i));
  };
  add_cuts(A);
  add_cuts(B);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  const double tol = 1e-12 * std::max(1.0, hi - lo);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i] < lo || cuts[i + 1] > hi) continue;
    if (cuts[i + 1] - cuts[i] < 1e-300) continue;
    total += integrate_abs_diff(D, cuts[i], cuts[i + 1], tol);
  }
  return total;
}

}  // namespace

double w1_exact_1d(const Measure& a, const Measure& b) {
  require(measure_dim(a) == 1 && measure_dim(b) == 1, "w1_exact_1d: measures must be 1D");
  const Classified ca = classify_1d(a);
  const Classified cb = classify_1d(b);
  if (ca.kind == Kind::Atoms && cb.kind == Kind::Atoms) return w1_atoms_atoms(ca.atoms, cb.atoms);
  if (ca.kind == Kind::Atoms) return w1_atoms_continuous(ca.atoms, ContinuousCdf(cb));
  if (cb.kind == Kind::Atoms) return w1_atoms_continuous(cb.atoms, ContinuousCdf(ca));
  return w1_continuous_continuous(ContinuousCdf(ca), ContinuousCdf(cb));
}

namespace {

// Shortest augmenting path assignment (dense, O(n^3)); cost is row-major n*n.
double assignment_min_cost(const std::vector<double>& cost, int n) {
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
        if (minv[j] < delta) { delta = minv[j]; j1 = j; }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
        else minv[j] -= delta;
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost[static_cast<std::size_t>(p[j] - 1) * n + (j - 1)];
  return total;
}

}  // namespace

double w1_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require(a.dim == b.dim, "w1_assignment: dimension mismatch");
  require(a.size() == b.size(), "w1_assignment: clouds must have equal size");
  const int n = a.size(), d = a.dim;
  if (d == 1) {
    std::vector<double> xa(a.points), xb(b.points);
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::abs(xa[i] - xb[i]);
    return acc / n;
  }
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const auto pi = a.point(i);
    for (int j = 0; j < n; ++j) {
      const auto pj = b.point(j);
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += (pi[c] - pj[c]) * (pi[c] - pj[c]);
      cost[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
    }
  }
  return assignment_min_cost(cost, n) / n;
}

namespace {

double abs_norm(std::span<const double> x) {
  double s = 0.0;
  for (double c : x) s += c * c;
  return std::sqrt(s);
}

// E|mu + sigma Z|^p for Z standard normal, p in {1, 2} closed form.
double folded_moment(double mu, double sigma, double p) {
  if (sigma == 0.0) return std::pow(std::abs(mu), p);
  if (p == 1.0) {
    const double z = mu / sigma;
    return sigma * (2.0 * norm_pdf(z) + z * (1.0 - 2.0 * norm_cdf(-z)));
  }
  if (p == 2.0) return mu * mu + sigma * sigma;
  // quadrature fallback over +-10 sigma
  const int n = 400;
  double acc = 0.0;
  const double lo = mu - 10.0 * sigma, hi = mu + 10.0 * sigma, h = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    acc += w * std::pow(std::abs(x), p) * norm_pdf((x - mu) / sigma) / sigma;
  }
  return acc * h;
}

}  // namespace

double moment(const Measure& m, double p) {
  require(p >= 0.0, "moment: order must be >= 0");
  if (const auto* e = std::get_if<EmpiricalMeasure>(&m)) {
    double acc = 0.0;
    for (int i = 0; i < e->size(); ++i) acc += std::pow(abs_norm(e->point(i)), p);
    return acc / e->size();
  }
  if (const auto* d = std::get_if<DiscreteDensity>(&m)) {
    std::vector<double> vals(d->grid.n);
    for (int i = 0; i < d->grid.n; ++i) vals[i] = std::pow(std::abs(d->grid.node(i)), p) * d->weights[i];
    return trapezoid_sum(d->grid, vals);
  }
  const auto& g = std::get<GaussianMixture>(m);
  if (g.dim == 1) {
    const double s = std::sqrt(g.scale);
    double acc = 0.0;
    for (int i = 0; i < g.size(); ++i) acc += folded_moment(g.center1d(i), s, p);
    return acc / g.size();
  }
  require(p == 2.0, "moment: for mixtures with d > 1 only p = 2 is supported");
  double acc = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (int c = 0; c < g.dim; ++c) {
      const double x = g.centers[static_cast<std::size_t>(i) * g.dim + c] + g.offset[c];
      s += x * x;
    }
    acc += s + g.dim * g.scale;
  }
  return acc / g.size();
}

double mean_coordinate_sum(const Measure& m) {
  if (const auto* e = std::get_if<EmpiricalMeasure>(&m)) {
    double acc = 0.0;
    for (double x : e->points) acc += x;
    return acc / e->size();
  }
  if (const auto* d = std::get_if<DiscreteDensity>(&m)) {
    std::vector<double> vals(d->grid.n);
    for (int i = 0; i < d->grid.n; ++i) vals[i] = d->grid.node(i) * d->weights[i];
    return trapezoid_sum(d->grid, vals);
  }
  const auto& g = std::get<GaussianMixture>(m);
  double acc = 0.0;
  for (double c : g.centers) acc += c;
  acc /= g.size();
  for (double o : g.offset) acc += o;
  return acc;
}

Measure pushforward_shift(const Measure& m, std::span<const double> z) {
  require(static_cast<int>(z.size()) == measure_dim(m), "pushforward_shift: shift dimension mismatch");
  if (const auto* e = std::get_if<EmpiricalMeasure>(&m)) {
    EmpiricalMeasure out = *e;
    const int n = out.size();
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < out.dim; ++c) out.points[static_cast<std::size_t>(i) * out.dim + c] += z[c];
    return out;
  }
  if (const auto* d = std::get_if<DiscreteDensity>(&m)) {
    DiscreteDensity out = *d;
    out.grid.lo += z[0];
    out.grid.hi += z[0];
    return out;
  }
  GaussianMixture out = std::get<GaussianMixture>(m);
  for (int c = 0; c < out.dim; ++c) out.offset[c] += z[c];
  return out;
}

Measure pushforward_shift(const Measure& m, double z) {
  return pushforward_shift(m, std::span<const double>(&z, 1));
}

EmpiricalMeasure sample(const Measure& m, int n, std::uint64_t seed, std::uint64_t stream) {
  require(n >= 1, "sample: sample count must be >= 1");
  CounterRng rng(seed, stream);
  if (const auto* d = std::get_if<DiscreteDensity>(&m)) {
    const auto& g = d->grid;
    const double h = g.spacing();
    std::vector<double> cum(g.n, 0.0);
    for (int i = 1; i < g.n; ++i) cum[i] = cum[i - 1] + 0.5 * h * (d->weights[i - 1] + d->weights[i]);
    const double total = cum.back();
    std::vector<double> xs(n);
    for (int k = 0; k < n; ++k) {
      const double u = rng.uniform() * total;
      const int cell = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()) - 1;
      const int i = std::clamp(cell, 0, g.n - 2);
      // invert F(t) = cum[i] + w_i t + dw t^2 / 2 on [0, h] by bisection
      const double target = u - cum[i];
      const double wi = d->weights[i], dw = (d->weights[i + 1] - d->weights[i]) / h;
      double a = 0.0, b = h;
      for (int it = 0; it < 60; ++it) {
        const double t = 0.5 * (a + b);
        ((wi * t + 0.5 * dw * t * t) < target ? a : b) = t;
      }
      xs[k] = g.node(i) + 0.5 * (a + b);
    }
    return EmpiricalMeasure::from_1d(std::move(xs));
  }
  if (const auto* g = std::get_if<GaussianMixture>(&m)) {
    const int d = g->dim;
    const double s = std::sqrt(g->scale);
    std::vector<double> pts(static_cast<std::size_t>(n) * d);
    for (int k = 0; k < n; ++k) {
      const int i = static_cast<int>(rng.below(g->size()));
      for (int c = 0; c < d; ++c)
        pts[static_cast<std::size_t>(k) * d + c] =
            g->centers[static_cast<std::size_t>(i) * d + c] + g->offset[c] + s * rng.normal();
    }
    return EmpiricalMeasure(d, std::move(pts));
  }
  // resampling an empirical measure draws atoms with replacement
  const auto& e = std::get<EmpiricalMeasure>(m);
  std::vector<double> pts(static_cast<std::size_t>(n) * e.dim);
  for (int k = 0; k < n; ++k) {
    const int i = static_cast<int>(rng.below(e.size()));
    for (int c = 0; c < e.dim; ++c)
      pts[static_cast<std::size_t>(k) * e.dim + c] = e.points[static_cast<std::size_t>(i) * e.dim + c];
  }
  return EmpiricalMeasure(e.dim, std::move(pts));
}

namespace {

double pwl_eval(std::span<const double> bx, std::span<const double> by, double x) {
  const int n = static_cast<int>(bx.size());
  if (x <= bx[0]) return by[0];
  if (x >= bx[n - 1]) return by[n - 1];
  const int i = static_cast<int>(std::upper_bound(bx.begin(), bx.end(), x) - bx.begin()) - 1;
  const double t = (x - bx[i]) / (bx[i + 1] - bx[i]);
  return by[i] * (1.0 - t) + by[i + 1] * t;
}

// integral of (alpha + beta (x - a)) against N(mu, sigma^2) restricted to [a, b]
double linear_vs_gaussian(double alpha, double beta, double a, double b, double mu, double sigma) {
  const double za = (a - mu) / sigma, zb = (b - mu) / sigma;
  const double dPhi = norm_cdf(zb) - norm_cdf(za);
  const double mean_piece = mu * dPhi - sigma * (norm_pdf(zb) - norm_pdf(za));
  return (alpha - beta * a) * dPhi + beta * mean_piece;
}

}  // namespace

double integrate_pwl(const Measure& m, std::span<const double> breakpoints,
                     std::span<const double> values) {
  require(breakpoints.size() == values.size() && breakpoints.size() >= 2,
          "integrate_pwl: need matching breakpoints and values, at least 2");
  require(measure_dim(m) == 1, "integrate_pwl: measure must be 1D");
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    require(breakpoints[i] < breakpoints[i + 1], "integrate_pwl: breakpoints must increase");

  if (const auto* e = std::get_if<EmpiricalMeasure>(&m)) {
    double acc = 0.0;
    for (int i = 0; i < e->size(); ++i) acc += pwl_eval(breakpoints, values, e->at1d(i));
    return acc / e->size();
  }
  if (const auto* g = std::get_if<GaussianMixture>(&m)) {
    if (g->scale == 0.0) {
      double acc = 0.0;
      for (int i = 0; i < g->size(); ++i) acc += pwl_eval(breakpoints, values, g->center1d(i));
      return acc / g->size();
    }
    const double sigma = std::sqrt(g->scale);
    const int nb = static_cast<int>(breakpoints.size());
    double acc = 0.0;
    for (int k = 0; k < g->size(); ++k) {
      const double mu = g->center1d(k);
      double comp = values[0] * norm_cdf((breakpoints[0] - mu) / sigma);
      for (int i = 0; i + 1 < nb; ++i) {
        const double beta = (values[i + 1] - values[i]) / (breakpoints[i + 1] - breakpoints[i]);
        comp += linear_vs_gaussian(values[i], beta, breakpoints[i], breakpoints[i + 1], mu, sigma);
      }
      comp += values[nb - 1] * (1.0 - norm_cdf((breakpoints[nb - 1] - mu) / sigma));
      acc += comp;
    }
    return acc / g->size();
  }
  const auto& d = std::get<DiscreteDensity>(m);
  // merge breakpoints with grid nodes; on each piece both factors are linear,
  // so Simpson is exact
  std::vector<double> cuts;
  cuts.reserve(breakpoints.size() + d.grid.n);
  for (int i = 0; i < d.grid.n; ++i) cuts.push_back(d.grid.node(i));
  for (double b : breakpoints)
    if (b > d.grid.lo && b < d.grid.hi) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1], mid = 0.5 * (a + b);
    const double fa = pwl_eval(breakpoints, values, a) * d.density_at(a);
    const double fm = pwl_eval(breakpoints, values, mid) * d.density_at(mid);
    const double fb = pwl_eval(breakpoints, values, b) * d.density_at(b);
    acc += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }
  return acc;
}

}  // namespace mfc

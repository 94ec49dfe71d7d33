#include "mfclab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "mfclab/rng.hpp"

namespace mfc {

namespace {

constexpr double kPi = 3.14159265358979323846;

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& params,
                    const std::set<std::string>& known) {
  for (const auto& [key, value] : params) {
    (void)value;
    if (!known.count(key))
      throw std::invalid_argument("builtin_model: unknown param '" + key + "'");
  }
}

std::string fmt_vec(std::span<const double> v) {
  std::string out = "(";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g", v[i]);
    if (i) out += ", ";
    out += buf;
  }
  return out + ")";
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Per-coordinate drift family: H = |p|^2 + V(x).p with V(x)_c = drift(x_c),
// so L = |a + V(x)|^2 / 4.  drift == 0 recovers the plain quadratic model.
HamiltonianModel drift_hamiltonian(double kappa, int d) {
  HamiltonianModel h;
  const auto drift = [kappa](double xc) { return kappa * std::tanh(xc); };
  h.eval_h = [drift](std::span<const double> x, std::span<const double> p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) acc += p[c] * p[c] + drift(x[c]) * p[c];
    return acc;
  };
  h.grad_p_h = [drift](std::span<const double> x, std::span<const double> p) {
    Vec g(p.size());
    for (std::size_t c = 0; c < p.size(); ++c) g[c] = 2.0 * p[c] + drift(x[c]);
    return g;
  };
  h.grad_x_h = [kappa](std::span<const double> x, std::span<const double> p) {
    Vec g(p.size());
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double t = std::tanh(x[c]);
      g[c] = kappa * (1.0 - t * t) * p[c];
    }
    return g;
  };
  h.eval_l = [drift](std::span<const double> x, std::span<const double> a) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      const double s = a[c] + drift(x[c]);
      acc += 0.25 * s * s;
    }
    return acc;
  };
  h.grad_a_l = [drift](std::span<const double> x, std::span<const double> a) {
    Vec g(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) g[c] = 0.5 * (a[c] + drift(x[c]));
    return g;
  };
  if (kappa == 0.0) {
    h.growth_c = 1.0;
    h.growth_C = 1.0;
  } else {
    h.growth_c = 0.5;
    h.growth_C = std::max({1.0, kappa, 0.5 * kappa * kappa * d});
  }
  return h;
}

enum class MeanShape { Arctan, BumpInverse };

double shape_eval(MeanShape s, double t) {
  return s == MeanShape::Arctan ? std::atan(t) : 1.0 / (1.0 + t * t);
}

double shape_deriv(MeanShape s, double t) {
  if (s == MeanShape::Arctan) return 1.0 / (1.0 + t * t);
  const double q = 1.0 + t * t;
  return -2.0 * t / (q * q);
}

double shape_sup(MeanShape s) { return s == MeanShape::Arctan ? 0.5 * kPi : 1.0; }

// sup_t |shape'(t)|: arctan peaks at 0; the inverse bump at t^2 = 1/3.
double shape_lip(MeanShape s) {
  return s == MeanShape::Arctan ? 1.0 : 3.0 * std::sqrt(3.0) / 8.0;
}

// Costs of the measure through s = mean coordinate sum: F = f_gain*atan(s),
// G = gain*shape(s).  Flat derivatives carry the zero-mean convention.
MeanFieldCost mean_statistic_cost(MeanShape g_shape, double gain, double f_gain, int d) {
  MeanFieldCost cost;
  const auto stat = [](const Measure& m) { return mean_coordinate_sum(m); };
  const auto coord_sum = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  };
  cost.eval_g = [g_shape, gain, stat](const Measure& m) {
    return gain * shape_eval(g_shape, stat(m));
  };
  cost.flat_dg = [g_shape, gain, stat, coord_sum](const Measure& m, std::span<const double> x) {
    const double s = stat(m);
    return gain * shape_deriv(g_shape, s) * (coord_sum(x) - s);
  };
  cost.grad_m_g = [g_shape, gain, stat](const Measure& m, std::span<const double> x) {
    return Vec(x.size(), gain * shape_deriv(g_shape, stat(m)));
  };
  cost.eval_f = [f_gain, stat](const Measure& m) {
    return f_gain == 0.0 ? 0.0 : f_gain * shape_eval(MeanShape::Arctan, stat(m));
  };
  cost.flat_df = [f_gain, stat, coord_sum](const Measure& m, std::span<const double> x) {
    if (f_gain == 0.0) return 0.0;
    const double s = stat(m);
    return f_gain * shape_deriv(MeanShape::Arctan, s) * (coord_sum(x) - s);
  };
  cost.grad_m_f = [f_gain, stat](const Measure& m, std::span<const double> x) {
    return Vec(x.size(),
               f_gain == 0.0 ? 0.0 : f_gain * shape_deriv(MeanShape::Arctan, stat(m)));
  };
  const double root_d = std::sqrt(static_cast<double>(d));
  cost.bound_g = std::abs(gain) * shape_sup(g_shape);
  cost.lip_g = std::abs(gain) * shape_lip(g_shape) * root_d;
  cost.bound_f = std::abs(f_gain) * shape_sup(MeanShape::Arctan);
  cost.lip_f = std::abs(f_gain) * shape_lip(MeanShape::Arctan) * root_d;
  return cost;
}

MeanOnlyCosts mean_only(MeanShape g_shape, double gain, double f_gain) {
  MeanOnlyCosts mc;
  mc.valid = true;
  mc.g = [g_shape, gain](double s) { return gain * shape_eval(g_shape, s); };
  mc.dg = [g_shape, gain](double s) { return gain * shape_deriv(g_shape, s); };
  mc.f = [f_gain](double s) {
    return f_gain == 0.0 ? 0.0 : f_gain * shape_eval(MeanShape::Arctan, s);
  };
  mc.df = [f_gain](double s) {
    return f_gain == 0.0 ? 0.0 : f_gain * shape_deriv(MeanShape::Arctan, s);
  };
  return mc;
}

}  // namespace

ModelConfig builtin_model(const std::string& name, const std::map<std::string, double>& params) {
  std::set<std::string> known{"dim", "horizon", "a0", "gain", "f_gain", "control_radius"};
  const bool drift_family = name == "quadratic-drift";
  if (drift_family) known.insert("kappa");
  if (name != "quadratic-mean" && name != "nonconvex-mean" && !drift_family)
    throw std::invalid_argument("builtin_model: unknown model '" + name + "'");
  reject_unknown(params, known);

  ModelConfig cfg;
  const double dim = get_param(params, "dim", 1.0);
  if (!(dim >= 1.0 && dim <= 6.0 && dim == std::floor(dim)))
    throw std::invalid_argument("builtin_model: dim must be an integer in [1,6]");
  cfg.dim_d = static_cast<int>(dim);
  cfg.horizon_T = get_param(params, "horizon", 1.0);
  if (!(cfg.horizon_T > 0.0)) throw std::invalid_argument("builtin_model: horizon must be > 0");
  cfg.common_noise_a0 = get_param(params, "a0", 0.0);
  if (!(cfg.common_noise_a0 >= 0.0))
    throw std::invalid_argument("builtin_model: a0 must be >= 0");
  const double gain = get_param(params, "gain", 1.0);
  const double f_gain = get_param(params, "f_gain", 0.0);
  if (!std::isfinite(gain) || !std::isfinite(f_gain))
    throw std::invalid_argument("builtin_model: gains must be finite");
  const double kappa = drift_family ? get_param(params, "kappa", 0.5) : 0.0;
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw std::invalid_argument("builtin_model: kappa must be >= 0");

  cfg.hamiltonian = drift_hamiltonian(kappa, cfg.dim_d);
  const double radius = get_param(params, "control_radius", 8.0);
  if (!(radius > 0.0)) throw std::invalid_argument("builtin_model: control_radius must be > 0");
  cfg.hamiltonian.control_radius_R = radius;

  const MeanShape g_shape =
      name == "nonconvex-mean" ? MeanShape::BumpInverse : MeanShape::Arctan;
  cfg.cost = mean_statistic_cost(g_shape, gain, f_gain, cfg.dim_d);
  cfg.mean_costs = mean_only(g_shape, gain, f_gain);
  cfg.quad.valid = true;
  cfg.quad.axis_drift = [kappa](double xc) { return kappa * std::tanh(xc); };
  cfg.label = name;
  return cfg;
}

double legendre_transform(const HamiltonianModel& h, std::span<const double> x,
                          std::span<const double> a, double p_radius, int p_steps) {
  if (p_steps < 3) throw std::invalid_argument("legendre_transform: p_steps must be >= 3");
  if (!(p_radius > 0.0)) throw std::invalid_argument("legendre_transform: p_radius must be > 0");
  if (x.size() != a.size()) throw std::invalid_argument("legendre_transform: dim mismatch");
  const int d = static_cast<int>(x.size());
  if (d < 1 || d > 6) throw std::invalid_argument("legendre_transform: dim out of range");

  Vec center(d, 0.0), p(d), best_p(d);
  double halfwidth = p_radius;
  double best = -1e300, prev = -1e300;
  std::int64_t total = 1;
  for (int c = 0; c < d; ++c) total *= p_steps;

  for (int pass = 0; pass < 120; ++pass) {
    best = -1e300;
    std::vector<int> best_idx(d, 0);
    for (std::int64_t flat = 0; flat < total; ++flat) {
      std::int64_t rem = flat;
      for (int c = 0; c < d; ++c) {
        const int i = static_cast<int>(rem % p_steps);
        rem /= p_steps;
        p[c] = center[c] - halfwidth + 2.0 * halfwidth * i / (p_steps - 1);
      }
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += a[c] * p[c];
      const double val = -dot - h.eval_h(x, p);
      if (val > best) {
        best = val;
        best_p = p;
        rem = flat;
        for (int c = 0; c < d; ++c) {
          best_idx[c] = static_cast<int>(rem % p_steps);
          rem /= p_steps;
        }
      }
    }
    if (pass == 0) {
      for (int c = 0; c < d; ++c) {
        if (best_idx[c] == 0 || best_idx[c] == p_steps - 1)
          throw std::invalid_argument(
              "legendre_transform: maximizer on grid boundary, enlarge p_radius");
      }
    }
    // Successive grids can share their argmax node while the true maximizer
    // is still a cell away, so value agreement alone is not convergence; the
    // window must also be small enough that the quadratic error is below the
    // agreement tolerance.
    const double scale = 1.0 + norm2(best_p);
    if (pass > 0 && std::abs(best - prev) < 1e-8 && halfwidth <= 1e-3 * scale) return best;
    prev = best;
    center = best_p;
    // Next window spans one old grid cell on each side of the maximizer.
    halfwidth = 2.0 * halfwidth / (p_steps - 1);
    if (halfwidth < 1e-13 * scale) return best;
  }
  return best;
}

std::vector<AssumptionCheck> check_assumptions(const ModelConfig& cfg, int sample_count,
                                               std::uint64_t seed) {
  if (sample_count < 100)
    throw std::invalid_argument("check_assumptions: sample_count must be >= 100");
  const int d = cfg.dim_d;
  const auto& h = cfg.hamiltonian;
  const double R = h.control_radius_R;
  std::vector<AssumptionCheck> report;

  const auto run = [&](const std::string& name, auto&& body) {
    AssumptionCheck chk;
    chk.name = name;
    chk.passed = true;
    body(chk);
    report.push_back(std::move(chk));
  };
  // violation > 0 fails the check; the largest violation keeps its witness.
  const auto note = [](AssumptionCheck& chk, double violation, const std::string& witness) {
    if (violation <= 0.0) return;
    chk.passed = false;
    if (violation > chk.worst) {
      chk.worst = violation;
      chk.witness = witness;
    }
  };
  const auto draw_vec = [d](CounterRng& rng, double scale) {
    Vec v(d);
    for (double& c : v) c = scale * rng.normal();
    return v;
  };

  run("legendre-duality", [&](AssumptionCheck& chk) {
    CounterRng rng(seed, 1);
    const int n = std::min(sample_count, 25);
    for (int i = 0; i < n; ++i) {
      const Vec x = draw_vec(rng, 2.0);
      Vec a(d);
      for (double& c : a) c = (2.0 * rng.uniform() - 1.0) * 2.0 * R;
      const double direct = h.eval_l(x, a);
      const double dual = legendre_transform(h, x, a, 4.0 * R + 8.0, 21);
      const double gap = std::abs(direct - dual) - 1e-6 * (1.0 + std::abs(direct));
      note(chk, gap, "x=" + fmt_vec(x) + " a=" + fmt_vec(a));
    }
  });

  run("growth-envelope", [&](AssumptionCheck& chk) {
    CounterRng rng(seed, 2);
    for (int i = 0; i < sample_count; ++i) {
      const Vec x = draw_vec(rng, 2.0);
      const Vec p = draw_vec(rng, R);
      const double pp = norm2(p) * norm2(p);
      const double val = h.eval_h(x, p);
      const double lower = -h.growth_C + h.growth_c * pp - val;
      const double upper = val - (h.growth_C + pp / h.growth_c);
      note(chk, std::max(lower, upper) - 1e-9, "x=" + fmt_vec(x) + " p=" + fmt_vec(p));
    }
  });

  run("state-gradient-bound", [&](AssumptionCheck& chk) {
    CounterRng rng(seed, 3);
    for (int i = 0; i < sample_count; ++i) {
      const Vec x = draw_vec(rng, 2.0);
      const Vec p = draw_vec(rng, R);
      const double g = norm2(h.grad_x_h(x, p));
      note(chk, g - h.growth_C * (norm2(p) + 1.0) - 1e-9,
           "x=" + fmt_vec(x) + " p=" + fmt_vec(p));
    }
  });

  run("p-convexity", [&](AssumptionCheck& chk) {
    CounterRng rng(seed, 4);
    for (int i = 0; i < sample_count; ++i) {
      const Vec x = draw_vec(rng, 2.0);
      Vec p = draw_vec(rng, 0.5 * R);
      Vec xi = draw_vec(rng, 1.0);
      const double nx = norm2(xi);
      if (nx < 1e-12) continue;
      for (double& c : xi) c /= nx;
      const double step = 1e-3;
      Vec lo(d), hi(d);
      for (int c = 0; c < d; ++c) {
        lo[c] = p[c] - step * xi[c];
        hi[c] = p[c] + step * xi[c];
      }
      const double second =
          (h.eval_h(x, hi) - 2.0 * h.eval_h(x, p) + h.eval_h(x, lo)) / (step * step);
      note(chk, 1e-6 - second, "x=" + fmt_vec(x) + " p=" + fmt_vec(p));
    }
  });

  const auto gradient_check = [&](auto&& value, auto&& gradient, double arg_scale,
                                  AssumptionCheck& chk, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    for (int i = 0; i < sample_count; ++i) {
      const Vec x = draw_vec(rng, 2.0);
      const Vec v = draw_vec(rng, arg_scale);
      const Vec g = gradient(x, v);
      for (int c = 0; c < d; ++c) {
        Vec lo = v, hi = v;
        const double step = 1e-4 * (1.0 + std::abs(v[c]));
        lo[c] -= step;
        hi[c] += step;
        const double fd = (value(x, hi) - value(x, lo)) / (2.0 * step);
        note(chk, std::abs(fd - g[c]) - 1e-5 * (1.0 + std::abs(g[c])),
             "x=" + fmt_vec(x) + " arg=" + fmt_vec(v));
      }
    }
  };
  run("p-gradient-consistency", [&](AssumptionCheck& chk) {
    gradient_check(h.eval_h, h.grad_p_h, R, chk, 5);
  });
  run("a-gradient-consistency", [&](AssumptionCheck& chk) {
    gradient_check(h.eval_l, h.grad_a_l, 2.0 * R, chk, 6);
  });

  const auto draw_measure = [&](CounterRng& rng) {
    const int n = 5 + static_cast<int>(rng.below(36));
    const double shift = 4.0 * rng.uniform() - 2.0;
    std::vector<double> pts(static_cast<std::size_t>(n) * d);
    for (double& c : pts) c = shift + 2.0 * rng.normal();
    return EmpiricalMeasure(d, std::move(pts));
  };

  run("cost-bounded", [&](AssumptionCheck& chk) {
    CounterRng rng(seed, 7);
    for (int i = 0; i < sample_count; ++i) {
      const Measure m = draw_measure(rng);
      note(chk, std::abs(cfg.cost.eval_f(m)) - cfg.cost.bound_f - 1e-12, "running cost");
      note(chk, std::abs(cfg.cost.eval_g(m)) - cfg.cost.bound_g - 1e-12, "terminal cost");
    }
  });

  run("flat-derivative-mean", [&](AssumptionCheck& chk) {
    CounterRng rng(seed, 8);
    for (int i = 0; i < sample_count; ++i) {
      const EmpiricalMeasure e = draw_measure(rng);
      const Measure m = e;
      double acc_f = 0.0, acc_g = 0.0;
      for (int k = 0; k < e.size(); ++k) {
        acc_f += cfg.cost.flat_df(m, e.point(k));
        acc_g += cfg.cost.flat_dg(m, e.point(k));
      }
      const double scale = 1e-9 * (1.0 + std::abs(acc_g));
      note(chk, std::abs(acc_f / e.size()) - scale, "running flat derivative");
      note(chk, std::abs(acc_g / e.size()) - scale, "terminal flat derivative");
    }
  });

  run("cost-lipschitz", [&](AssumptionCheck& chk) {
    CounterRng rng(seed, 9);
    for (int i = 0; i < sample_count; ++i) {
      const int n = 4 + static_cast<int>(rng.below(12));
      std::vector<double> pa(static_cast<std::size_t>(n) * d), pb(pa.size());
      for (double& c : pa) c = 2.0 * rng.normal();
      for (std::size_t j = 0; j < pb.size(); ++j) pb[j] = pa[j] + 0.5 * rng.normal();
      const EmpiricalMeasure ma(d, std::move(pa)), mb(d, std::move(pb));
      const double dist = w1_assignment(ma, mb);
      const double gap_g = std::abs(cfg.cost.eval_g(ma) - cfg.cost.eval_g(mb)) -
                           cfg.cost.lip_g * dist - 1e-9;
      const double gap_f = std::abs(cfg.cost.eval_f(ma) - cfg.cost.eval_f(mb)) -
                           cfg.cost.lip_f * dist - 1e-9;
      note(chk, std::max(gap_g, gap_f), "pair of clouds, d1=" + std::to_string(dist));
    }
  });

  return report;
}

}  // namespace mfc

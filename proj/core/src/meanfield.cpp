#include "mfclab/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "mfclab/rng.hpp"
#include "solver_internal.hpp"

namespace mfc {

namespace {

using detail::TriLU;
using detail::density_diffusion;
using detail::effective_speed;
using detail::value_diffusion;

double slice_mean(const Grid1D& g, const std::vector<double>& w) {
  double acc = 0.0;
  for (int i = 0; i < g.n; ++i) acc += trapezoid_weight(g, i) * g.node(i) * w[i];
  return acc;
}

double slice_mass(const Grid1D& g, const std::vector<double>& w) {
  double acc = 0.0;
  for (int i = 0; i < g.n; ++i) acc += trapezoid_weight(g, i) * w[i];
  return acc;
}

std::vector<double> drift_at_nodes(const ModelConfig& cfg, const Grid1D& g) {
  std::vector<double> v(g.n, 0.0);
  if (cfg.quad.valid) {
    for (int i = 0; i < g.n; ++i) v[i] = cfg.quad.axis_drift(g.node(i));
  }
  return v;
}

// One backward value step from slice w_next, control form: per node either
// minimize over the sign branches (one-sided differences, closed form for
// quadratic costs) or follow a frozen policy, then apply implicit diffusion.
struct ValueStep {
  const ModelConfig* cfg = nullptr;
  Grid1D grid;
  double dt = 0.0;
  double a_max = 0.0;
  double viscosity = 0.0;
  std::vector<double> drift;  // V(x_i)
  TriLU lu;
  bool has_diffusion = false;

  void prepare(const ModelConfig& c, Grid1D g, double dt_, double a_max_, double visc) {
    cfg = &c;
    grid = g;
    dt = dt_;
    a_max = a_max_;
    viscosity = visc;
    drift = drift_at_nodes(c, g);
    has_diffusion = visc > 0.0;
    if (has_diffusion) lu = value_diffusion(g.n, visc * dt / (g.spacing() * g.spacing()));
  }

  // rhs may be null; fixed_policy non-null evaluates that control instead of
  // minimizing; policy_out non-null receives the minimizing control.
  void run(const std::vector<double>& w_next, const double* rhs, const double* fixed_policy,
           std::vector<double>& w_now, double* policy_out) const {
    const int n = grid.n;
    const double h = grid.spacing();
    const bool quad_path = cfg->quad.valid;
    for (int i = 0; i < n; ++i) {
      const double dp = i + 1 < n ? (w_next[i + 1] - w_next[i]) / h : 0.0;
      const double dm = i > 0 ? (w_next[i] - w_next[i - 1]) / h : 0.0;
      double best, a_best;
      if (fixed_policy) {
        const double a = fixed_policy[i];
        const double d = a > 0.0 ? dp : dm;
        best = a * d;
        if (quad_path) {
          const double s = a + drift[i];
          best += 0.25 * s * s;
        } else {
          const double x = grid.node(i);
          best += cfg->hamiltonian.eval_l({&x, 1}, {&a, 1});
        }
        a_best = a;
      } else if (quad_path) {
        const double v = drift[i];
        // Branch a >= 0 rides the forward difference, a <= 0 the backward
        // one; the quadratic in a minimizes in closed form on each branch.
        auto branch = [&](double d, double lo, double hi) {
          const double a = std::clamp(-v - 2.0 * d, lo, hi);
          const double s = a + v;
          return std::pair<double, double>(0.25 * s * s + a * d, a);
        };
        auto [val_p, a_p] = branch(dp, 0.0, i + 1 < n ? a_max : 0.0);
        auto [val_m, a_m] = branch(dm, i > 0 ? -a_max : 0.0, 0.0);
        best = val_p;
        a_best = a_p;
        if (val_m < best) {
          best = val_m;
          a_best = a_m;
        }
      } else {
        const double x = grid.node(i);
        best = 1e300;
        a_best = 0.0;
        const int scan = 81;
        for (int k = 0; k < scan; ++k) {
          const double a = -a_max + 2.0 * a_max * k / (scan - 1);
          if ((a > 0.0 && i + 1 >= n) || (a < 0.0 && i <= 0)) continue;
          const double d = a > 0.0 ? dp : dm;
          const double val = cfg->hamiltonian.eval_l({&x, 1}, {&a, 1}) + a * d;
          if (val < best) {
            best = val;
            a_best = a;
          }
        }
      }
      w_now[i] = w_next[i] + dt * (best + (rhs ? rhs[i] : 0.0));
      if (policy_out) policy_out[i] = a_best;
    }
    if (has_diffusion) lu.solve(w_now);
  }
};

// Backward value path: slice s lives at time s*dt, control slice n acts on
// [t_n, t_{n+1}) and is extracted from the step that consumed slice n+1.
struct ValuePath {
  Grid1D grid;
  int steps = 0;
  double dt = 0.0;
  std::vector<double> w;        // (steps+1) * n
  std::vector<double> control;  // steps * n when requested

  const double* slice(int s) const { return w.data() + static_cast<std::size_t>(s) * grid.n; }
  double at(int s, int i) const { return w[static_cast<std::size_t>(s) * grid.n + i]; }
};

ValuePath backward_sweep(const ModelConfig& cfg, const Grid1D& g, int steps, double horizon,
                         double viscosity, double a_max, const std::vector<double>& terminal,
                         const std::function<const double*(int)>& rhs_slice,
                         const double* policy_field, bool want_control) {
  ValuePath path;
  path.grid = g;
  path.steps = steps;
  path.dt = horizon / steps;
  path.w.resize(static_cast<std::size_t>(steps + 1) * g.n);
  if (want_control) path.control.resize(static_cast<std::size_t>(steps) * g.n);

  ValueStep stepper;
  stepper.prepare(cfg, g, path.dt, a_max, viscosity);

  std::copy(terminal.begin(), terminal.end(),
            path.w.begin() + static_cast<std::size_t>(steps) * g.n);
  std::vector<double> now(g.n), next(terminal);
  for (int n = steps - 1; n >= 0; --n) {
    const double* rhs = rhs_slice ? rhs_slice(n) : nullptr;
    const double* frozen =
        policy_field ? policy_field + static_cast<std::size_t>(n) * g.n : nullptr;
    double* ctrl_out =
        want_control ? path.control.data() + static_cast<std::size_t>(n) * g.n : nullptr;
    stepper.run(next, rhs, frozen, now, ctrl_out);
    std::copy(now.begin(), now.end(), path.w.begin() + static_cast<std::size_t>(n) * g.n);
    next.swap(now);
  }
  return path;
}

void check_control(const ControlField& alpha) {
  if (alpha.steps < 1 || alpha.grid.n < 3)
    throw std::invalid_argument("ControlField: needs steps >= 1 and a real grid");
  if (alpha.values.size() != static_cast<std::size_t>(alpha.steps) * alpha.grid.n)
    throw std::invalid_argument("ControlField: value array has the wrong shape");
  if (!(alpha.horizon > 0.0)) throw std::invalid_argument("ControlField: horizon must be > 0");
  for (double v : alpha.values) {
    if (!std::isfinite(v) || std::abs(v) > alpha.bound_R + 1e-12)
      throw std::invalid_argument("ControlField: values exceed bound_R");
  }
}

// Forward density sweep on raw node weights (mass need not be one).
void forward_sweep_raw(const ControlField& alpha, const std::vector<double>& init,
                       std::vector<double>& out) {
  const Grid1D g = alpha.grid;
  const int n = g.n;
  const double h = g.spacing();
  const double dt = alpha.horizon / alpha.steps;

  double amax = 0.0;
  for (double v : alpha.values) amax = std::max(amax, std::abs(v));
  // Positivity needs dt*(outflow left + outflow right) <= h.
  if (2.0 * amax * dt > h * (1.0 + 1e-12))
    throw std::invalid_argument("solve_fp: advection CFL violated, refine the time grid");

  TriLU lu = density_diffusion(n, dt / (h * h));
  out.resize(static_cast<std::size_t>(alpha.steps + 1) * n);
  std::copy(init.begin(), init.end(), out.begin());

  std::vector<double> cur(init), next(n), flux(n - 1);
  for (int s = 0; s < alpha.steps; ++s) {
    const double* a = alpha.values.data() + static_cast<std::size_t>(s) * n;
    for (int i = 0; i + 1 < n; ++i) {
      const double ah = 0.5 * (a[i] + a[i + 1]);
      flux[i] = ah >= 0.0 ? ah * cur[i] : ah * cur[i + 1];
    }
    for (int i = 0; i < n; ++i) {
      const double out_flux = i + 1 < n ? flux[i] : 0.0;
      const double in_flux = i > 0 ? flux[i - 1] : 0.0;
      next[i] = cur[i] - dt / h * (out_flux - in_flux);
    }
    lu.solve(next);
    for (double& v : next) {
      if (v < 0.0) v = v > -1e-11 ? 0.0 : v;  // roundoff clamp only
    }
    std::copy(next.begin(), next.end(), out.begin() + static_cast<std::size_t>(s + 1) * n);
    cur.swap(next);
  }
}

// Flat derivative of the terminal cost at a slice, evaluated at every node.
std::vector<double> terminal_flat(const ModelConfig& cfg, const Grid1D& g,
                                  const std::vector<double>& weights) {
  std::vector<double> u(g.n);
  if (cfg.mean_costs.valid) {
    const double s = slice_mean(g, weights);
    const double slope = cfg.mean_costs.dg(s);
    for (int i = 0; i < g.n; ++i) u[i] = slope * (g.node(i) - s);
    return u;
  }
  const Measure m = DiscreteDensity(g, weights);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.node(i);
    u[i] = cfg.cost.flat_dg(m, {&x, 1});
  }
  return u;
}

// Running-cost flat derivative per step; empty when F vanishes identically.
std::vector<double> running_flat(const ModelConfig& cfg, const Grid1D& g, int steps,
                                 const std::vector<double>& density_path) {
  if (cfg.cost.bound_f == 0.0) return {};
  std::vector<double> table(static_cast<std::size_t>(steps) * g.n);
  for (int s = 0; s < steps; ++s) {
    const double* w = density_path.data() + static_cast<std::size_t>(s) * g.n;
    double* row = table.data() + static_cast<std::size_t>(s) * g.n;
    if (cfg.mean_costs.valid) {
      const double mean = slice_mean(g, std::vector<double>(w, w + g.n));
      const double slope = cfg.mean_costs.df(mean);
      for (int i = 0; i < g.n; ++i) row[i] = slope * (g.node(i) - mean);
    } else {
      const Measure m = DiscreteDensity(g, std::vector<double>(w, w + g.n));
      for (int i = 0; i < g.n; ++i) {
        const double x = g.node(i);
        row[i] = cfg.cost.flat_df(m, {&x, 1});
      }
    }
  }
  return table;
}

double control_cost_at(const ModelConfig& cfg, const std::vector<double>& drift, const Grid1D& g,
                       int i, double a) {
  if (cfg.quad.valid) {
    const double s = a + drift[i];
    return 0.25 * s * s;
  }
  const double x = g.node(i);
  return cfg.hamiltonian.eval_l({&x, 1}, {&a, 1});
}

double mean_field_running(const ModelConfig& cfg, const Grid1D& g, const double* w) {
  if (cfg.cost.bound_f == 0.0) return 0.0;
  if (cfg.mean_costs.valid)
    return cfg.mean_costs.f(slice_mean(g, std::vector<double>(w, w + g.n)));
  return cfg.cost.eval_f(DiscreteDensity(g, std::vector<double>(w, w + g.n)));
}

double mean_field_terminal(const ModelConfig& cfg, const Grid1D& g, const double* w) {
  if (cfg.mean_costs.valid)
    return cfg.mean_costs.g(slice_mean(g, std::vector<double>(w, w + g.n)));
  return cfg.cost.eval_g(DiscreteDensity(g, std::vector<double>(w, w + g.n)));
}

// Cost of a raw density path under alpha between step `from` and `to`,
// optionally with the terminal cost at the path end.
double cost_between(const ModelConfig& cfg, const ControlField& alpha,
                    const std::vector<double>& path, int from, int to, bool with_terminal) {
  const Grid1D g = alpha.grid;
  const double dt = alpha.horizon / alpha.steps;
  const std::vector<double> drift = drift_at_nodes(cfg, g);
  double acc = 0.0;
  for (int s = from; s < to; ++s) {
    const double* w = path.data() + static_cast<std::size_t>(s) * g.n;
    const double* a = alpha.values.data() + static_cast<std::size_t>(s) * g.n;
    double kinetic = 0.0;
    for (int i = 0; i < g.n; ++i)
      kinetic += trapezoid_weight(g, i) * w[i] * control_cost_at(cfg, drift, g, i, a[i]);
    acc += dt * (kinetic + mean_field_running(cfg, g, w));
  }
  if (with_terminal)
    acc += mean_field_terminal(cfg, g,
                               path.data() + static_cast<std::size_t>(alpha.steps) * g.n);
  return acc;
}

int default_steps(const ModelConfig& cfg, const Grid1D& g, double speed) {
  const int cfl = static_cast<int>(std::ceil(cfg.horizon_T * speed / (0.45 * g.spacing())));
  return std::max(50, cfl);
}

MFTrajectory path_to_trajectory(const Grid1D& g, int steps, double dt,
                                const std::vector<double>& path) {
  MFTrajectory traj;
  traj.dt = dt;
  traj.slices.reserve(steps + 1);
  for (int s = 0; s <= steps; ++s) {
    const double* w = path.data() + static_cast<std::size_t>(s) * g.n;
    std::vector<double> slice(w, w + g.n);
    const double mass = slice_mass(g, slice);
    // Conservation is exact in the node sum; the trapezoid functional can
    // drift by boundary roundoff, renormalize within a hair.
    if (std::abs(mass - 1.0) > 1e-13 && mass > 0.0)
      for (double& v : slice) v /= mass;
    traj.slices.emplace_back(g, std::move(slice));
  }
  return traj;
}

struct DescentState {
  ControlField alpha;
  std::vector<double> path;  // (steps+1)*n raw weights
  double value = 0.0;
};

// Shared solver context.
struct MfcContext {
  const ModelConfig* cfg;
  Grid1D grid;
  int steps;
  double dt;
  double speed;
  std::vector<double> drift;

  double evaluate(const ControlField& alpha, const std::vector<double>& init,
                  std::vector<double>& path_out) const {
    forward_sweep_raw(alpha, init, path_out);
    return cost_between(*cfg, alpha, path_out, 0, steps, true);
  }
};

ControlField zero_control(const MfcContext& ctx) {
  return ControlField::constant(ctx.grid, ctx.steps, ctx.cfg->horizon_T, 0.0, ctx.speed);
}

// Fixed point on the first-order system: forward density, backward value,
// damped feedback mix with restart on cost increase.
MFCSolution solve_fixed_point(const MfcContext& ctx, const std::vector<double>& init,
                              const MFCSolveOptions& opts) {
  const ModelConfig& cfg = *ctx.cfg;
  MFCSolution best;
  best.value = 1e300;

  ControlField alpha = zero_control(ctx);
  std::vector<double> path;
  double prev = 1e300;
  int damp_age = 0;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    const double value = ctx.evaluate(alpha, init, path);
    if (value < best.value) {
      best.value = value;
      best.control = alpha;
      best.trajectory = path_to_trajectory(ctx.grid, ctx.steps, ctx.dt, path);
    }
    if (iter > 0 && std::abs(value - prev) < opts.tol) {
      best.converged = true;
      ++iter;
      break;
    }
    if (value > prev + 1e-12) damp_age = 0;  // overshoot, restart the schedule
    prev = value;

    const std::vector<double> terminal = terminal_flat(
        cfg, ctx.grid,
        std::vector<double>(path.end() - ctx.grid.n, path.end()));
    const std::vector<double> rhs = running_flat(cfg, ctx.grid, ctx.steps, path);
    const auto rhs_slice = [&](int s) -> const double* {
      return rhs.empty() ? nullptr : rhs.data() + static_cast<std::size_t>(s) * ctx.grid.n;
    };
    const ValuePath u = backward_sweep(cfg, ctx.grid, ctx.steps, cfg.horizon_T, 1.0, ctx.speed,
                                       terminal, rhs_slice, nullptr, true);
    const double w = 2.0 / (damp_age + 2.0);
    ++damp_age;
    for (std::size_t j = 0; j < alpha.values.size(); ++j)
      alpha.values[j] = (1.0 - w) * alpha.values[j] + w * u.control[j];
  }
  best.iterations = iter;
  return best;
}

// Projected adjoint descent with backtracking; the unit step of the
// function-space direction reproduces the feedback map for quadratic costs.
MFCSolution solve_direct(const MfcContext& ctx, const std::vector<double>& init,
                         const MFCSolveOptions& opts) {
  const ModelConfig& cfg = *ctx.cfg;
  const Grid1D g = ctx.grid;
  const int n = g.n;

  DescentState cur;
  cur.alpha = zero_control(ctx);
  cur.value = ctx.evaluate(cur.alpha, init, cur.path);

  MFCSolution best;
  best.value = cur.value;
  best.control = cur.alpha;
  best.trajectory = path_to_trajectory(g, ctx.steps, ctx.dt, cur.path);
  best.converged = false;

  std::vector<double> direction(static_cast<std::size_t>(ctx.steps) * n);
  std::vector<double> trial_path;
  int stale = 0;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    // Linear adjoint along the current flow: running term is the control
    // cost plus the flat derivative of F.
    const std::vector<double> terminal = terminal_flat(
        cfg, g, std::vector<double>(cur.path.end() - n, cur.path.end()));
    std::vector<double> rhs = running_flat(cfg, g, ctx.steps, cur.path);
    if (rhs.empty()) rhs.assign(static_cast<std::size_t>(ctx.steps) * n, 0.0);
    for (int s = 0; s < ctx.steps; ++s) {
      const double* a = cur.alpha.values.data() + static_cast<std::size_t>(s) * n;
      double* row = rhs.data() + static_cast<std::size_t>(s) * n;
      for (int i = 0; i < n; ++i) row[i] += control_cost_at(cfg, ctx.drift, g, i, a[i]);
    }
    const auto rhs_slice = [&](int s) {
      return rhs.data() + static_cast<std::size_t>(s) * n;
    };
    const ValuePath u = backward_sweep(cfg, g, ctx.steps, cfg.horizon_T, 1.0, ctx.speed,
                                       terminal, rhs_slice, cur.alpha.values.data(), false);

    const double h = g.spacing();
    for (int s = 0; s < ctx.steps; ++s) {
      const double* unext = u.slice(s + 1);
      const double* a = cur.alpha.values.data() + static_cast<std::size_t>(s) * n;
      double* dir = direction.data() + static_cast<std::size_t>(s) * n;
      for (int i = 0; i < n; ++i) {
        const double q = i == 0       ? (unext[1] - unext[0]) / h
                         : i == n - 1 ? (unext[n - 1] - unext[n - 2]) / h
                                      : (unext[i + 1] - unext[i - 1]) / (2.0 * h);
        double dla;
        if (cfg.quad.valid) {
          dla = 0.5 * (a[i] + ctx.drift[i]);
        } else {
          const double x = g.node(i);
          const double av = a[i];
          dla = cfg.hamiltonian.grad_a_l({&x, 1}, {&av, 1})[0];
        }
        dir[i] = dla + q;
      }
    }

    bool improved = false;
    ControlField trial = cur.alpha;
    for (double eta : {2.0, 1.0, 0.5, 0.2, 0.05, 0.01}) {
      for (std::size_t j = 0; j < trial.values.size(); ++j)
        trial.values[j] = std::clamp(cur.alpha.values[j] - eta * direction[j], -ctx.speed,
                                     ctx.speed);
      const double value = ctx.evaluate(trial, init, trial_path);
      if (value < cur.value - 1e-14) {
        cur.alpha.values.swap(trial.values);
        cur.path.swap(trial_path);
        const double gain = cur.value - value;
        cur.value = value;
        if (value < best.value) {
          best.value = value;
          best.control = cur.alpha;
          best.trajectory = path_to_trajectory(g, ctx.steps, ctx.dt, cur.path);
        }
        improved = true;
        if (gain < opts.tol) {
          best.converged = true;
          stale = 99;
        }
        break;
      }
    }
    if (stale == 99) {
      ++iter;
      break;
    }
    if (!improved) {
      best.converged = true;  // projected stationary point within line search
      ++iter;
      break;
    }
  }
  best.iterations = iter;
  return best;
}

void attach_adjoint(const MfcContext& ctx, MFCSolution& sol) {
  const ModelConfig& cfg = *ctx.cfg;
  const Grid1D g = ctx.grid;
  std::vector<double> path;
  forward_sweep_raw(sol.control, sol.trajectory.slices[0].weights, path);
  const std::vector<double> terminal =
      terminal_flat(cfg, g, std::vector<double>(path.end() - g.n, path.end()));
  const std::vector<double> rhs = running_flat(cfg, g, ctx.steps, path);
  const auto rhs_slice = [&](int s) -> const double* {
    return rhs.empty() ? nullptr : rhs.data() + static_cast<std::size_t>(s) * g.n;
  };
  const ValuePath u = backward_sweep(cfg, g, ctx.steps, cfg.horizon_T, 1.0, ctx.speed, terminal,
                                     rhs_slice, nullptr, false);
  sol.adjoint = u.w;
}

MfcContext make_context(const ModelConfig& cfg, const Grid1D& g, const MFCSolveOptions& opts) {
  MfcContext ctx;
  ctx.cfg = &cfg;
  ctx.grid = g;
  ctx.drift = drift_at_nodes(cfg, g);
  double dmax = 0.0;
  for (double v : ctx.drift) dmax = std::max(dmax, std::abs(v));
  ctx.speed = effective_speed(cfg, dmax);
  ctx.steps = opts.steps > 0 ? opts.steps : default_steps(cfg, g, ctx.speed);
  ctx.dt = cfg.horizon_T / ctx.steps;
  if (2.0 * ctx.speed * ctx.dt > g.spacing() * (1.0 + 1e-12))
    throw std::invalid_argument("solve_mfc: requested steps violate the advection CFL bound");
  return ctx;
}

void require_mean_structured(const ModelConfig& cfg, const char* who) {
  if (!cfg.mean_costs.valid || !cfg.quad.valid)
    throw std::invalid_argument(std::string(who) + ": needs a mean-structured model");
  for (double x : {-1.3, 0.0, 0.7, 2.1}) {
    if (std::abs(cfg.quad.axis_drift(x)) > 1e-14)
      throw std::invalid_argument(std::string(who) + ": model must be drift-free");
  }
}

}  // namespace

ControlField ControlField::constant(Grid1D g, int steps, double horizon, double value,
                                    double bound) {
  ControlField f;
  f.grid = g;
  f.steps = steps;
  f.horizon = horizon;
  f.bound_R = bound;
  f.values.assign(static_cast<std::size_t>(steps) * g.n, value);
  check_control(f);
  return f;
}

MFTrajectory solve_fp(const ControlField& alpha, const DiscreteDensity& m0) {
  check_control(alpha);
  if (!(m0.grid.lo == alpha.grid.lo && m0.grid.hi == alpha.grid.hi && m0.grid.n == alpha.grid.n))
    throw std::invalid_argument("solve_fp: control and density grids differ");
  std::vector<double> path;
  forward_sweep_raw(alpha, m0.weights, path);
  return path_to_trajectory(alpha.grid, alpha.steps, alpha.horizon / alpha.steps, path);
}

double mfc_cost(const ModelConfig& cfg, const ControlField& alpha, const DiscreteDensity& m0) {
  check_control(alpha);
  if (!(m0.grid.lo == alpha.grid.lo && m0.grid.hi == alpha.grid.hi && m0.grid.n == alpha.grid.n))
    throw std::invalid_argument("mfc_cost: control and density grids differ");
  std::vector<double> path;
  forward_sweep_raw(alpha, m0.weights, path);
  return cost_between(cfg, alpha, path, 0, alpha.steps, true);
}

MFCSolution solve_mfc(const ModelConfig& cfg, const DiscreteDensity& m0, MfcMethod method,
                      const MFCSolveOptions& opts) {
  if (cfg.dim_d != 1) throw std::invalid_argument("solve_mfc: density solver is 1D only");
  const MfcContext ctx = make_context(cfg, m0.grid, opts);
  MFCSolution sol;
  if (method == MfcMethod::FixedPoint) {
    sol = solve_fixed_point(ctx, m0.weights, opts);
  } else if (method == MfcMethod::Direct) {
    sol = solve_direct(ctx, m0.weights, opts);
  } else {
    MFCSolution a = solve_fixed_point(ctx, m0.weights, opts);
    MFCSolution b = solve_direct(ctx, m0.weights, opts);
    sol = a.value <= b.value ? std::move(a) : std::move(b);
  }
  attach_adjoint(ctx, sol);
  return sol;
}

double dpp_check(const ModelConfig& cfg, const DiscreteDensity& m0, double t1,
                 const MFCSolveOptions& opts) {
  if (!(t1 > 0.0 && t1 < cfg.horizon_T))
    throw std::invalid_argument("dpp_check: t1 must lie strictly inside the horizon");
  const MFCSolution head = solve_mfc(cfg, m0, MfcMethod::Best, opts);
  const int steps = head.control.steps;
  const double dt = cfg.horizon_T / steps;
  const int n1 = std::clamp(static_cast<int>(std::lround(t1 / dt)), 1, steps - 1);

  std::vector<double> path;
  forward_sweep_raw(head.control, m0.weights, path);
  const double partial = cost_between(cfg, head.control, path, 0, n1, false);

  ModelConfig tail_cfg = cfg;
  tail_cfg.horizon_T = cfg.horizon_T - n1 * dt;
  MFCSolveOptions tail_opts = opts;
  tail_opts.steps = steps - n1;
  const double tail =
      solve_mfc(tail_cfg, head.trajectory.slices[n1], MfcMethod::Best, tail_opts).value;
  return std::abs(head.value - (partial + tail));
}

double group_split_value(const ModelConfig& cfg, const std::vector<WeightedDensity>& parts,
                         const MFCSolveOptions& opts) {
  if (parts.empty()) throw std::invalid_argument("group_split_value: needs at least one part");
  const Grid1D g = parts[0].shape.grid;
  double total_weight = 0.0;
  for (const auto& part : parts) {
    if (!(part.weight > 0.0))
      throw std::invalid_argument("group_split_value: part weights must be positive");
    if (!(part.shape.grid.lo == g.lo && part.shape.grid.hi == g.hi && part.shape.grid.n == g.n))
      throw std::invalid_argument("group_split_value: parts must share one grid");
    total_weight += part.weight;
  }
  if (std::abs(total_weight - 1.0) > 1e-9)
    throw std::invalid_argument("group_split_value: part masses must sum to 1");

  const MfcContext ctx = make_context(cfg, g, opts);
  const int K = static_cast<int>(parts.size());
  const int n = g.n;
  const std::size_t field = static_cast<std::size_t>(ctx.steps) * n;

  std::vector<ControlField> alphas(K, zero_control(ctx));
  std::vector<std::vector<double>> paths(K), trial_paths(K);
  std::vector<std::vector<double>> inits(K);
  for (int k = 0; k < K; ++k) {
    inits[k].resize(n);
    for (int i = 0; i < n; ++i) inits[k][i] = parts[k].weight * parts[k].shape.weights[i];
  }

  // Joint cost: per-group kinetic terms plus mean-field costs of the sum.
  std::vector<double> total(static_cast<std::size_t>(ctx.steps + 1) * n);
  const auto evaluate = [&](const std::vector<ControlField>& ctl,
                            std::vector<std::vector<double>>& path_out) {
    std::fill(total.begin(), total.end(), 0.0);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      forward_sweep_raw(ctl[k], inits[k], path_out[k]);
      for (std::size_t j = 0; j < total.size(); ++j) total[j] += path_out[k][j];
      const double dt = ctx.dt;
      for (int s = 0; s < ctx.steps; ++s) {
        const double* w = path_out[k].data() + static_cast<std::size_t>(s) * n;
        const double* a = ctl[k].values.data() + static_cast<std::size_t>(s) * n;
        double kinetic = 0.0;
        for (int i = 0; i < n; ++i)
          kinetic += trapezoid_weight(g, i) * w[i] * control_cost_at(cfg, ctx.drift, g, i, a[i]);
        acc += dt * kinetic;
      }
    }
    for (int s = 0; s < ctx.steps; ++s)
      acc += ctx.dt * mean_field_running(cfg, g, total.data() + static_cast<std::size_t>(s) * n);
    acc += mean_field_terminal(cfg, g, total.data() + static_cast<std::size_t>(ctx.steps) * n);
    return acc;
  };

  for (int k = 0; k < K; ++k) {
    paths[k].clear();
    trial_paths[k].clear();
  }
  double value = evaluate(alphas, paths);
  double best = value;

  std::vector<std::vector<double>> directions(K, std::vector<double>(field));
  std::vector<ControlField> trial(alphas);
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const std::vector<double> total_terminal(total.end() - n, total.end());
    const std::vector<double> flat_term = terminal_flat(cfg, g, total_terminal);
    const std::vector<double> flat_run = running_flat(cfg, g, ctx.steps, total);

    for (int k = 0; k < K; ++k) {
      std::vector<double> rhs = flat_run;
      if (rhs.empty()) rhs.assign(field, 0.0);
      for (int s = 0; s < ctx.steps; ++s) {
        const double* a = alphas[k].values.data() + static_cast<std::size_t>(s) * n;
        double* row = rhs.data() + static_cast<std::size_t>(s) * n;
        for (int i = 0; i < n; ++i) row[i] += control_cost_at(cfg, ctx.drift, g, i, a[i]);
      }
      const auto rhs_slice = [&](int s) {
        return rhs.data() + static_cast<std::size_t>(s) * n;
      };
      const ValuePath u = backward_sweep(cfg, g, ctx.steps, cfg.horizon_T, 1.0, ctx.speed,
                                         flat_term, rhs_slice, alphas[k].values.data(), false);
      const double h = g.spacing();
      for (int s = 0; s < ctx.steps; ++s) {
        const double* unext = u.slice(s + 1);
        const double* a = alphas[k].values.data() + static_cast<std::size_t>(s) * n;
        double* dir = directions[k].data() + static_cast<std::size_t>(s) * n;
        for (int i = 0; i < n; ++i) {
          const double q = i == 0       ? (unext[1] - unext[0]) / h
                           : i == n - 1 ? (unext[n - 1] - unext[n - 2]) / h
                                        : (unext[i + 1] - unext[i - 1]) / (2.0 * h);
          double dla;
          if (cfg.quad.valid) {
            dla = 0.5 * (a[i] + ctx.drift[i]);
          } else {
            const double x = g.node(i);
            const double av = a[i];
            dla = cfg.hamiltonian.grad_a_l({&x, 1}, {&av, 1})[0];
          }
          dir[i] = dla + q;
        }
      }
    }

    bool improved = false;
    for (double eta : {2.0, 1.0, 0.5, 0.2, 0.05, 0.01}) {
      for (int k = 0; k < K; ++k)
        for (std::size_t j = 0; j < field; ++j)
          trial[k].values[j] = std::clamp(alphas[k].values[j] - eta * directions[k][j],
                                          -ctx.speed, ctx.speed);
      const double trial_value = evaluate(trial, trial_paths);
      if (trial_value < value - 1e-14) {
        for (int k = 0; k < K; ++k) {
          alphas[k].values.swap(trial[k].values);
          paths[k].swap(trial_paths[k]);
        }
        const double gain = value - trial_value;
        value = trial_value;
        best = std::min(best, value);
        improved = true;
        if (gain < opts.tol) return best;
        break;
      }
    }
    if (!improved) break;
    // evaluate() for the accepted trial already refreshed `total`.
  }
  return best;
}

double reduced_oracle(const ModelConfig& cfg, double viscosity, double y0,
                      const ReducedOptions& opts) {
  require_mean_structured(cfg, "reduced_oracle");
  if (!(viscosity >= 0.0)) throw std::invalid_argument("reduced_oracle: viscosity must be >= 0");
  if (opts.nodes < 11) throw std::invalid_argument("reduced_oracle: grid too coarse");

  const double speed = effective_speed(cfg, 0.0);
  const bool has_f = cfg.cost.bound_f != 0.0;

  const auto solve_at = [&](int nodes, int steps) {
    const Grid1D g{y0 - opts.halfwidth, y0 + opts.halfwidth, nodes};
    std::vector<double> terminal(g.n), rhs;
    for (int i = 0; i < g.n; ++i) terminal[i] = cfg.mean_costs.g(g.node(i));
    if (has_f) {
      rhs.resize(g.n);
      for (int i = 0; i < g.n; ++i) rhs[i] = cfg.mean_costs.f(g.node(i));
    }
    const auto rhs_slice = [&](int) -> const double* { return has_f ? rhs.data() : nullptr; };
    const ValuePath w = backward_sweep(cfg, g, steps, cfg.horizon_T, viscosity, speed, terminal,
                                       rhs_slice, nullptr, false);
    // y0 is the grid center; odd node counts make it an exact node.
    const int mid = g.nearest(y0);
    if (std::abs(g.node(mid) - y0) < 1e-12) return w.at(0, mid);
    const int left = g.node(mid) <= y0 ? mid : mid - 1;
    const double t = (y0 - g.node(left)) / g.spacing();
    return (1.0 - t) * w.at(0, left) + t * w.at(0, left + 1);
  };

  const double h = 2.0 * opts.halfwidth / (opts.nodes - 1);
  const int steps = opts.steps > 0
                        ? opts.steps
                        : std::max(50, static_cast<int>(
                                           std::ceil(cfg.horizon_T * speed / (0.9 * h))));
  // The upwind scheme is first order in (h, dt); one halving step of
  // Richardson extrapolation removes the leading error term.
  const double coarse = solve_at(opts.nodes, steps);
  const double fine = solve_at(2 * opts.nodes - 1, 2 * steps);
  return 2.0 * fine - coarse;
}

double projection_residual(const ModelConfig& cfg, int N, int sample_states,
                           std::uint64_t seed) {
  require_mean_structured(cfg, "projection_residual");
  if (N < 1) throw std::invalid_argument("projection_residual: N must be >= 1");
  if (sample_states < 1)
    throw std::invalid_argument("projection_residual: needs at least one sample");

  // Smooth-regime guard: the terminal cost must not focus characteristics
  // within the horizon, i.e. 1 + 2*t*g'' stays positive up to T.
  {
    double worst = 1e300;
    const double dz = 1e-3;
    for (int i = -6000; i <= 6000; i += 3) {
      const double z = i * dz;
      const double gpp = (cfg.mean_costs.dg(z + dz) - cfg.mean_costs.dg(z - dz)) / (2.0 * dz);
      worst = std::min(worst, 1.0 + 2.0 * cfg.horizon_T * gpp);
    }
    if (worst <= 0.05)
      throw std::invalid_argument(
          "projection_residual: model is outside the smooth regime on this horizon");
  }

  const double halfwidth = 8.0;
  const Grid1D g{-halfwidth, halfwidth, 1601};
  const double speed = effective_speed(cfg, 0.0);
  const int steps = std::max(
      50, static_cast<int>(std::ceil(cfg.horizon_T * speed / (0.9 * g.spacing()))));
  std::vector<double> terminal(g.n);
  for (int i = 0; i < g.n; ++i) terminal[i] = cfg.mean_costs.g(g.node(i));
  const bool has_f = cfg.cost.bound_f != 0.0;
  std::vector<double> rhs;
  if (has_f) {
    rhs.resize(g.n);
    for (int i = 0; i < g.n; ++i) rhs[i] = cfg.mean_costs.f(g.node(i));
  }
  const auto rhs_slice = [&](int) -> const double* { return has_f ? rhs.data() : nullptr; };
  const ValuePath w = backward_sweep(cfg, g, steps, cfg.horizon_T, 0.0, speed, terminal,
                                     rhs_slice, nullptr, false);

  CounterRng rng(seed, 0);
  const double h = g.spacing();
  double worst = 0.0;
  for (int trial = 0; trial < sample_states; ++trial) {
    const double center = 4.0 * rng.uniform() - 2.0;
    double mean = 0.0;
    for (int k = 0; k < N; ++k) mean += center + rng.normal();
    mean /= N;
    const int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(steps + 1)));
    const int i = std::clamp(g.nearest(mean), 1, g.n - 2);
    const double wpp = (w.at(s, i + 1) - 2.0 * w.at(s, i) + w.at(s, i - 1)) / (h * h);
    worst = std::max(worst, std::abs(wpp) / N);
  }
  return worst;
}

}  // namespace mfc

#include "mfclab/nparticle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "mfclab/measures.hpp"
#include "mfclab/rng.hpp"
#include "solver_internal.hpp"

namespace mfc {

namespace {

using detail::TriLU;
using detail::effective_speed;
using detail::value_diffusion;

struct TensorShape {
  Grid1D axis;
  int rank = 1;
  std::size_t total = 0;
  std::size_t stride[4] = {1, 1, 1, 1};

  TensorShape(Grid1D a, int r) : axis(a), rank(r) {
    total = 1;
    for (int j = 0; j < rank; ++j) {
      stride[j] = total;
      total *= static_cast<std::size_t>(axis.n);
    }
  }
};

// Visit every node in flat order; coords is kept in sync with the odometer.
template <typename Fn>
void for_each_node(const TensorShape& ts, Fn&& fn) {
  const int M = ts.axis.n;
  int idx[4] = {0, 0, 0, 0};
  std::vector<double> coords(ts.rank, ts.axis.lo);
  for (std::size_t flat = 0; flat < ts.total; ++flat) {
    fn(flat, idx, coords);
    for (int j = 0; j < ts.rank; ++j) {
      if (++idx[j] < M) {
        coords[j] = ts.axis.node(idx[j]);
        break;
      }
      idx[j] = 0;
      coords[j] = ts.axis.lo;
    }
  }
}

// One in-place tridiagonal solve along every grid line of one axis.  The
// tensor decomposes as [outer][M][inner]; the inner lanes are processed
// together so every pass streams contiguous memory.
void axis_implicit(std::vector<double>& v, int M, std::size_t stride, std::size_t total,
                   const TriLU& lu) {
  const std::size_t plane = stride * static_cast<std::size_t>(M);
  for (std::size_t base = 0; base < total; base += plane) {
    for (int i = 1; i < M; ++i) {
      double* row = v.data() + base + static_cast<std::size_t>(i) * stride;
      const double* prev = row - stride;
      const double c = lu.low[i];
      for (std::size_t l = 0; l < stride; ++l) row[l] -= c * prev[l];
    }
    {
      double* last = v.data() + base + static_cast<std::size_t>(M - 1) * stride;
      const double pv = lu.piv[M - 1];
      for (std::size_t l = 0; l < stride; ++l) last[l] /= pv;
    }
    for (int i = M - 2; i >= 0; --i) {
      double* row = v.data() + base + static_cast<std::size_t>(i) * stride;
      const double* nxt = row + stride;
      const double u = lu.up[i], pv = lu.piv[i];
      for (std::size_t l = 0; l < stride; ++l) row[l] = (row[l] - u * nxt[l]) / pv;
    }
  }
}

// Lines stepping +1 simultaneously in a set of axes; used for the shared
// noise, whose generator acts along these diagonals.
struct DiagonalFamily {
  std::size_t step = 0;
  std::vector<std::pair<std::size_t, int>> lines;  // (start flat index, length)
  std::vector<TriLU> lu_by_len;

  void prepare(const TensorShape& ts, const std::vector<int>& dims, double r) {
    step = 0;
    for (int dmn : dims) step += ts.stride[dmn];
    lines.clear();
    for_each_node(ts, [&](std::size_t flat, const int* idx, const std::vector<double>&) {
      int mn = ts.axis.n, mx = 0;
      for (int dmn : dims) {
        mn = std::min(mn, idx[dmn]);
        mx = std::max(mx, idx[dmn]);
      }
      if (mn == 0) lines.emplace_back(flat, ts.axis.n - mx);
    });
    const int M = ts.axis.n;
    lu_by_len.resize(M + 1);
    for (int len = 3; len <= M; ++len) lu_by_len[len] = value_diffusion(len, r);
  }

  void apply(std::vector<double>& v, std::vector<double>& buf) const {
    for (const auto& [start, len] : lines) {
      if (len < 3) continue;  // identity end rows only, nothing to do
      buf.resize(len);
      for (int j = 0; j < len; ++j) buf[j] = v[start + static_cast<std::size_t>(j) * step];
      lu_by_len[len].solve(buf);
      for (int j = 0; j < len; ++j) v[start + static_cast<std::size_t>(j) * step] = buf[j];
    }
  }
};

bool mean_path(const ModelConfig& cfg) { return cfg.mean_costs.valid; }

double terminal_value(const ModelConfig& cfg, int n_particles, int d,
                      const std::vector<double>& coords, double coord_sum) {
  if (mean_path(cfg)) return cfg.mean_costs.g(coord_sum / n_particles);
  return cfg.cost.eval_g(EmpiricalMeasure(d, coords));
}

void check_problem(const NParticleProblem& prob) {
  const int rank = prob.n_particles * prob.cfg.dim_d;
  if (prob.n_particles < 1) throw std::invalid_argument("solve_hjb: n_particles must be >= 1");
  if (rank > 4)
    throw std::invalid_argument("solve_hjb: n_particles * dim exceeds the tensor guard of 4");
  if (prob.axis_grid.n < 5) throw std::invalid_argument("solve_hjb: axis grid too coarse");
  if (prob.n_time_steps < 2)
    throw std::invalid_argument("solve_hjb: needs at least two stored time slices");
  if (!prob.cfg.quad.valid && prob.cfg.dim_d > 1)
    throw std::invalid_argument("solve_hjb: general Hamiltonians are supported in 1D only");
  TensorShape ts(prob.axis_grid, rank);
  if (ts.total > 33000000)
    throw std::invalid_argument("solve_hjb: tensor slice exceeds the memory guard");
  if (ts.total * static_cast<std::size_t>(prob.n_time_steps) > 90000000)
    throw std::invalid_argument("solve_hjb: stored tensor exceeds the memory guard");
}

// Per-axis upwind minimization of L(a)/N + a*D over one sign branch each
// side, exact for the quadratic family.
struct AxisHamiltonian {
  const ModelConfig* cfg;
  int n_particles;
  double a_max;
  double inv_h;
  std::vector<double> drift;  // per axis node

  void prepare(const ModelConfig& c, const Grid1D& axis, int n, double speed) {
    cfg = &c;
    n_particles = n;
    a_max = speed;
    inv_h = 1.0 / axis.spacing();
    drift.resize(axis.n);
    for (int i = 0; i < axis.n; ++i)
      drift[i] = c.quad.valid ? c.quad.axis_drift(axis.node(i)) : 0.0;
  }

  // One-sided slopes dp (right) and dm (left); ia is the node index on the
  // axis, used only to detect the ends.
  double best_term(int ia, int m, double x, double dp, double dm) const {
    const double invn = 1.0 / n_particles;
    if (cfg->quad.valid) {
      const double vd = drift[ia];
      double best = 1e300;
      if (ia + 1 < m) {
        const double a = std::clamp(-vd - 2.0 * n_particles * dp, 0.0, a_max);
        const double s = a + vd;
        best = 0.25 * s * s * invn + a * dp;
      }
      if (ia > 0) {
        const double a = std::clamp(-vd - 2.0 * n_particles * dm, -a_max, 0.0);
        const double s = a + vd;
        best = std::min(best, 0.25 * s * s * invn + a * dm);
      }
      return best;
    }
    double best = 1e300;
    const int scan = 81;
    for (int k = 0; k < scan; ++k) {
      const double a = -a_max + 2.0 * a_max * k / (scan - 1);
      if ((a > 0.0 && ia + 1 >= m) || (a < 0.0 && ia <= 0)) continue;
      const double d = a > 0.0 ? dp : dm;
      best = std::min(best, cfg->hamiltonian.eval_l({&x, 1}, {&a, 1}) * invn + a * d);
    }
    return best;
  }
};

}  // namespace

double ValueTensor::value_at(int t_index, std::span<const double> x) const {
  const int r = rank();
  if (static_cast<int>(x.size()) != r)
    throw std::invalid_argument("value_at: state dimension mismatch");
  const double h = axis.spacing();
  int cell[4];
  double frac[4];
  for (int j = 0; j < r; ++j) {
    const double u = std::clamp((x[j] - axis.lo) / h, 0.0, static_cast<double>(axis.n - 1));
    int i = static_cast<int>(u);
    if (i >= axis.n - 1) i = axis.n - 2;
    cell[j] = i;
    frac[j] = u - i;
  }
  const double* s = slice(t_index);
  std::size_t stride[4] = {1, 1, 1, 1};
  for (int j = 1; j < r; ++j) stride[j] = stride[j - 1] * axis.n;
  double acc = 0.0;
  for (int corner = 0; corner < (1 << r); ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    for (int j = 0; j < r; ++j) {
      const bool hi_side = corner & (1 << j);
      w *= hi_side ? frac[j] : 1.0 - frac[j];
      flat += stride[j] * static_cast<std::size_t>(cell[j] + (hi_side ? 1 : 0));
    }
    acc += w * s[flat];
  }
  return acc;
}

ValueTensor solve_hjb(const NParticleProblem& prob) {
  check_problem(prob);
  const ModelConfig& cfg = prob.cfg;
  const int N = prob.n_particles;
  const int d = cfg.dim_d;
  const int rank = N * d;
  const TensorShape ts(prob.axis_grid, rank);
  const Grid1D axis = prob.axis_grid;
  const int M = axis.n;
  const int S = prob.n_time_steps;
  const double h = axis.spacing();

  double drift_max = 0.0;
  AxisHamiltonian ham;
  {
    double dmax = 0.0;
    if (cfg.quad.valid)
      for (int i = 0; i < M; ++i) dmax = std::max(dmax, std::abs(cfg.quad.axis_drift(axis.node(i))));
    drift_max = dmax;
  }
  const double speed = effective_speed(cfg, drift_max);
  ham.prepare(cfg, axis, N, speed);

  const double dt_max = 0.9 * h / (rank * speed);
  const double tau = cfg.horizon_T / (S - 1);
  const int nsub = std::max(1, static_cast<int>(std::ceil(tau / dt_max)));
  if (static_cast<long long>(nsub) * (S - 1) > 200000)
    throw std::invalid_argument("solve_hjb: step restriction needs too many substeps");
  const double dt = tau / nsub;

  ValueTensor out;
  out.axis = axis;
  out.n_particles = N;
  out.dim_d = d;
  out.times.resize(S);
  for (int j = 0; j < S; ++j) out.times[j] = cfg.horizon_T * j / (S - 1);
  out.values.resize(static_cast<std::size_t>(S) * ts.total);

  // Running-cost table for measure-general models; the mean path evaluates
  // inline instead.
  const bool has_f = cfg.cost.bound_f != 0.0;
  std::vector<double> f_table;
  if (has_f && !mean_path(cfg)) {
    f_table.resize(ts.total);
    for_each_node(ts, [&](std::size_t flat, const int*, const std::vector<double>& coords) {
      f_table[flat] = cfg.cost.eval_f(EmpiricalMeasure(d, coords));
    });
  }

  {
    double* term = out.values.data() + static_cast<std::size_t>(S - 1) * ts.total;
    for_each_node(ts, [&](std::size_t flat, const int*, const std::vector<double>& coords) {
      double sum = 0.0;
      for (double c : coords) sum += c;
      term[flat] = terminal_value(cfg, N, d, coords, sum);
    });
  }

  std::vector<double> cur(out.values.end() - ts.total, out.values.end());
  std::vector<double> next(ts.total), diag_buf;

  const TriLU axis_lu = value_diffusion(M, dt / (h * h));
  std::vector<DiagonalFamily> families;
  if (cfg.common_noise_a0 > 0.0) {
    families.resize(d);
    for (int c = 0; c < d; ++c) {
      std::vector<int> dims;
      for (int k = 0; k < N; ++k) dims.push_back(c + k * d);
      families[c].prepare(ts, dims, cfg.common_noise_a0 * dt / (h * h));
    }
  }

  const double inv_h = 1.0 / h;
  for (int slice_j = S - 1; slice_j > 0; --slice_j) {
    for (int sub = 0; sub < nsub; ++sub) {
      // Explicit upwind Hamiltonian and running cost.
      const std::size_t outer_count = ts.total / M;
      int oidx[4] = {0, 0, 0, 0};
      std::size_t base = 0;
      double outer_sum = (rank - 1) * axis.lo;
      for (std::size_t o = 0; o < outer_count; ++o) {
        for (int i0 = 0; i0 < M; ++i0) {
          const std::size_t flat = base + static_cast<std::size_t>(i0);
          const double c0 = cur[flat];
          double acc = 0.0;
          for (int ax = 0; ax < rank; ++ax) {
            const int ia = ax == 0 ? i0 : oidx[ax];
            const double dp =
                ia + 1 < M ? (cur[flat + ts.stride[ax]] - c0) * inv_h : 0.0;
            const double dm = ia > 0 ? (c0 - cur[flat - ts.stride[ax]]) * inv_h : 0.0;
            acc += ham.best_term(ia, M, axis.node(ia), dp, dm);
          }
          double fval = 0.0;
          if (has_f) {
            fval = mean_path(cfg) ? cfg.mean_costs.f((outer_sum + axis.node(i0)) / N)
                                  : f_table[flat];
          }
          next[flat] = c0 + dt * (acc + fval);
        }
        for (int j = 1; j < rank; ++j) {
          if (++oidx[j] < M) {
            base += ts.stride[j];
            outer_sum += h;
            break;
          }
          oidx[j] = 0;
          base -= ts.stride[j] * static_cast<std::size_t>(M - 1);
          outer_sum -= h * (M - 1);
        }
      }
      // Implicit independent-noise diffusion, one sweep per axis, then the
      // shared-noise diagonals.
      for (int ax = 0; ax < rank; ++ax) axis_implicit(next, M, ts.stride[ax], ts.total, axis_lu);
      for (auto& fam : families) fam.apply(next, diag_buf);
      cur.swap(next);
    }
    double* dst = out.values.data() + static_cast<std::size_t>(slice_j - 1) * ts.total;
    std::copy(cur.begin(), cur.end(), dst);
    for (std::size_t i = 0; i < ts.total; ++i) {
      if (!std::isfinite(dst[i])) throw std::runtime_error("solve_hjb: values diverged");
    }
  }
  return out;
}

std::vector<double> optimal_feedback(const ModelConfig& cfg, const ValueTensor& v, int t_index,
                                     std::span<const double> x) {
  const int r = v.rank();
  if (static_cast<int>(x.size()) != r)
    throw std::invalid_argument("optimal_feedback: state dimension mismatch");
  if (t_index < 0 || t_index >= static_cast<int>(v.times.size()))
    throw std::invalid_argument("optimal_feedback: time index out of range");
  const double h = v.axis.spacing();
  std::vector<double> grad(r), probe(x.begin(), x.end());
  for (int j = 0; j < r; ++j) {
    const double xj = x[j];
    const bool lo_ok = xj - h >= v.axis.lo, hi_ok = xj + h <= v.axis.hi;
    double up, dn, span;
    if (lo_ok && hi_ok) {
      probe[j] = xj + h;
      up = v.value_at(t_index, probe);
      probe[j] = xj - h;
      dn = v.value_at(t_index, probe);
      span = 2.0 * h;
    } else if (hi_ok) {
      probe[j] = xj + h;
      up = v.value_at(t_index, probe);
      dn = v.value_at(t_index, x);
      span = h;
    } else {
      up = v.value_at(t_index, x);
      probe[j] = xj - h;
      dn = v.value_at(t_index, probe);
      span = h;
    }
    probe[j] = xj;
    grad[j] = (up - dn) / span;
  }
  const int d = v.dim_d;
  std::vector<double> alpha(r);
  std::vector<double> p(d), xk(d);
  for (int k = 0; k < v.n_particles; ++k) {
    for (int c = 0; c < d; ++c) {
      p[c] = v.n_particles * grad[k * d + c];
      xk[c] = x[k * d + c];
    }
    const Vec dp = cfg.hamiltonian.grad_p_h(xk, p);
    double norm2 = 0.0;
    for (int c = 0; c < d; ++c) norm2 += dp[c] * dp[c];
    const double nrm = std::sqrt(norm2);
    const double scale =
        nrm > cfg.hamiltonian.control_radius_R ? cfg.hamiltonian.control_radius_R / nrm : 1.0;
    for (int c = 0; c < d; ++c) alpha[k * d + c] = -dp[c] * scale;
  }
  return alpha;
}

LipschitzReport lipschitz_check(const ValueTensor& v) {
  const TensorShape ts(v.axis, v.rank());
  const double inv2h = 1.0 / (2.0 * v.axis.spacing());
  const int d = v.dim_d;
  LipschitzReport rep;
  rep.node.assign(v.rank(), 0);
  for (int t = 0; t < static_cast<int>(v.times.size()); ++t) {
    const double* s = v.slice(t);
    for_each_node(ts, [&](std::size_t flat, const int* idx, const std::vector<double>&) {
      for (int k = 0; k < v.n_particles; ++k) {
        double norm2 = 0.0;
        bool interior = true;
        for (int c = 0; c < d; ++c) {
          const int ax = k * d + c;
          if (idx[ax] == 0 || idx[ax] == v.axis.n - 1) {
            interior = false;
            break;
          }
          const double g = (s[flat + ts.stride[ax]] - s[flat - ts.stride[ax]]) * inv2h;
          norm2 += g * g;
        }
        if (!interior) continue;
        const double val = v.n_particles * std::sqrt(norm2);
        if (val > rep.bound) {
          rep.bound = val;
          rep.time_index = t;
          for (int j = 0; j < v.rank(); ++j) rep.node[j] = idx[j];
        }
      }
    });
  }
  return rep;
}

double semiconcavity_check(const ValueTensor& v, int samples, std::uint64_t seed) {
  if (samples < 100) throw std::invalid_argument("semiconcavity_check: needs >= 100 samples");
  const int r = v.rank();
  const int M = v.axis.n;
  const int margin = 3;
  if (M < 2 * margin + 3)
    throw std::invalid_argument("semiconcavity_check: axis grid too coarse");
  const double h = v.axis.spacing();
  const int d = v.dim_d;

  CounterRng rng(seed, 4);
  double worst = -1e300;
  std::vector<double> x(r), plus(r), minus(r), xi(r), xi0(d);
  for (int trial = 0; trial < samples; ++trial) {
    const int t = static_cast<int>(rng.below(v.times.size()));
    for (int j = 0; j < r; ++j) {
      const int node = margin + static_cast<int>(rng.below(M - 2 * margin));
      x[j] = v.axis.node(node);
    }
    const bool common_only = trial % 5 == 1;
    const bool independent_only = trial % 7 == 2;
    for (int j = 0; j < r; ++j) xi[j] = common_only ? 0.0 : rng.normal();
    for (int c = 0; c < d; ++c) xi0[c] = independent_only ? 0.0 : rng.normal();

    double denom = 0.0;
    for (int j = 0; j < r; ++j) denom += xi[j] * xi[j];
    denom /= v.n_particles;
    for (int c = 0; c < d; ++c) denom += xi0[c] * xi0[c];
    if (denom < 1e-14) continue;

    double eta_max = 0.0;
    for (int j = 0; j < r; ++j) eta_max = std::max(eta_max, std::abs(xi[j] + xi0[j % d]));
    if (eta_max < 1e-12) continue;
    const double delta = 2.0 * h / eta_max;
    for (int j = 0; j < r; ++j) {
      const double step = delta * (xi[j] + xi0[j % d]);
      plus[j] = x[j] + step;
      minus[j] = x[j] - step;
    }
    const double second = (v.value_at(t, plus) - 2.0 * v.value_at(t, x) +
                           v.value_at(t, minus)) /
                          (delta * delta);
    worst = std::max(worst, second / denom);
  }
  return worst == -1e300 ? 0.0 : worst;
}

PolicyValue policy_evaluate_mc(const NParticleProblem& prob, const ValueTensor& v,
                               std::span<const double> x0, int trials, std::uint64_t seed) {
  const ModelConfig& cfg = prob.cfg;
  const int r = v.rank();
  const int N = v.n_particles;
  const int d = v.dim_d;
  if (trials < 1000) throw std::invalid_argument("policy_evaluate_mc: needs >= 1000 trials");
  if (static_cast<int>(x0.size()) != r)
    throw std::invalid_argument("policy_evaluate_mc: state dimension mismatch");
  const double h = v.axis.spacing();
  const double pad_lo = v.axis.lo + 2.0 * h, pad_hi = v.axis.hi - 2.0 * h;
  for (double c : x0) {
    if (!(c >= pad_lo && c <= pad_hi))
      throw std::invalid_argument("policy_evaluate_mc: start state outside the padded box");
  }

  const int S = static_cast<int>(v.times.size());
  const int steps = std::max(120, 4 * (S - 1));
  const double dt = cfg.horizon_T / steps;
  const double root_own = std::sqrt(2.0 * dt);
  const double root_shared = std::sqrt(2.0 * cfg.common_noise_a0 * dt);

  const auto running_l = [&](std::span<const double> x, const std::vector<double>& a) {
    double acc = 0.0;
    std::vector<double> xk(d), ak(d);
    for (int k = 0; k < N; ++k) {
      if (cfg.quad.valid) {
        for (int c = 0; c < d; ++c) {
          const double s = a[k * d + c] + cfg.quad.axis_drift(x[k * d + c]);
          acc += 0.25 * s * s;
        }
      } else {
        for (int c = 0; c < d; ++c) {
          xk[c] = x[k * d + c];
          ak[c] = a[k * d + c];
        }
        acc += cfg.hamiltonian.eval_l(xk, ak);
      }
    }
    return acc / N;
  };
  const auto mean_cost = [&](std::span<const double> x, bool terminal) {
    if (mean_path(cfg)) {
      double sum = 0.0;
      for (double c : x) sum += c;
      return terminal ? cfg.mean_costs.g(sum / N) : cfg.mean_costs.f(sum / N);
    }
    const EmpiricalMeasure m(d, std::vector<double>(x.begin(), x.end()));
    return terminal ? cfg.cost.eval_g(m) : cfg.cost.eval_f(m);
  };
  const bool has_f = cfg.cost.bound_f != 0.0;

  double sum = 0.0, sumsq = 0.0;
  int kept = 0, discarded = 0;
  std::vector<double> x(r), shared(d);
  for (int trial = 0; trial < trials; ++trial) {
    CounterRng rng(seed, 1 + static_cast<std::uint64_t>(trial));
    std::copy(x0.begin(), x0.end(), x.begin());
    double cost = 0.0;
    bool alive = true;
    for (int n = 0; n < steps && alive; ++n) {
      const double t = n * dt;
      int sl = static_cast<int>(std::upper_bound(v.times.begin(), v.times.end(), t) -
                                v.times.begin()) -
               1;
      sl = std::clamp(sl, 0, S - 1);
      const std::vector<double> alpha = optimal_feedback(cfg, v, sl, x);
      cost += dt * running_l(x, alpha);
      if (has_f) cost += dt * mean_cost(x, false);
      for (int c = 0; c < d; ++c) shared[c] = rng.normal();
      for (int j = 0; j < r; ++j) {
        x[j] += alpha[j] * dt + root_own * rng.normal() + root_shared * shared[j % d];
        if (!(x[j] >= pad_lo && x[j] <= pad_hi)) alive = false;
      }
    }
    if (!alive) {
      ++discarded;
      continue;
    }
    cost += mean_cost(x, true);
    sum += cost;
    sumsq += cost * cost;
    ++kept;
  }
  if (discarded > trials / 100)
    throw std::runtime_error("policy_evaluate_mc: discard rate above 1% (" +
                             std::to_string(discarded) + " of " + std::to_string(trials) + ")");
  if (kept == 0) throw std::runtime_error("policy_evaluate_mc: no surviving trials");
  PolicyValue out;
  out.mean = sum / kept;
  const double var = std::max(0.0, sumsq / kept - out.mean * out.mean);
  out.std_error = std::sqrt(var / kept);
  out.discarded = discarded;
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void export_binary(const ValueTensor& v, const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_binary: cannot open " + path);
    out.write(reinterpret_cast<const char*>(v.values.data()),
              static_cast<std::streamsize>(v.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("export_binary: write failed for " + path);
  }
  std::ofstream meta(path + ".json");
  if (!meta) throw std::runtime_error("export_binary: cannot open " + path + ".json");
  meta << "{\n";
  meta << "  \"axis\": {\"lo\": " << fmt_double(v.axis.lo) << ", \"hi\": " << fmt_double(v.axis.hi)
       << ", \"n\": " << v.axis.n << "},\n";
  meta << "  \"dim\": " << v.dim_d << ",\n";
  meta << "  \"n_particles\": " << v.n_particles << ",\n";
  meta << "  \"times\": [";
  for (std::size_t j = 0; j < v.times.size(); ++j)
    meta << (j ? ", " : "") << fmt_double(v.times[j]);
  meta << "],\n";
  meta << "  \"layout\": \"time-major, first particle coordinate fastest\",\n";
  meta << "  \"count\": " << v.values.size() << "\n";
  meta << "}\n";
}

void export_slice_csv(const ValueTensor& v, int t_index, const std::string& path) {
  if (t_index < 0 || t_index >= static_cast<int>(v.times.size()))
    throw std::invalid_argument("export_slice_csv: time index out of range");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_slice_csv: cannot open " + path);
  for (int j = 0; j < v.rank(); ++j) out << "x" << j + 1 << ",";
  out << "value\n";
  const double* s = v.slice(t_index);
  const TensorShape ts(v.axis, v.rank());
  for_each_node(ts, [&](std::size_t flat, const int*, const std::vector<double>& coords) {
    for (double c : coords) out << fmt_double(c) << ",";
    out << fmt_double(s[flat]) << "\n";
  });
  if (!out) throw std::runtime_error("export_slice_csv: write failed for " + path);
}

}  // namespace mfc

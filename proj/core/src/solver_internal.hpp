#pragma once

// Shared pieces of the PDE solvers; internal to the library, not installed.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfclab/grid.hpp"
#include "mfclab/model.hpp"

namespace mfc::detail {

// Prefactored tridiagonal LU; factor once per solve, apply per time step.
struct TriLU {
  std::vector<double> low, piv, up;

  void factor(const std::vector<double>& sub, const std::vector<double>& diag,
              const std::vector<double>& sup) {
    const std::size_t n = diag.size();
    low.assign(n, 0.0);
    piv = diag;
    up = sup;
    for (std::size_t i = 1; i < n; ++i) {
      low[i] = sub[i - 1] / piv[i - 1];
      piv[i] = diag[i] - low[i] * up[i - 1];
    }
  }
  void solve(std::vector<double>& d) const {
    const std::size_t n = piv.size();
    for (std::size_t i = 1; i < n; ++i) d[i] -= low[i] * d[i - 1];
    d[n - 1] /= piv[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - up[i] * d[i + 1]) / piv[i];
  }
};

// Implicit diffusion for value sweeps: interior rows of I - r*D2, identity
// rows at the ends (second derivative dropped at the boundary).
inline TriLU value_diffusion(int n, double r) {
  std::vector<double> sub(n - 1, -r), diag(n, 1.0 + 2.0 * r), sup(n - 1, -r);
  diag[0] = diag[n - 1] = 1.0;
  sup[0] = 0.0;
  sub[n - 2] = 0.0;
  TriLU lu;
  lu.factor(sub, diag, sup);
  return lu;
}

// Implicit diffusion for density sweeps: zero-flux rows keep every column
// sum of I - r*D2 at one, so the node sum is conserved exactly.
inline TriLU density_diffusion(int n, double r) {
  std::vector<double> sub(n - 1, -r), diag(n, 1.0 + 2.0 * r), sup(n - 1, -r);
  diag[0] = diag[n - 1] = 1.0 + r;
  TriLU lu;
  lu.factor(sub, diag, sup);
  return lu;
}

// Speed bound actually used by the solvers: the declared radius capped by
// what the optimal feedback can reach, |D_pH| <= 2*Lip(value) + |drift|.
inline double effective_speed(const ModelConfig& cfg, double drift_max) {
  const double lip = cfg.cost.lip_g + cfg.horizon_T * cfg.cost.lip_f;
  return std::min(cfg.hamiltonian.control_radius_R, 2.0 * lip + drift_max + 1.0);
}

}  // namespace mfc::detail

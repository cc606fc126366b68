#pragma once

// Published spot-check fixtures: fitted scaling-law coefficients and the
// per-regime best AdamW validation losses from the upstream benchmark's
// result tables (losses rounded there to 3 decimals).

#include <vector>

#include "optbench/fitlaw.hpp"

namespace optbench::fixtures {

// L(N, D) = alpha * N^-A + beta * D^-B + gamma.
inline FitCoeffs adamw_lnd_coeffs() {
  FitCoeffs c;
  c.form = ModelForm::kLND;
  c.alpha = 21.4289;
  c.a_exp = 0.1555;
  c.beta = 276.4235;
  c.b_exp = 0.2804;
  c.gamma = 1.7324;
  return c;
}

inline FitCoeffs muon_lnd_coeffs() {
  FitCoeffs c;
  c.form = ModelForm::kLND;
  c.alpha = 32.7458;
  c.a_exp = 0.1864;
  c.beta = 59.0221;
  c.b_exp = 0.2074;
  c.gamma = 1.8063;
  return c;
}

struct LossPoint {
  double n;  // non-embedding parameter count
  double d;  // training tokens
  double loss;
};

// Non-embedding parameter counts for the four model sizes (32 layers of
// 4*h^2 attention + 3*h*inter mlp): 134.2M, 302.0M, 536.9M, 1.208B. Data
// budgets are 20*N*{1,2,4,8} tokens; the table headers truncate these
// (e.g. 2.416e10 -> "24B").
inline std::vector<LossPoint> adamw_best_losses() {
  const double n130 = 134217728.0;
  const double n300 = 301989888.0;
  const double n520 = 536870912.0;
  const double n1200 = 1207959552.0;
  auto d = [](double n, double ratio) { return 20.0 * n * ratio; };
  return {
      {n130, d(n130, 1), 3.529},   {n130, d(n130, 2), 3.409},
      {n130, d(n130, 4), 3.322},   {n130, d(n130, 8), 3.262},
      {n300, d(n300, 1), 3.264},   {n300, d(n300, 2), 3.166},
      {n300, d(n300, 4), 3.094},   {n300, d(n300, 8), 3.043},
      {n520, d(n520, 1), 3.110},   {n520, d(n520, 2), 3.023},
      {n520, d(n520, 4), 2.958},   {n520, d(n520, 8), 2.913},
      {n1200, d(n1200, 1), 2.905}, {n1200, d(n1200, 2), 2.836},
      {n1200, d(n1200, 4), 2.787}, {n1200, d(n1200, 8), 2.752},
  };
}

}  // namespace optbench::fixtures

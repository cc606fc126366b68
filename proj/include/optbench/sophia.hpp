#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

#include "optbench/rng.hpp"
#include "optbench/tensor.hpp"

namespace optbench {

struct SophiaHyper {
  double beta1 = 0.95;
  double beta2 = 0.99;
  double gamma = 0.05;   // Hessian scale in max(gamma*h, eps)
  double eps = 1e-12;
  int64_t k = 10;        // Hessian refresh interval
  double weight_decay = 0.0;

  void validate() const;
};

struct SophiaState {
  Tensor m;
  Tensor h;  // EMA Hessian-diagonal estimate, refreshed only at t mod k == 1
  int64_t t = 0;
};

struct SophiaStepResult {
  Tensor w;
  SophiaState state;
};

// Single-sample Hutchinson estimate r (.) (H r) of diag(H) from an HVP oracle.
Tensor hutchinson_diag_estimate(const std::function<Tensor(const Tensor&)>& hvp,
                                const std::vector<int64_t>& shape, RngStream& rng);

// One Sophia-H step. `hutch_sample` must be supplied exactly at refresh steps
// (the new t with t mod k == 1; every step when k == 1) and is EMA'd into h.
// Update: w' = w(1 - lr*wd) - lr * clamp(m / max(gamma*h, eps), -1, 1).
SophiaStepResult sophia_step(const Tensor& w, const Tensor& g, const SophiaHyper& h, double lr,
                             SophiaState s, const std::optional<Tensor>& hutch_sample);

// Whether the step moving to t+1 refreshes the Hessian estimate.
bool sophia_refresh_due(int64_t next_t, int64_t k);

}  // namespace optbench

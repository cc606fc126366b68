#include "optbench/sophia.hpp"

#include <algorithm>
#include <cmath>

#include "optbench/errors.hpp"
#include "optbench/scalar_optimizers.hpp"

namespace optbench {

void SophiaHyper::validate() const {
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("sophia: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0) || gamma < 0.0 || weight_decay < 0.0 || k <= 0) {
    throw ConfigError("sophia: need eps > 0, gamma >= 0, wd >= 0, k > 0");
  }
}

Tensor hutchinson_diag_estimate(const std::function<Tensor(const Tensor&)>& hvp,
                                const std::vector<int64_t>& shape, RngStream& rng) {
  const Tensor r = rademacher_like(rng, shape);
  Tensor u = hvp(r);
  if (!u.all_finite()) throw NumericError("hutchinson_diag_estimate: non-finite HVP output");
  check_same_shape(r, u, "hutchinson_diag_estimate");
  return r * u;
}

bool sophia_refresh_due(int64_t next_t, int64_t k) {
  return k == 1 || next_t % k == 1;
}

SophiaStepResult sophia_step(const Tensor& w, const Tensor& g, const SophiaHyper& h, double lr,
                             SophiaState s, const std::optional<Tensor>& hutch_sample) {
  require_finite_gradient(g, "sophia_step");
  check_same_shape(w, g, "sophia_step");
  if (s.m.empty()) s.m = Tensor::zeros(w.shape());
  if (s.h.empty()) s.h = Tensor::zeros(w.shape());
  s.t += 1;

  const bool refresh = sophia_refresh_due(s.t, h.k);
  if (refresh != hutch_sample.has_value()) {
    throw ConfigError(refresh ? "sophia_step: refresh step needs a Hutchinson sample"
                              : "sophia_step: Hutchinson sample supplied off-schedule");
  }
  if (hutch_sample) {
    check_same_shape(w, *hutch_sample, "sophia_step");
    for (int64_t i = 0; i < s.h.size(); ++i) {
      s.h[i] = h.beta2 * s.h[i] + (1.0 - h.beta2) * (*hutch_sample)[i];
    }
  }

  Tensor out = w;
  for (int64_t i = 0; i < w.size(); ++i) {
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g[i];
    const double denom = std::max(h.gamma * s.h[i], h.eps);
    const double ratio = std::clamp(s.m[i] / denom, -1.0, 1.0);
    out[i] = w[i] * (1.0 - lr * h.weight_decay) - lr * ratio;
  }
  return {std::move(out), std::move(s)};
}

}  // namespace optbench

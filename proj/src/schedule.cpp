#include "optbench/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "optbench/errors.hpp"

namespace optbench {

void Schedule::validate() const {
  if (!(peak_lr > 0.0)) throw ConfigError("schedule: peak_lr must be positive");
  if (total_steps <= 0) throw ConfigError("schedule: total_steps must be positive");
  if (warmup_steps < 0) throw ConfigError("schedule: warmup_steps must be non-negative");
  if (warmup_steps >= total_steps) {
    throw ConfigError("schedule: warmup_steps must be < total_steps");
  }
  if (min_lr_ratio < 0.0 || min_lr_ratio > 1.0) {
    throw ConfigError("schedule: min_lr_ratio must be in [0, 1]");
  }
  if (wsd_decay_fraction && !(*wsd_decay_fraction > 0.0 && *wsd_decay_fraction <= 1.0)) {
    throw ConfigError("schedule: wsd_decay must be in (0, 1]");
  }
}

double lr_at(const Schedule& sch, int64_t step) {
  if (step < 0 || step > sch.total_steps) {
    throw RangeError("lr_at: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(sch.total_steps) + "]");
  }
  if (step < sch.warmup_steps) {
    return sch.peak_lr * static_cast<double>(step) / static_cast<double>(sch.warmup_steps);
  }
  const double min_lr = sch.min_lr_ratio * sch.peak_lr;

  if (sch.wsd_decay_fraction) {
    const double total = static_cast<double>(sch.total_steps);
    const double decay_start = total - *sch.wsd_decay_fraction * total;
    if (static_cast<double>(step) <= decay_start) return sch.peak_lr;
    const double progress = (static_cast<double>(step) - decay_start) / (total - decay_start);
    return sch.peak_lr + (min_lr - sch.peak_lr) * progress;
  }

  const double span = static_cast<double>(sch.total_steps - sch.warmup_steps);
  const double progress = static_cast<double>(step - sch.warmup_steps) / span;
  if (sch.decay_shape == DecayShape::kCosine) {
    return min_lr + (sch.peak_lr - min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }
  return sch.peak_lr + (min_lr - sch.peak_lr) * progress;
}

double clip_factor(double norm, const ClipPolicy& policy) {
  if (policy.max_norm <= 0.0 || norm <= policy.max_norm || norm == 0.0) return 1.0;
  return policy.max_norm / norm;
}

Tensor clip_gradient(const Tensor& g, const ClipPolicy& policy) {
  const double f = clip_factor(frobenius_norm(g), policy);
  if (f == 1.0) return g;
  return f * g;
}

double global_l2_norm(const std::vector<Tensor>& gs) {
  double s = 0.0;
  for (const auto& g : gs) {
    for (int64_t i = 0; i < g.size(); ++i) s += g[i] * g[i];
  }
  return std::sqrt(s);
}

void clip_gradients(std::vector<Tensor>& gs, const ClipPolicy& policy) {
  const double f = clip_factor(global_l2_norm(gs), policy);
  if (f == 1.0) return;
  for (auto& g : gs) g *= f;
}

}  // namespace optbench

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "optbench/tensor.hpp"

namespace optbench {

enum class DecayShape { kCosine, kLinear };

// Learning-rate schedule: linear warmup to peak_lr, then either a cosine or
// linear decay down to min_lr_ratio * peak_lr at total_steps. When
// wsd_decay_fraction is set, the lr instead holds at peak until
// (1 - f) * total_steps and then decays linearly over the final fraction f.
struct Schedule {
  double peak_lr = 0.0;
  int64_t warmup_steps = 0;
  int64_t total_steps = 1;
  DecayShape decay_shape = DecayShape::kCosine;
  double min_lr_ratio = 0.0;
  std::optional<double> wsd_decay_fraction;  // in (0, 1]

  void validate() const;  // throws ConfigError
};

double lr_at(const Schedule& sch, int64_t step);  // 0 <= step <= total_steps

// Global gradient-norm cap; max_norm == 0 disables clipping.
struct ClipPolicy {
  double max_norm = 0.0;
};

// Downscale g so its L2 norm is at most max_norm; direction preserved.
Tensor clip_gradient(const Tensor& g, const ClipPolicy& policy);

// Multi-block form: one factor computed from the concatenated L2 norm.
double global_l2_norm(const std::vector<Tensor>& gs);
double clip_factor(double norm, const ClipPolicy& policy);  // in (0, 1]
void clip_gradients(std::vector<Tensor>& gs, const ClipPolicy& policy);

}  // namespace optbench

#pragma once

#include <cstdint>
#include <utility>

#include "optbench/blocks.hpp"
#include "optbench/schedule.hpp"
#include "optbench/tensor.hpp"

namespace optbench {

// Hyperparameters shared by the element-wise optimizers.
struct ScalarHyper {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-10;
  double weight_decay = 0.0;
  double mars_gamma = 0.0;    // MARS only
  double lion_beta2 = 0.98;   // Lion only: decay of the stored momentum
  ClipPolicy clip;            // applied per the algorithm (to g, or to c for MARS)

  void validate() const;  // betas in [0,1), eps > 0, all finite
};

// Per-block accumulators. Empty tensors mean "zero state"; they are
// materialized on first use so a default-constructed state is a valid start.
struct MomentState {
  Tensor m;
  Tensor v;                      // absent for Lion
  Tensor prev_grad;              // MARS only
  std::vector<double> v_blocks;  // Adam-mini only: one scalar per block
  int64_t t = 0;
};

struct StepResult {
  Tensor w;
  MomentState state;
};

// Pure step functions: (w, g, hyper, lr, state) -> (w', state'). Each clips
// its gradient per its own algorithm; weight decay is decoupled (-lr*wd*w).
StepResult adamw_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                      MomentState s);
StepResult nadamw_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                       MomentState s);
StepResult lion_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                     MomentState s);
StepResult mars_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                     MomentState s);
StepResult cautious_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                         MomentState s);
StepResult adammini_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                         MomentState s, const BlockPartition& partition);

// Cores operating on an already-clipped gradient. The step functions above
// are clip + core; multi-block drivers clip once over the global norm and
// then call these per block.
StepResult adamw_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                      MomentState s);
StepResult nadamw_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                       MomentState s);
StepResult lion_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                     MomentState s);
StepResult cautious_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                         MomentState s);
StepResult adammini_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                         MomentState s, const BlockPartition& partition);
// MARS: c_t = g + gamma * beta1/(1-beta1) * (g - prev_grad).
Tensor mars_corrected_gradient(const Tensor& g, const Tensor& prev_grad, const ScalarHyper& h);

void require_finite_gradient(const Tensor& g, const char* who);

}  // namespace optbench

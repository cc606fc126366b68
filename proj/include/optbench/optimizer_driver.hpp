#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "optbench/blocks.hpp"
#include "optbench/hyper.hpp"
#include "optbench/tensor.hpp"

namespace optbench {

// Hessian-vector product over the full block list at the given parameters;
// batch_seed selects the (frozen) minibatch for inexact oracles.
using HvpOracle = std::function<std::vector<Tensor>(const std::vector<ParamBlock>&,
                                                    const std::vector<Tensor>&, uint64_t)>;

// Per-optimizer hyperparameter schema mirroring the sweep-table columns.
// `lr` is always required; schedule-level keys (warmup, min_lr_ratio,
// decay_shape, wsd_decay, batch) are accepted everywhere and consumed by the
// harness rather than the optimizer.
struct OptimizerSchema {
  std::set<std::string> required;
  HyperConfig defaults;  // optional keys with their default values
};

const std::vector<std::string>& known_optimizers();
const OptimizerSchema& optimizer_schema(const std::string& name);  // throws on unknown name

// Schema check: unknown keys rejected, required keys present, types sane.
void validate_hypers(const std::string& optimizer, const HyperConfig& hypers);
// Validated config with defaults filled in (used for CSV columns and drivers).
HyperConfig hypers_with_defaults(const std::string& optimizer, const HyperConfig& hypers);

struct StepContext {
  uint64_t batch_seed = 0;  // minibatch identity for Hessian refreshes
};

// Uniform stateful interface over all eleven optimizers. step() consumes the
// raw gradients (clipping is the optimizer's own first move, per-algorithm).
class OptimizerDriver {
 public:
  virtual ~OptimizerDriver() = default;
  virtual void step(std::vector<ParamBlock>& params, std::vector<Tensor> grads, double lr,
                    const StepContext& ctx) = 0;
  virtual int64_t steps_taken() const = 0;
};

struct OptimizerSetup {
  std::string name;
  HyperConfig hypers;  // pre-validation; defaults are applied internally
  uint64_t master_seed = 0;
  uint64_t trial_id = 0;
  HvpOracle hvp;  // required for sophia
};

std::unique_ptr<OptimizerDriver> make_optimizer(const OptimizerSetup& setup,
                                                const std::vector<ParamBlock>& params);

}  // namespace optbench

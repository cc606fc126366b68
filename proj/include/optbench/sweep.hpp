#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "optbench/hyper.hpp"

namespace optbench {

// Discrete candidate values per hyperparameter. Lists are non-empty and
// duplicate-free.
struct Grid {
  std::map<std::string, std::vector<HyperValue>> values;
  void validate() const;
  bool contains(const std::string& name, const HyperValue& v) const;
};

// Coordinate-descent thresholds.
struct SweepConfig {
  double delta1 = 3e-3;    // accept a move only if it improves by more than this
  double delta2 = 6.4e-3;  // near-optimal band above the regime's best loss
  int max_passes = 6;
  std::vector<std::string> coordinate_order;  // empty -> default order

  void validate() const;
};

// Default coordinate order: lr, wd, warmup, beta1, beta2, eps, clip, batch,
// then any remaining grid keys in grid (key) order.
std::vector<std::string> resolve_coordinate_order(const Grid& grid,
                                                  const std::vector<std::string>& requested);

struct Regime {
  double n = 0.0;  // parameter-count proxy
  double d = 0.0;  // data-budget proxy
  std::string label;
};

struct TrialCurvePoint {
  int64_t step;
  double loss;
};

struct TrialRecord {
  std::string regime_label;
  HyperConfig config;
  double final_loss = 0.0;  // +inf for failed trials
  std::vector<TrialCurvePoint> curve;
  bool failed = false;
};

struct EvalOutcome {
  double final_loss = 0.0;
  std::vector<TrialCurvePoint> curve;
  bool failed = false;
};

using TrialEvaluator = std::function<EvalOutcome(const HyperConfig&)>;

struct SweepResult {
  HyperConfig best;
  double best_loss = 0.0;
  std::vector<TrialRecord> ledger;  // every distinct evaluation exactly once
  int passes = 0;
};

// One-at-a-time coordinate descent over the grid: per coordinate, evaluate
// all candidates with the others held at the incumbent, accept the best
// candidate only if it improves the incumbent loss by more than delta1.
// Stops after a full pass with no accepted move (or max_passes). Evaluations
// are memoized; evaluator failures score +inf and the search continues.
SweepResult coordinate_descent(const Grid& grid, const HyperConfig& start,
                               const TrialEvaluator& evaluator, const SweepConfig& cfg);

// All configs whose loss is within delta2 of the best observed loss.
// Throws ConfigError on empty input.
std::vector<HyperConfig> near_optimal_set(const std::vector<TrialRecord>& records, double delta2);

struct SensitivityResult {
  bool sensitive = false;
  std::optional<HyperValue> witness;  // set when insensitive
};

// A hyperparameter is scaling-insensitive when one value appears in at least
// one near-optimal config of every regime; the witness is the smallest such
// value. Needs >= 2 regimes; throws ConfigError when the name is absent from
// the configs.
SensitivityResult classify_scaling_sensitivity(
    const std::vector<std::vector<HyperConfig>>& per_regime_sets, const std::string& hyper_name);

}  // namespace optbench

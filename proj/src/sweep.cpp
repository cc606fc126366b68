#include "optbench/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "optbench/errors.hpp"

namespace optbench {

void Grid::validate() const {
  for (const auto& [name, list] : values) {
    if (list.empty()) throw ConfigError("grid for '" + name + "' is empty");
    for (size_t i = 0; i < list.size(); ++i) {
      for (size_t j = i + 1; j < list.size(); ++j) {
        if (hyper_equal(list[i], list[j])) {
          throw ConfigError("grid for '" + name + "' has duplicate value " +
                            hyper_to_string(list[i]));
        }
      }
    }
  }
}

bool Grid::contains(const std::string& name, const HyperValue& v) const {
  auto it = values.find(name);
  if (it == values.end()) return false;
  for (const auto& cand : it->second) {
    if (hyper_equal(cand, v)) return true;
  }
  return false;
}

void SweepConfig::validate() const {
  if (!(delta1 > 0.0) || !(delta2 > 0.0)) throw ConfigError("sweep: deltas must be positive");
  if (max_passes <= 0) throw ConfigError("sweep: max_passes must be positive");
}

std::vector<std::string> resolve_coordinate_order(const Grid& grid,
                                                  const std::vector<std::string>& requested) {
  static const char* kDefault[] = {"lr", "wd", "warmup", "beta1", "beta2", "eps", "clip", "batch"};
  std::vector<std::string> order;
  auto push_if_known = [&](const std::string& name) {
    if (grid.values.count(name) && std::find(order.begin(), order.end(), name) == order.end()) {
      order.push_back(name);
    }
  };
  if (!requested.empty()) {
    for (const auto& name : requested) {
      if (!grid.values.count(name)) {
        throw ConfigError("coordinate_order names unknown hyperparameter '" + name + "'");
      }
      push_if_known(name);
    }
  } else {
    for (const char* name : kDefault) push_if_known(name);
  }
  for (const auto& [name, _] : grid.values) push_if_known(name);
  return order;
}

SweepResult coordinate_descent(const Grid& grid, const HyperConfig& start,
                               const TrialEvaluator& evaluator, const SweepConfig& cfg) {
  grid.validate();
  cfg.validate();
  // Every swept coordinate must start on a grid point; keys outside the grid
  // ride along as fixed constants.
  for (const auto& [name, candidates] : grid.values) {
    (void)candidates;
    auto it = start.find(name);
    if (it == start.end()) {
      throw ConfigError("start config must assign swept hyperparameter '" + name + "'");
    }
    if (!grid.contains(name, it->second)) {
      throw ConfigError("start value " + hyper_to_string(it->second) + " for '" + name +
                        "' is not a grid candidate");
    }
  }

  SweepResult result;
  std::unordered_map<std::string, double> memo;

  auto evaluate = [&](const HyperConfig& c) -> double {
    const std::string key = config_key(c);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    TrialRecord rec;
    rec.config = c;
    try {
      EvalOutcome out = evaluator(c);
      rec.failed = out.failed || !std::isfinite(out.final_loss);
      rec.final_loss = rec.failed ? std::numeric_limits<double>::infinity() : out.final_loss;
      rec.curve = std::move(out.curve);
    } catch (const std::exception&) {
      rec.failed = true;
      rec.final_loss = std::numeric_limits<double>::infinity();
    }
    memo.emplace(key, rec.final_loss);
    result.ledger.push_back(std::move(rec));
    return memo.at(key);
  };

  const auto order = resolve_coordinate_order(grid, cfg.coordinate_order);
  HyperConfig incumbent = start;
  double incumbent_loss = evaluate(incumbent);

  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    result.passes = pass + 1;
    bool any_accepted = false;
    for (const auto& name : order) {
      const auto& candidates = grid.values.at(name);
      double best_loss = std::numeric_limits<double>::infinity();
      const HyperValue* best_value = nullptr;
      for (const auto& value : candidates) {
        HyperConfig trial = incumbent;
        trial[name] = value;
        const double loss = evaluate(trial);
        if (loss < best_loss) {  // first-in-grid-order wins ties
          best_loss = loss;
          best_value = &value;
        }
      }
      if (best_value && !hyper_equal(incumbent.at(name), *best_value) &&
          best_loss < incumbent_loss - cfg.delta1) {
        incumbent[name] = *best_value;
        incumbent_loss = best_loss;
        any_accepted = true;
      }
    }
    if (!any_accepted) break;
  }

  result.best = std::move(incumbent);
  result.best_loss = incumbent_loss;
  return result;
}

std::vector<HyperConfig> near_optimal_set(const std::vector<TrialRecord>& records, double delta2) {
  if (records.empty()) throw ConfigError("near_optimal_set: no trial records");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : records) best = std::min(best, r.final_loss);
  if (!std::isfinite(best)) throw ConfigError("near_optimal_set: every trial failed");

  std::vector<HyperConfig> out;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.final_loss <= best + delta2 && seen.insert(config_key(r.config)).second) {
      out.push_back(r.config);
    }
  }
  return out;
}

SensitivityResult classify_scaling_sensitivity(
    const std::vector<std::vector<HyperConfig>>& per_regime_sets, const std::string& hyper_name) {
  if (per_regime_sets.size() < 2) {
    throw ConfigError("classify_scaling_sensitivity: need at least 2 regimes");
  }
  for (const auto& regime : per_regime_sets) {
    for (const auto& config : regime) {
      if (!config.count(hyper_name)) {
        throw ConfigError("hyperparameter '" + hyper_name + "' absent from a near-optimal config");
      }
    }
  }

  // Candidate witnesses: values of this hyper in the first regime's set.
  std::vector<HyperValue> witnesses;
  for (const auto& config : per_regime_sets.front()) {
    const HyperValue& v = config.at(hyper_name);
    if (std::none_of(witnesses.begin(), witnesses.end(),
                     [&](const HyperValue& w) { return hyper_equal(w, v); })) {
      witnesses.push_back(v);
    }
  }
  std::sort(witnesses.begin(), witnesses.end(), hyper_less);

  for (const auto& w : witnesses) {
    bool everywhere = true;
    for (const auto& regime : per_regime_sets) {
      const bool found = std::any_of(regime.begin(), regime.end(), [&](const HyperConfig& c) {
        return hyper_equal(c.at(hyper_name), w);
      });
      if (!found) {
        everywhere = false;
        break;
      }
    }
    if (everywhere) return {false, w};
  }
  return {true, std::nullopt};
}

}  // namespace optbench

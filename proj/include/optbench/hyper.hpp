#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace optbench {

// A hyperparameter value as it appears in grids and configs.
using HyperValue = std::variant<bool, int64_t, double, std::string>;

// Named, ordered (by key) map of hyperparameter values.
using HyperConfig = std::map<std::string, HyperValue>;

std::string hyper_to_string(const HyperValue& v);  // shortest round-trip for doubles
std::string config_key(const HyperConfig& c);      // canonical "k=v;..." form
bool hyper_equal(const HyperValue& a, const HyperValue& b);
// Ordering used for witness tie-breaking: numeric ascending, then strings.
bool hyper_less(const HyperValue& a, const HyperValue& b);

double hyper_as_double(const HyperValue& v, const std::string& key);   // bool/int/double
int64_t hyper_as_int(const HyperValue& v, const std::string& key);     // exact integral
bool hyper_as_bool(const HyperValue& v, const std::string& key);
std::string hyper_as_string(const HyperValue& v, const std::string& key);

// FNV-1a hash of the canonical form; stable across runs and platforms.
uint64_t config_hash(const HyperConfig& c);

}  // namespace optbench

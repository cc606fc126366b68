#include "optbench/hyper.hpp"

#include <charconv>
#include <cmath>

#include "optbench/errors.hpp"

namespace optbench {

std::string hyper_to_string(const HyperValue& v) {
  if (const bool* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  if (const int64_t* i = std::get_if<int64_t>(&v)) return std::to_string(*i);
  if (const double* d = std::get_if<double>(&v)) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), *d);
    return std::string(buf, ptr);
  }
  return std::get<std::string>(v);
}

std::string config_key(const HyperConfig& c) {
  std::string out;
  for (const auto& [k, v] : c) {
    out += k;
    out += '=';
    out += hyper_to_string(v);
    out += ';';
  }
  return out;
}

bool hyper_equal(const HyperValue& a, const HyperValue& b) {
  return a == b;
}

namespace {
// bool < int/double < string for cross-type comparisons; within numerics,
// compare by value.
int type_rank(const HyperValue& v) {
  if (std::holds_alternative<bool>(v)) return 0;
  if (std::holds_alternative<std::string>(v)) return 2;
  return 1;
}
double numeric_value(const HyperValue& v) {
  if (const int64_t* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}
}  // namespace

bool hyper_less(const HyperValue& a, const HyperValue& b) {
  const int ra = type_rank(a), rb = type_rank(b);
  if (ra != rb) return ra < rb;
  switch (ra) {
    case 0: return !std::get<bool>(a) && std::get<bool>(b);
    case 1: return numeric_value(a) < numeric_value(b);
    default: return std::get<std::string>(a) < std::get<std::string>(b);
  }
}

double hyper_as_double(const HyperValue& v, const std::string& key) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const int64_t* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  throw ConfigError("hyperparameter '" + key + "' must be numeric");
}

int64_t hyper_as_int(const HyperValue& v, const std::string& key) {
  if (const int64_t* i = std::get_if<int64_t>(&v)) return *i;
  if (const double* d = std::get_if<double>(&v)) {
    if (*d == std::floor(*d)) return static_cast<int64_t>(*d);
  }
  throw ConfigError("hyperparameter '" + key + "' must be an integer");
}

bool hyper_as_bool(const HyperValue& v, const std::string& key) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError("hyperparameter '" + key + "' must be a boolean");
}

std::string hyper_as_string(const HyperValue& v, const std::string& key) {
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("hyperparameter '" + key + "' must be a string");
}

uint64_t config_hash(const HyperConfig& c) {
  const std::string key = config_key(c);
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : key) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace optbench

#include "optbench/rng.hpp"

#include <cmath>
#include <numbers>

namespace optbench {

namespace {
constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}
}  // namespace

uint64_t splitmix64_mix(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream seed_stream(uint64_t seed) { return RngStream{seed, 0}; }

RngStream derive_stream(uint64_t master_seed, uint64_t trial_id, std::string_view purpose) {
  const uint64_t sid = splitmix64_mix(splitmix64_mix(trial_id + kGamma) ^ fnv1a64(purpose));
  return RngStream{splitmix64_mix(master_seed ^ sid), sid};
}

std::pair<uint64_t, RngStream> next_u64(const RngStream& s) {
  RngStream next = s;
  next.state += kGamma;
  return {splitmix64_mix(next.state), next};
}

uint64_t draw_u64(RngStream& s) {
  auto [v, next] = next_u64(s);
  s = next;
  return v;
}

double draw_unit(RngStream& s) {
  // 53 top bits -> [0, 1).
  return static_cast<double>(draw_u64(s) >> 11) * 0x1.0p-53;
}

Tensor rademacher_like(RngStream& s, std::vector<int64_t> shape) {
  Tensor out(std::move(shape));
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] = (draw_u64(s) >> 63) ? 1.0 : -1.0;
  }
  return out;
}

Tensor gaussian_like(RngStream& s, std::vector<int64_t> shape) {
  Tensor out(std::move(shape));
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; i += 2) {
    // u1 in (0, 1] so the log is finite; u2 in [0, 1).
    const double u1 = (static_cast<double>(draw_u64(s) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(draw_u64(s) >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    out[i] = r * std::cos(phi);
    if (i + 1 < n) out[i + 1] = r * std::sin(phi);
  }
  return out;
}

}  // namespace optbench

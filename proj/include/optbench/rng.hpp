#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

#include "optbench/tensor.hpp"

namespace optbench {

// Seeded splitmix64 stream. Value-semantic: drawing returns/advances a copy,
// so distinct streams can never perturb each other. stream_id records the
// derivation (master seed, trial id, purpose) and rides along through
// serialization; generation itself only touches state.
struct RngStream {
  uint64_t state = 0;
  uint64_t stream_id = 0;
};

// splitmix64 output mix; also used as the stream-derivation hash.
uint64_t splitmix64_mix(uint64_t z);

// Stream whose sequence matches the published splitmix64 outputs for `seed`.
RngStream seed_stream(uint64_t seed);

// Disjoint per-trial, per-purpose stream.
RngStream derive_stream(uint64_t master_seed, uint64_t trial_id, std::string_view purpose);

// Pure transition: one splitmix64 draw plus the advanced stream.
std::pair<uint64_t, RngStream> next_u64(const RngStream& s);

// In-place conveniences over next_u64.
uint64_t draw_u64(RngStream& s);
double draw_unit(RngStream& s);  // uniform in [0, 1)

// Entries in {-1, +1}, one u64 draw per entry (top bit).
Tensor rademacher_like(RngStream& s, std::vector<int64_t> shape);

// I.i.d. standard normals via Box-Muller on u64-derived uniforms.
Tensor gaussian_like(RngStream& s, std::vector<int64_t> shape);

}  // namespace optbench

#include "optbench/blocks.hpp"

#include <algorithm>

#include "optbench/errors.hpp"

namespace optbench {

const char* role_name(Role r) {
  switch (r) {
    case Role::kMatrix: return "matrix";
    case Role::kEmbedding: return "embedding";
    case Role::kHead: return "head";
    case Role::kNorm: return "norm";
  }
  return "?";
}

Role role_from_name(const std::string& name) {
  if (name == "matrix") return Role::kMatrix;
  if (name == "embedding") return Role::kEmbedding;
  if (name == "head") return Role::kHead;
  if (name == "norm") return Role::kNorm;
  throw ConfigError("unknown param role '" + name + "'");
}

BlockPartition BlockPartition::whole(int64_t size) {
  return BlockPartition{{{0, size}}};
}

BlockPartition BlockPartition::per_row(int64_t rows, int64_t cols) {
  BlockPartition p;
  p.ranges.reserve(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) p.ranges.emplace_back(r * cols, (r + 1) * cols);
  return p;
}

BlockPartition BlockPartition::singletons(int64_t size) {
  BlockPartition p;
  p.ranges.reserve(static_cast<size_t>(size));
  for (int64_t i = 0; i < size; ++i) p.ranges.emplace_back(i, i + 1);
  return p;
}

void BlockPartition::validate(int64_t size) const {
  auto sorted = ranges;
  std::sort(sorted.begin(), sorted.end());
  int64_t cursor = 0;
  for (const auto& [b, e] : sorted) {
    if (b != cursor) {
      throw ConfigError(b > cursor ? "partition gap before coordinate " + std::to_string(b)
                                   : "partition overlap at coordinate " + std::to_string(b));
    }
    if (e <= b) throw ConfigError("partition range must be non-empty");
    cursor = e;
  }
  if (cursor != size) {
    throw ConfigError("partition covers " + std::to_string(cursor) + " of " +
                      std::to_string(size) + " coordinates");
  }
}

BlockPartition adammini_partition(const ParamBlock& block) {
  const bool per_row = (block.role == Role::kEmbedding || block.role == Role::kHead) &&
                       block.value.rank() == 2;
  if (per_row) return BlockPartition::per_row(block.value.rows(), block.value.cols());
  return BlockPartition::whole(block.value.size());
}

}  // namespace optbench

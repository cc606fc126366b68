#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optbench/tensor.hpp"

namespace optbench {

// Structural role of a parameter tensor; routes it through role-dependent
// update rules (Muon/Scion matrix vs head/embedding paths, Adam-mini
// partitioning).
enum class Role { kMatrix, kEmbedding, kHead, kNorm };

const char* role_name(Role r);
Role role_from_name(const std::string& name);  // throws ConfigError

struct ParamBlock {
  std::string name;
  Role role = Role::kMatrix;
  Tensor value;
};

// Contiguous coordinate ranges [begin, end) covering a tensor disjointly.
struct BlockPartition {
  std::vector<std::pair<int64_t, int64_t>> ranges;

  static BlockPartition whole(int64_t size);
  static BlockPartition per_row(int64_t rows, int64_t cols);
  static BlockPartition singletons(int64_t size);

  // Throws ConfigError on gaps or overlaps.
  void validate(int64_t size) const;
};

// Adam-mini policy: one block per tensor, except embedding and head tensors
// which are partitioned per row.
BlockPartition adammini_partition(const ParamBlock& block);

}  // namespace optbench

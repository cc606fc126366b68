#pragma once

#include <vector>

#include "optbench/tensor.hpp"

namespace optbench {

struct QrResult {
  Tensor q;  // m x n, orthonormal columns
  Tensor r;  // n x n, upper-triangular, non-negative diagonal
};

// Thin Householder QR of an m x n matrix, m >= n. The factorization is made
// deterministic by forcing diag(r) >= 0. Rank-deficient columns are allowed
// (the corresponding r diagonal may be 0).
QrResult householder_qr(const Tensor& a);

// Singular values of a small matrix (min(m, n) <= 16), descending, via
// one-sided Jacobi. Test oracle for the Newton-Schulz and SOAP checks.
std::vector<double> svd_small(const Tensor& a);

}  // namespace optbench

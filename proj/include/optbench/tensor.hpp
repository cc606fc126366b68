#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace optbench {

// Dense row-major real tensor, 64-bit throughout. Value-semantic: copies are
// deep, so tensors are safe to share read-only across threads.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);  // zero-filled
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor identity(int64_t n);
  // 2-D convenience for tests and fixtures: rows of equal length.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  // 2-D accessors; throw DimensionError when rank != 2.
  int64_t rows() const;
  int64_t cols() const;
  double& at(int64_t r, int64_t c);
  double at(int64_t r, int64_t c) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  Tensor reshaped(std::vector<int64_t> shape) const;  // same element count

  bool all_finite() const;
  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

// Element-wise arithmetic; shapes must match exactly.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);  // Hadamard
Tensor operator*(double s, const Tensor& a);
Tensor& operator+=(Tensor& a, const Tensor& b);
Tensor& operator-=(Tensor& a, const Tensor& b);
Tensor& operator*=(Tensor& a, double s);

// Standard matrix product in 64-bit arithmetic; inner extents must match.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

double frobenius_norm(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& a);
double mean(const Tensor& a);
double mean_abs(const Tensor& a);
// sign(0) = 0 (Lion/Scion tie rule).
Tensor sign(const Tensor& a);

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace optbench

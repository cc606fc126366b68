#include "optbench/tensor.hpp"

#include <cmath>
#include <sstream>

#include "optbench/errors.hpp"

namespace optbench {

namespace {

int64_t checked_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e <= 0) throw DimensionError("tensor extents must be positive");
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(checked_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != static_cast<int64_t>(data_.size())) {
    throw DimensionError("tensor data length does not match product of extents");
  }
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

Tensor Tensor::identity(int64_t n) {
  Tensor t({n, n});
  for (int64_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int64_t m = static_cast<int64_t>(rows.size());
  if (m == 0) throw DimensionError("from_rows: empty row list");
  const int64_t n = static_cast<int64_t>(rows.begin()->size());
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m * n));
  for (const auto& row : rows) {
    if (static_cast<int64_t>(row.size()) != n) {
      throw DimensionError("from_rows: ragged rows");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

int64_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is not 2-D, shape " + shape_str());
  return shape_[0];
}

int64_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is not 2-D, shape " + shape_str());
  return shape_[1];
}

double& Tensor::at(int64_t r, int64_t c) {
  return data_[static_cast<size_t>(r * cols() + c)];
}

double Tensor::at(int64_t r, int64_t c) const {
  return data_[static_cast<size_t>(r * cols() + c)];
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  Tensor t;
  t.shape_ = std::move(shape);
  if (checked_numel(t.shape_) != size()) {
    throw DimensionError("reshape from " + shape_str() + " changes element count");
  }
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  for (int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Tensor& operator-=(Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  for (int64_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

Tensor& operator*=(Tensor& a, double s) {
  for (int64_t i = 0; i < a.size(); ++i) a[i] *= s;
  return a;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int64_t m = a.rows(), k = a.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + a.shape_str() + " x " +
                         b.shape_str());
  }
  const int64_t n = b.cols();
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = pb + p * n;
      double* orow = po + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  const int64_t m = a.rows(), n = a.cols();
  Tensor out({n, m});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
  return std::sqrt(s);
}

double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(const Tensor& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s = std::max(s, std::fabs(a[i]));
  return s;
}

double mean(const Tensor& a) {
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i];
  return s / static_cast<double>(a.size());
}

double mean_abs(const Tensor& a) {
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += std::fabs(a[i]);
  return s / static_cast<double>(a.size());
}

Tensor sign(const Tensor& a) {
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] = out[i] > 0.0 ? 1.0 : (out[i] < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

}  // namespace optbench

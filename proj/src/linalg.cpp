#include "optbench/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "optbench/errors.hpp"

namespace optbench {

QrResult householder_qr(const Tensor& a) {
  const int64_t m = a.rows(), n = a.cols();
  if (m < n) {
    throw DimensionError("householder_qr: need rows >= cols, got " + a.shape_str());
  }
  if (!a.all_finite()) throw NumericError("householder_qr: non-finite input");

  // Work matrix becomes R in its upper triangle; reflectors stored separately.
  Tensor work = a;
  std::vector<std::vector<double>> vs(static_cast<size_t>(n));

  for (int64_t k = 0; k < n; ++k) {
    double norm_x = 0.0;
    for (int64_t i = k; i < m; ++i) norm_x += work.at(i, k) * work.at(i, k);
    norm_x = std::sqrt(norm_x);

    auto& v = vs[static_cast<size_t>(k)];
    v.assign(static_cast<size_t>(m - k), 0.0);
    if (norm_x > 0.0) {
      for (int64_t i = k; i < m; ++i) v[static_cast<size_t>(i - k)] = work.at(i, k);
      const double x0 = work.at(k, k);
      v[0] += (x0 >= 0.0 ? norm_x : -norm_x);
      double norm_v = 0.0;
      for (double e : v) norm_v += e * e;
      norm_v = std::sqrt(norm_v);
      if (norm_v > 0.0) {
        for (double& e : v) e /= norm_v;
      }
      // Reflect the remaining columns.
      for (int64_t j = k; j < n; ++j) {
        double d = 0.0;
        for (int64_t i = k; i < m; ++i) d += v[static_cast<size_t>(i - k)] * work.at(i, j);
        d *= 2.0;
        for (int64_t i = k; i < m; ++i) work.at(i, j) -= d * v[static_cast<size_t>(i - k)];
      }
    }
  }

  QrResult out;
  out.r = Tensor({n, n});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i; j < n; ++j) out.r.at(i, j) = work.at(i, j);
  }

  // Thin Q: apply the reflectors to the first n columns of I_m, in reverse.
  out.q = Tensor({m, n});
  for (int64_t j = 0; j < n; ++j) out.q.at(j, j) = 1.0;
  for (int64_t k = n - 1; k >= 0; --k) {
    const auto& v = vs[static_cast<size_t>(k)];
    for (int64_t j = 0; j < n; ++j) {
      double d = 0.0;
      for (int64_t i = k; i < m; ++i) d += v[static_cast<size_t>(i - k)] * out.q.at(i, j);
      d *= 2.0;
      for (int64_t i = k; i < m; ++i) out.q.at(i, j) -= d * v[static_cast<size_t>(i - k)];
    }
  }

  // Sign convention: non-negative r diagonal.
  for (int64_t k = 0; k < n; ++k) {
    if (out.r.at(k, k) < 0.0) {
      for (int64_t j = k; j < n; ++j) out.r.at(k, j) = -out.r.at(k, j);
      for (int64_t i = 0; i < m; ++i) out.q.at(i, k) = -out.q.at(i, k);
    }
  }
  return out;
}

std::vector<double> svd_small(const Tensor& a) {
  const int64_t m = a.rows(), n = a.cols();
  if (std::min(m, n) > 16) {
    throw DimensionError("svd_small: min extent must be <= 16, got " + a.shape_str());
  }
  // One-sided Jacobi on the matrix with the fewer columns.
  Tensor w = (m >= n) ? a : transpose(a);
  const int64_t wr = w.rows(), wc = w.cols();

  const double tol = 1e-14;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (int64_t p = 0; p < wc - 1; ++p) {
      for (int64_t q = p + 1; q < wc; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int64_t i = 0; i < wr; ++i) {
          const double wp = w.at(i, p), wq = w.at(i, q);
          app += wp * wp;
          aqq += wq * wq;
          apq += wp * wq;
        }
        if (std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int64_t i = 0; i < wr; ++i) {
          const double wp = w.at(i, p), wq = w.at(i, q);
          w.at(i, p) = c * wp - s * wq;
          w.at(i, q) = s * wp + c * wq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(static_cast<size_t>(wc));
  for (int64_t j = 0; j < wc; ++j) {
    double s = 0.0;
    for (int64_t i = 0; i < wr; ++i) s += w.at(i, j) * w.at(i, j);
    sigma[static_cast<size_t>(j)] = std::sqrt(s);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<double>());
  return sigma;
}

}  // namespace optbench

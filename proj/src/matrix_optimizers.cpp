#include "optbench/matrix_optimizers.hpp"

#include <algorithm>
#include <cmath>

#include "optbench/errors.hpp"
#include "optbench/linalg.hpp"

namespace optbench {

Tensor newton_schulz5(const Tensor& m, double ns_eps) {
  if (m.rank() != 2) throw DimensionError("newton_schulz5: input must be 2-D, got " + m.shape_str());
  if (!m.all_finite()) throw NumericError("newton_schulz5: non-finite input");

  Tensor x = (1.0 / (frobenius_norm(m) + ns_eps)) * m;
  const bool transposed = x.rows() > x.cols();
  if (transposed) x = transpose(x);

  for (int i = 0; i < 5; ++i) {
    const Tensor a = matmul(x, transpose(x));
    Tensor b = NsCoefficients::b * a + NsCoefficients::c * matmul(a, a);
    x = NsCoefficients::a * x + matmul(b, x);
  }

  if (transposed) x = transpose(x);
  return x;
}

std::pair<Tensor, Tensor> muon_matrix_step(const Tensor& w, const Tensor& g_hat,
                                           const MuonMatrixHyper& h, double lr, Tensor m) {
  check_same_shape(w, g_hat, "muon_step");
  if (m.empty()) m = Tensor::zeros(w.shape());
  for (int64_t i = 0; i < m.size(); ++i) m[i] = h.beta * m[i] + g_hat[i];
  Tensor u = h.beta * m + g_hat;
  u = newton_schulz5(u, h.ns_eps);
  const double rows = static_cast<double>(w.rows());
  const double cols = static_cast<double>(w.cols());
  const double scale = std::sqrt(std::max(1.0, rows / cols));
  Tensor out = w;
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] = w[i] * (1.0 - lr * h.weight_decay) - lr * scale * u[i];
  }
  return {std::move(out), std::move(m)};
}

std::pair<Tensor, Tensor> scion_sign_step(const Tensor& w, const Tensor& g_hat, double beta1,
                                          double lr_signgd, Tensor m) {
  check_same_shape(w, g_hat, "scion_step");
  if (m.empty()) m = Tensor::zeros(w.shape());
  Tensor out = w;
  for (int64_t i = 0; i < m.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g_hat[i];
    const double step = m[i] > 0.0 ? 1.0 : (m[i] < 0.0 ? -1.0 : 0.0);
    out[i] -= lr_signgd * step;
  }
  return {std::move(out), std::move(m)};
}

// ---------------------------------------------------------------------------
// SOAP

SoapBlockState soap_init_state(int64_t rows, int64_t cols) {
  SoapBlockState s;
  s.qa = Tensor::identity(rows);
  s.qb = Tensor::identity(cols);
  s.ga = Tensor({rows, rows});
  s.gb = Tensor({cols, cols});
  s.m = Tensor({rows, cols});
  s.v = Tensor({rows, cols});
  return s;
}

SoapBlockState soap_refresh_eigenbasis(SoapBlockState s) {
  s.qa = householder_qr(matmul(s.ga, s.qa)).q;
  s.qb = householder_qr(matmul(s.gb, s.qb)).q;
  return s;
}

std::pair<Tensor, SoapBlockState> soap_step(const Tensor& w, const Tensor& g_hat,
                                            const SoapHyper& h, double lr, SoapBlockState s) {
  check_same_shape(w, g_hat, "soap_step");
  s.t += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));

  const Tensor g_rot = matmul(matmul(s.qa, g_hat), s.qb);
  Tensor precond(g_rot.shape());
  for (int64_t i = 0; i < g_rot.size(); ++i) {
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g_rot[i];
    s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * g_rot[i] * g_rot[i];
    precond[i] = (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + h.eps);
  }
  const Tensor update = matmul(matmul(transpose(s.qa), precond), transpose(s.qb));
  Tensor out = w;
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] = w[i] * (1.0 - lr * h.weight_decay) - lr * update[i];
  }

  const Tensor outer_a = matmul(g_rot, transpose(g_rot));
  const Tensor outer_b = matmul(transpose(g_rot), g_rot);
  for (int64_t i = 0; i < s.ga.size(); ++i) s.ga[i] = h.shampoo_beta * s.ga[i] + (1.0 - h.shampoo_beta) * outer_a[i];
  for (int64_t i = 0; i < s.gb.size(); ++i) s.gb[i] = h.shampoo_beta * s.gb[i] + (1.0 - h.shampoo_beta) * outer_b[i];
  for (int64_t i = 0; i < s.ga.rows(); ++i) s.ga.at(i, i) += h.eps;
  for (int64_t i = 0; i < s.gb.rows(); ++i) s.gb.at(i, i) += h.eps;

  if (h.precond_freq > 0 && s.t % h.precond_freq == 0) {
    s = soap_refresh_eigenbasis(std::move(s));
  }
  return {std::move(out), std::move(s)};
}

// ---------------------------------------------------------------------------
// PSGD-Kron

KronTileState kron_init_state(const std::vector<int64_t>& shape, double init_pc, RngStream rng) {
  KronTileState s;
  s.mu = Tensor::zeros(shape);
  for (int64_t d : shape) {
    s.q.push_back(init_pc * Tensor::identity(d));
  }
  s.rng = rng;
  return s;
}

Tensor unfold_dim(const Tensor& x, int64_t dim) {
  const auto& shape = x.shape();
  const int64_t rank = x.rank();
  const int64_t d = shape[static_cast<size_t>(dim)];
  const int64_t rest = x.size() / d;
  Tensor out({d, rest});

  std::vector<int64_t> stride(static_cast<size_t>(rank), 1);
  for (int64_t k = rank - 2; k >= 0; --k) {
    stride[static_cast<size_t>(k)] = stride[static_cast<size_t>(k + 1)] * shape[static_cast<size_t>(k + 1)];
  }
  for (int64_t f = 0; f < x.size(); ++f) {
    int64_t row = (f / stride[static_cast<size_t>(dim)]) % d;
    int64_t col = 0;
    for (int64_t k = 0; k < rank; ++k) {
      if (k == dim) continue;
      col = col * shape[static_cast<size_t>(k)] + (f / stride[static_cast<size_t>(k)]) % shape[static_cast<size_t>(k)];
    }
    out[row * rest + col] = x[f];
  }
  return out;
}

Tensor fold_dim(const Tensor& m, const std::vector<int64_t>& shape, int64_t dim) {
  const int64_t rank = static_cast<int64_t>(shape.size());
  const int64_t d = shape[static_cast<size_t>(dim)];
  const int64_t rest = m.size() / d;
  Tensor out(shape);

  std::vector<int64_t> stride(static_cast<size_t>(rank), 1);
  for (int64_t k = rank - 2; k >= 0; --k) {
    stride[static_cast<size_t>(k)] = stride[static_cast<size_t>(k + 1)] * shape[static_cast<size_t>(k + 1)];
  }
  for (int64_t f = 0; f < out.size(); ++f) {
    int64_t row = (f / stride[static_cast<size_t>(dim)]) % d;
    int64_t col = 0;
    for (int64_t k = 0; k < rank; ++k) {
      if (k == dim) continue;
      col = col * shape[static_cast<size_t>(k)] + (f / stride[static_cast<size_t>(k)]) % shape[static_cast<size_t>(k)];
    }
    out[f] = m[row * rest + col];
  }
  return out;
}

Tensor kron_balance(const Tensor& q) {
  const int64_t n = q.rows();
  std::vector<double> norms(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < q.cols(); ++j) {
      norms[static_cast<size_t>(i)] = std::max(norms[static_cast<size_t>(i)], std::fabs(q.at(i, j)));
    }
    if (norms[static_cast<size_t>(i)] == 0.0) {
      throw ConfigError("kron_balance: zero row norm (degenerate preconditioner)");
    }
  }
  double log_sum = 0.0;
  for (double v : norms) log_sum += std::log(v);
  const double gmean = std::exp(log_sum / static_cast<double>(n));
  Tensor out = q;
  for (int64_t i = 0; i < n; ++i) {
    const double scale = gmean / norms[static_cast<size_t>(i)];
    for (int64_t j = 0; j < q.cols(); ++j) out.at(i, j) *= scale;
  }
  return out;
}

namespace {

// Solve Q^T z = x column-wise for lower-triangular Q (back substitution).
Tensor solve_lower_transpose(const Tensor& q, const Tensor& x) {
  const int64_t n = q.rows();
  const int64_t cols = x.cols();
  Tensor z = x;
  for (int64_t i = n - 1; i >= 0; --i) {
    const double diag = q.at(i, i);
    for (int64_t c = 0; c < cols; ++c) {
      double acc = z.at(i, c);
      for (int64_t j = i + 1; j < n; ++j) acc -= q.at(j, i) * z.at(j, c);
      z.at(i, c) = acc / diag;
    }
  }
  return z;
}

Tensor lower_triangular_part(const Tensor& a) {
  Tensor out = a;
  for (int64_t i = 0; i < a.rows(); ++i) {
    for (int64_t j = i + 1; j < a.cols(); ++j) out.at(i, j) = 0.0;
  }
  return out;
}

constexpr double kDiagTiny = 1e-150;

}  // namespace

KronTileState kron_update_preconditioner(KronTileState s, const Tensor& m_hat, const Tensor& v,
                                         const KronHyper& h) {
  check_same_shape(m_hat, v, "kron_update_preconditioner");
  const auto& shape = s.mu.shape();
  const int64_t rank = static_cast<int64_t>(shape.size());

  // A vanishing triangular diagonal cannot be solved against; reset to the
  // scaled identity before sketching.
  for (int64_t i = 0; i < rank; ++i) {
    Tensor& q = s.q[static_cast<size_t>(i)];
    bool singular = false;
    for (int64_t d = 0; d < q.rows(); ++d) {
      if (std::fabs(q.at(d, d)) < kDiagTiny) singular = true;
    }
    if (singular) {
      q = h.init_pc * Tensor::identity(q.rows());
      s.precond_resets += 1;
    }
  }

  Tensor damped = m_hat;
  const double damp = h.eps * mean_abs(m_hat);
  for (int64_t i = 0; i < damped.size(); ++i) damped[i] += damp * v[i];

  // Conjugate sketch B: inverse-transpose solves along every dimension.
  Tensor b = v;
  for (int64_t i = 0; i < rank; ++i) {
    b = fold_dim(solve_lower_transpose(s.q[static_cast<size_t>(i)], unfold_dim(b, i)), shape, i);
  }
  // Pre-sketch A: forward multiplies.
  Tensor a = damped;
  for (int64_t i = 0; i < rank; ++i) {
    a = fold_dim(matmul(s.q[static_cast<size_t>(i)], unfold_dim(a, i)), shape, i);
  }

  for (int64_t i = 0; i < rank; ++i) {
    const Tensor mi = unfold_dim(a, i);
    const Tensor ci = unfold_dim(b, i);
    const Tensor t1 = matmul(mi, transpose(mi));
    const Tensor t2 = matmul(ci, transpose(ci));
    const Tensor sum = t1 + t2;
    const double scale = max_abs(sum);
    if (scale == 0.0) continue;
    const Tensor term = lower_triangular_part(t1 - t2);
    Tensor& q = s.q[static_cast<size_t>(i)];
    q -= (h.precond_lr / scale) * matmul(term, q);
  }
  return s;
}

std::pair<Tensor, KronTileState> kron_tile_step(const Tensor& w, const Tensor& g_hat,
                                                const KronHyper& h, double lr, KronTileState s) {
  check_same_shape(w, g_hat, "kron_step");
  Tensor g = g_hat;
  if (h.normalize_grads) {
    const double inv = 1.0 / (frobenius_norm(g) + h.eps);
    g *= inv;
  }
  s.t += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  Tensor m_hat(w.shape());
  for (int64_t i = 0; i < w.size(); ++i) {
    s.mu[i] = h.beta1 * s.mu[i] + (1.0 - h.beta1) * g[i];
    m_hat[i] = s.mu[i] / bc1;
  }

  s.balance_counter += 1;
  if (s.balance_counter >= 100) {
    for (auto& q : s.q) q = kron_balance(q);
    s.balance_counter = 0;
  }

  const double u = draw_unit(s.rng);
  if (u < h.update_probability) {
    const Tensor probe = gaussian_like(s.rng, w.shape());
    s = kron_update_preconditioner(std::move(s), m_hat, probe, h);
  }

  Tensor precond = m_hat;
  const auto& shape = s.mu.shape();
  for (int64_t i = 0; i < static_cast<int64_t>(shape.size()); ++i) {
    precond = fold_dim(matmul(s.q[static_cast<size_t>(i)], unfold_dim(precond, i)), shape, i);
  }

  Tensor out = w;
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] -= lr * (precond[i] + h.weight_decay * w[i]);  // coupled decay
  }
  return {std::move(out), std::move(s)};
}

std::vector<int64_t> merge_small_dims(const std::vector<int64_t>& shape, int64_t target) {
  if (shape.size() <= 1) return shape;
  std::vector<int64_t> merged;
  int64_t acc = shape[0];
  for (size_t k = 1; k < shape.size(); ++k) {
    if (acc * shape[k] <= target) {
      acc *= shape[k];
    } else {
      merged.push_back(acc);
      acc = shape[k];
    }
  }
  merged.push_back(acc);
  return merged;
}

std::vector<TileSlice> partition_shape(const std::vector<int64_t>& shape, int64_t block_size) {
  std::vector<TileSlice> tiles{TileSlice{std::vector<int64_t>(shape.size(), 0), shape}};
  if (block_size <= 0) return tiles;
  for (size_t dim = 0; dim < shape.size(); ++dim) {
    std::vector<TileSlice> next;
    for (const auto& tile : tiles) {
      const int64_t extent = tile.extent[dim];
      for (int64_t off = 0; off < extent; off += block_size) {
        TileSlice t = tile;
        t.offset[dim] = tile.offset[dim] + off;
        t.extent[dim] = std::min(block_size, extent - off);
        next.push_back(std::move(t));
      }
    }
    tiles = std::move(next);
  }
  return tiles;
}

namespace {

template <typename Fn>
void for_each_tile_index(const TileSlice& slice, const std::vector<int64_t>& full_shape, Fn&& fn) {
  const size_t rank = full_shape.size();
  std::vector<int64_t> idx(rank, 0);
  std::vector<int64_t> full_stride(rank, 1);
  for (int64_t k = static_cast<int64_t>(rank) - 2; k >= 0; --k) {
    full_stride[static_cast<size_t>(k)] =
        full_stride[static_cast<size_t>(k + 1)] * full_shape[static_cast<size_t>(k + 1)];
  }
  int64_t tile_numel = 1;
  for (int64_t e : slice.extent) tile_numel *= e;
  for (int64_t t = 0; t < tile_numel; ++t) {
    int64_t rem = t;
    int64_t full = 0;
    for (size_t k = 0; k < rank; ++k) {
      const int64_t span = [&] {
        int64_t s = 1;
        for (size_t j = k + 1; j < rank; ++j) s *= slice.extent[j];
        return s;
      }();
      const int64_t coord = rem / span;
      rem %= span;
      full += (slice.offset[k] + coord) * full_stride[k];
    }
    fn(t, full);
  }
}

}  // namespace

Tensor extract_tile(const Tensor& x, const TileSlice& slice) {
  Tensor out(slice.extent);
  for_each_tile_index(slice, x.shape(), [&](int64_t t, int64_t full) { out[t] = x[full]; });
  return out;
}

void insert_tile(Tensor& x, const TileSlice& slice, const Tensor& tile) {
  for_each_tile_index(slice, x.shape(), [&](int64_t t, int64_t full) { x[full] = tile[t]; });
}

}  // namespace optbench

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "optbench/rng.hpp"
#include "optbench/scalar_optimizers.hpp"
#include "optbench/schedule.hpp"
#include "optbench/tensor.hpp"

namespace optbench {

// Quintic Newton-Schulz coefficients; each iteration acts on every singular
// value as p(s) = a*s + b*s^3 + c*s^5 while preserving singular vectors.
struct NsCoefficients {
  static constexpr double a = 3.4445;
  static constexpr double b = -4.7750;
  static constexpr double c = 2.0315;
};

// Five Newton-Schulz iterations after Frobenius normalization X/(|X|+eps).
// Tall inputs are processed transposed so the iteration runs with rows<=cols.
// All-zero input returns zeros.
Tensor newton_schulz5(const Tensor& m, double ns_eps = 1e-7);

// ---------------------------------------------------------------------------
// Muon / Scion single-block update paths. Gradients arrive already clipped
// (the drivers cap the global norm once).

struct MuonMatrixHyper {
  double beta = 0.95;      // momentum decay
  double ns_eps = 1e-7;    // Newton-Schulz normalization epsilon
  double weight_decay = 0.0;
};

// m <- beta*m + g; u = NS5(beta*m + g) scaled by sqrt(max(1, rows/cols));
// w' = w - lr*u - lr*wd*w. Returns (w', m').
std::pair<Tensor, Tensor> muon_matrix_step(const Tensor& w, const Tensor& g_hat,
                                           const MuonMatrixHyper& h, double lr, Tensor m);

// Scion head/embedding path: m <- beta1*m + (1-beta1)*g; w' = w - lr*sign(m).
// No weight decay on the sign path.
std::pair<Tensor, Tensor> scion_sign_step(const Tensor& w, const Tensor& g_hat, double beta1,
                                          double lr_signgd, Tensor m);

// ---------------------------------------------------------------------------
// SOAP: rotated Adam with QR eigenbasis refresh.

struct SoapHyper {
  double beta1 = 0.95;
  double beta2 = 0.98;
  double shampoo_beta = 0.95;   // mu, covariance EMA
  int64_t precond_freq = 10;    // k, refresh interval
  double eps = 1e-10;           // both the covariance epsI and the sqrt(v)+eps
  double weight_decay = 0.0;
};

// Per-block rotation state. Q factors start at identity; G factors at zero.
struct SoapBlockState {
  Tensor qa, qb;  // orthonormal
  Tensor ga, gb;  // accumulated covariances
  Tensor m, v;    // Adam moments in the rotated basis
  int64_t t = 0;
};

SoapBlockState soap_init_state(int64_t rows, int64_t cols);

// Replace each Q by the orthonormal factor of QR(G*Q). Caller invokes this
// when t mod k == 0.
SoapBlockState soap_refresh_eigenbasis(SoapBlockState s);

// One rotated-Adam step on a 2-D block with an already-clipped gradient;
// refreshes the eigenbasis when the new t is a multiple of precond_freq.
std::pair<Tensor, SoapBlockState> soap_step(const Tensor& w, const Tensor& g_hat,
                                            const SoapHyper& h, double lr, SoapBlockState s);

// ---------------------------------------------------------------------------
// PSGD-Kron: Kronecker-factored triangular preconditioners.

struct KronHyper {
  double beta1 = 0.9;
  double precond_lr = 0.1;           // plr
  double update_probability = 0.05;  // p_pc, constant in t
  double init_pc = 1.0;              // Q init (and reset) scale
  double eps = 1e-8;                 // dampening and normalize guard
  bool normalize_grads = false;
  double weight_decay = 0.0;         // coupled: g~ <- g~ + wd*w
};

// State for one (merged, partitioned) tensor: momentum, one lower-triangular
// Q per dimension, the balance counter and a private rng stream.
struct KronTileState {
  Tensor mu;
  std::vector<Tensor> q;
  int64_t balance_counter = 0;
  int64_t t = 0;
  int64_t precond_resets = 0;
  RngStream rng;
};

KronTileState kron_init_state(const std::vector<int64_t>& shape, double init_pc, RngStream rng);

// Unfold dimension `dim` to the front: (d_dim, numel/d_dim), remaining dims
// row-major in their original order. fold_dim is the inverse.
Tensor unfold_dim(const Tensor& x, int64_t dim);
Tensor fold_dim(const Tensor& m, const std::vector<int64_t>& shape, int64_t dim);

// Rescale each row of a lower-triangular Q by gmean(row max-abs)/row max-abs.
// Throws ConfigError when a row is identically zero.
Tensor kron_balance(const Tensor& q);

// Whitening update of every Q_i from the pair (dampened momentum, probe V).
// Dampening (eps * mean|m_hat| * V) happens inside. A Q with a vanishing
// diagonal is reset to init_pc * I before the sketches.
KronTileState kron_update_preconditioner(KronTileState s, const Tensor& m_hat, const Tensor& v,
                                         const KronHyper& h);

// Full per-tile step on an already-clipped gradient.
std::pair<Tensor, KronTileState> kron_tile_step(const Tensor& w, const Tensor& g_hat,
                                                const KronHyper& h, double lr, KronTileState s);

// Dimension preprocessing: greedily merge adjacent dims while the product
// stays within `target`; 1-D shapes are left alone.
std::vector<int64_t> merge_small_dims(const std::vector<int64_t>& shape, int64_t target);

// Axis-aligned partition of a shape into chunks of at most block_size per
// dimension; returns per-tile (offsets, extents).
struct TileSlice {
  std::vector<int64_t> offset;
  std::vector<int64_t> extent;
};
std::vector<TileSlice> partition_shape(const std::vector<int64_t>& shape, int64_t block_size);
Tensor extract_tile(const Tensor& x, const TileSlice& slice);
void insert_tile(Tensor& x, const TileSlice& slice, const Tensor& tile);

}  // namespace optbench

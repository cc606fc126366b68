#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "optbench/errors.hpp"
#include "optbench/linalg.hpp"
#include "optbench/matrix_optimizers.hpp"
#include "optbench/scalar_optimizers.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace optbench;
using testutil::max_abs_diff;
using testutil::ns_scalar_iterate;
using testutil::random_tensor;

TEST_CASE("newton-schulz scalar polynomial at 1 and after 5 iterations") {
  // One iteration on a unit singular value: a + b + c.
  CHECK(ns_scalar_iterate(1.0, 1) == doctest::Approx(0.7010).epsilon(1e-12));
  CHECK(ns_scalar_iterate(0.2, 5) == doctest::Approx(0.7467689211942687).epsilon(1e-12));
}

TEST_CASE("newton-schulz on an orthogonal 2x2 maps both singular values alike") {
  const double phi = 0.9;
  const Tensor q = Tensor::from_rows({{std::cos(phi), -std::sin(phi)},
                                      {std::sin(phi), std::cos(phi)}});
  const Tensor out = newton_schulz5(q, 1e-12);
  // Post-normalization both singular values are 1/sqrt(2) (up to the eps).
  const double expect = ns_scalar_iterate(1.0 / std::sqrt(2.0), 5);
  const auto sigma = svd_small(out);
  CHECK(sigma[0] == doctest::Approx(expect).epsilon(1e-9));
  CHECK(sigma[1] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("newton-schulz singular values follow the scalar oracle") {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    const Tensor m = random_tensor({6, 4}, 9000 + seed);
    const Tensor out = newton_schulz5(m, 1e-12);

    const Tensor normalized = (1.0 / (frobenius_norm(m) + 1e-12)) * m;
    auto sig_in = svd_small(normalized);
    std::vector<double> expect;
    for (double s : sig_in) expect.push_back(ns_scalar_iterate(s, 5));
    std::sort(expect.begin(), expect.end(), std::greater<double>());
    const auto got = svd_small(out);
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(std::fabs(got[i] - expect[i]) < 1e-9);
    }

    // Singular vectors preserved: out m' and m' out must stay symmetric.
    const Tensor s1 = matmul(out, transpose(m));
    const Tensor s2 = matmul(transpose(m), out);
    CHECK(max_abs_diff(s1, transpose(s1)) < 1e-9 * (1.0 + max_abs(s1)));
    CHECK(max_abs_diff(s2, transpose(s2)) < 1e-9 * (1.0 + max_abs(s2)));
  }
}

TEST_CASE("newton-schulz output range for sigma in [0.1, 1]") {
  for (double s = 0.1; s <= 1.0; s += 0.05) {
    const double it = ns_scalar_iterate(s, 5);
    CHECK(it >= 0.3);
    CHECK(it <= 1.3);
  }
}

TEST_CASE("newton-schulz handles zeros and tall inputs") {
  const Tensor z = newton_schulz5(Tensor::zeros({3, 2}));
  CHECK(frobenius_norm(z) == 0.0);

  const Tensor tall = random_tensor({8, 3}, 31);
  const Tensor wide = transpose(tall);
  CHECK(max_abs_diff(newton_schulz5(tall, 1e-7), transpose(newton_schulz5(wide, 1e-7))) < 1e-14);

  CHECK_THROWS_AS(newton_schulz5(Tensor({4})), DimensionError);
}

TEST_CASE("muon matrix step: momentum, scale and decay") {
  MuonMatrixHyper h;
  h.beta = 0.95;
  h.ns_eps = 1e-7;
  h.weight_decay = 0.1;
  const Tensor w0 = random_tensor({4, 2}, 51);
  const Tensor g = random_tensor({4, 2}, 52);

  const auto [w1, m1] = muon_matrix_step(w0, g, h, 0.01, Tensor{});
  CHECK(max_abs_diff(m1, g) == 0.0);  // m1 = beta*0 + g

  // u before NS is (1 + beta) * g; scale is sqrt(rows/cols) = sqrt(2).
  const Tensor u = newton_schulz5((1.0 + h.beta) * g, h.ns_eps);
  Tensor expect = w0;
  for (int64_t i = 0; i < expect.size(); ++i) {
    expect[i] -= 0.01 * std::sqrt(2.0) * u[i] + 0.01 * h.weight_decay * w0[i];
  }
  CHECK(max_abs_diff(w1, expect) < 1e-15);

  // Wide blocks are not upscaled: max(1, rows/cols) = 1.
  const Tensor wide_w = random_tensor({2, 4}, 53);
  const Tensor wide_g = random_tensor({2, 4}, 54);
  MuonMatrixHyper h0 = h;
  h0.weight_decay = 0.0;
  const auto [w2, m2] = muon_matrix_step(wide_w, wide_g, h0, 1.0, Tensor{});
  const Tensor u2 = newton_schulz5((1.0 + h.beta) * wide_g, h.ns_eps);
  CHECK(max_abs_diff(wide_w - w2, u2) < 1e-14);
}

TEST_CASE("scion sign path hand evaluation") {
  const auto [w1, m1] = scion_sign_step(Tensor({1}, {0.0}), Tensor({1}, {-3.0}), 0.9, 0.05,
                                        Tensor{});
  CHECK(m1[0] == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(w1[0] == doctest::Approx(0.05).epsilon(1e-15));  // -lr * sign(-0.3)

  // Zero momentum and zero gradient: no movement (sign(0) = 0).
  const auto [w2, m2] = scion_sign_step(Tensor({1}, {0.4}), Tensor({1}, {0.0}), 0.9, 0.05,
                                        Tensor{});
  CHECK(w2[0] == 0.4);
}

// ---------------------------------------------------------------------------
// SOAP

namespace {
SoapHyper soap_hyper(int64_t freq) {
  SoapHyper h;
  h.beta1 = 0.9;
  h.beta2 = 0.98;
  h.shampoo_beta = 0.95;
  h.precond_freq = freq;
  h.eps = 1e-10;
  return h;
}
}  // namespace

TEST_CASE("soap with identity rotation matches adamw before any refresh") {
  SoapHyper sh = soap_hyper(1 << 30);
  sh.weight_decay = 0.05;
  ScalarHyper ah;
  ah.beta1 = sh.beta1;
  ah.beta2 = sh.beta2;
  ah.eps = sh.eps;
  ah.weight_decay = sh.weight_decay;

  Tensor w_soap = random_tensor({4, 3}, 61);
  Tensor w_adam = w_soap;
  SoapBlockState s = soap_init_state(4, 3);
  MomentState ms;
  for (int step = 0; step < 20; ++step) {
    const Tensor g = random_tensor({4, 3}, 6100 + static_cast<uint64_t>(step));
    auto rs = soap_step(w_soap, g, sh, 0.01, std::move(s));
    w_soap = std::move(rs.first);
    s = std::move(rs.second);
    auto ra = adamw_core(w_adam, g, ah, 0.01, std::move(ms));
    w_adam = std::move(ra.w);
    ms = std::move(ra.state);
    CHECK(max_abs_diff(w_soap, w_adam) <= 1e-15);
  }
}

TEST_CASE("soap covariance accumulation hand evaluation") {
  SoapHyper sh = soap_hyper(1 << 30);
  sh.shampoo_beta = 0.95;
  SoapBlockState s = soap_init_state(2, 1);
  const Tensor g = Tensor::from_rows({{2.0}, {0.0}});
  auto [w, s2] = soap_step(Tensor::zeros({2, 1}), g, sh, 0.0, std::move(s));
  CHECK(s2.ga.at(0, 0) == doctest::Approx(0.2 + 1e-10).epsilon(1e-12));
  CHECK(s2.ga.at(0, 1) == 0.0);
  CHECK(s2.ga.at(1, 1) == doctest::Approx(1e-10).epsilon(1e-6));
  CHECK(s2.gb.at(0, 0) == doctest::Approx(0.05 * 4.0 + 1e-10).epsilon(1e-12));
}

TEST_CASE("soap eigenbasis refresh") {
  SoapBlockState s = soap_init_state(2, 2);
  s.ga = Tensor::identity(2);
  s.gb = Tensor::identity(2);
  SoapBlockState r = soap_refresh_eigenbasis(s);
  CHECK(max_abs_diff(r.qa, Tensor::identity(2)) < 1e-14);

  // Diagonal covariance with identity Q is already the (sign-fixed) eigenbasis.
  s.ga = Tensor::from_rows({{4.0, 0.0}, {0.0, 1.0}});
  r = soap_refresh_eigenbasis(s);
  CHECK(max_abs_diff(r.qa, Tensor::identity(2)) < 1e-14);

  // Orthonormality after refreshing from a random SPD accumulate.
  const Tensor m = random_tensor({3, 3}, 71);
  SoapBlockState s3 = soap_init_state(3, 3);
  s3.ga = matmul(m, transpose(m));
  s3.gb = matmul(transpose(m), m);
  r = soap_refresh_eigenbasis(s3);
  CHECK(frobenius_norm(matmul(transpose(r.qa), r.qa) - Tensor::identity(3)) < 1e-10);
}

TEST_CASE("soap rotation equivariance against the unrotated adamw trajectory") {
  const Tensor p = householder_qr(random_tensor({4, 4}, 81)).q;
  SoapHyper sh = soap_hyper(1 << 30);
  sh.weight_decay = 0.0;
  ScalarHyper ah;
  ah.beta1 = sh.beta1;
  ah.beta2 = sh.beta2;
  ah.eps = sh.eps;

  Tensor w_plain = random_tensor({4, 4}, 82);
  Tensor w_rot = matmul(p, w_plain);
  SoapBlockState s = soap_init_state(4, 4);
  s.qa = transpose(p);  // undoes the left rotation of the incoming gradients
  MomentState ms;

  for (int step = 0; step < 30; ++step) {
    const Tensor g = random_tensor({4, 4}, 8200 + static_cast<uint64_t>(step));
    auto ra = adamw_core(w_plain, g, ah, 0.02, std::move(ms));
    w_plain = std::move(ra.w);
    ms = std::move(ra.state);
    auto rs = soap_step(w_rot, matmul(p, g), sh, 0.02, std::move(s));
    w_rot = std::move(rs.first);
    s = std::move(rs.second);
    CHECK(max_abs_diff(w_rot, matmul(p, w_plain)) < 1e-10);
  }
}

TEST_CASE("soap orthogonality preserved across 1000 steps with periodic re-QR") {
  SoapHyper sh = soap_hyper(10);
  SoapBlockState s = soap_init_state(5, 3);
  Tensor w = random_tensor({5, 3}, 91);
  for (int step = 0; step < 1000; ++step) {
    const Tensor g = random_tensor({5, 3}, 9100 + static_cast<uint64_t>(step));
    auto r = soap_step(w, g, sh, 1e-3, std::move(s));
    w = std::move(r.first);
    s = std::move(r.second);
  }
  CHECK(frobenius_norm(matmul(transpose(s.qa), s.qa) - Tensor::identity(5)) < 1e-8);
  CHECK(frobenius_norm(matmul(transpose(s.qb), s.qb) - Tensor::identity(3)) < 1e-8);

  // The accumulated covariances stay symmetric positive semidefinite.
  for (const Tensor* g : {&s.ga, &s.gb}) {
    CHECK(max_abs_diff(*g, transpose(*g)) < 1e-10);
    for (double ev : oracles::jacobi_sym_eig(*g).values) CHECK(ev > -1e-10);
  }
}

// ---------------------------------------------------------------------------
// Kron

TEST_CASE("kron balance hand cases") {
  const Tensor b1 = kron_balance(Tensor::from_rows({{1.0, 0.0}, {0.0, 4.0}}));
  CHECK(b1.at(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(b1.at(1, 1) == doctest::Approx(2.0).epsilon(1e-15));

  // Already balanced: fixed point.
  const Tensor q = Tensor::from_rows({{2.0, 0.0}, {1.0, 2.0}});
  CHECK(max_abs_diff(kron_balance(q), q) < 1e-15);

  // Row max-abs norms (1, 2, 4): gmean 2, scales (2, 1, 0.5).
  const Tensor q3 = Tensor::from_rows({{1.0, 0.0, 0.0}, {2.0, 0.0, 0.0}, {0.0, 0.0, 4.0}});
  const Tensor b3 = kron_balance(q3);
  CHECK(b3.at(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(b3.at(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(b3.at(2, 2) == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(kron_balance(Tensor({2, 2})), ConfigError);
}

TEST_CASE("unfold/fold round trips and matches transpose on matrices") {
  const Tensor x = random_tensor({2, 3, 4}, 101);
  for (int64_t dim = 0; dim < 3; ++dim) {
    const Tensor u = unfold_dim(x, dim);
    CHECK(u.rows() == x.shape()[static_cast<size_t>(dim)]);
    CHECK(max_abs_diff(fold_dim(u, x.shape(), dim), x) == 0.0);
  }
  const Tensor m = random_tensor({3, 5}, 102);
  CHECK(max_abs_diff(unfold_dim(m, 0), m) == 0.0);
  CHECK(max_abs_diff(unfold_dim(m, 1), transpose(m)) == 0.0);
}

TEST_CASE("merge_small_dims greedy policy") {
  CHECK(merge_small_dims({4, 4, 4}, 16) == std::vector<int64_t>{16, 4});
  CHECK(merge_small_dims({2, 3, 5}, 6) == std::vector<int64_t>{6, 5});
  CHECK(merge_small_dims({2, 3, 5}, 1000) == std::vector<int64_t>{30});
  CHECK(merge_small_dims({7}, 16) == std::vector<int64_t>{7});  // 1-D left alone
  CHECK(merge_small_dims({9, 9}, 16) == std::vector<int64_t>{9, 9});
}

TEST_CASE("partition_shape tiles and extract/insert round trip") {
  const auto tiles = partition_shape({5, 3}, 2);
  CHECK(tiles.size() == 6);  // ceil(5/2) * ceil(3/2)
  Tensor x = random_tensor({5, 3}, 103);
  Tensor y = Tensor::zeros({5, 3});
  for (const auto& t : tiles) insert_tile(y, t, extract_tile(x, t));
  CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("kron preconditioner update cancels when T1 == T2") {
  KronHyper h;
  h.eps = 0.0;  // no dampening so A == B exactly when V = m_hat and Q = I
  h.precond_lr = 0.5;
  KronTileState s = kron_init_state({3, 2}, 1.0, seed_stream(1));
  const Tensor m_hat = random_tensor({3, 2}, 104);
  s = kron_update_preconditioner(std::move(s), m_hat, m_hat, h);
  CHECK(max_abs_diff(s.q[0], Tensor::identity(3)) < 1e-15);
  CHECK(max_abs_diff(s.q[1], Tensor::identity(2)) < 1e-15);
}

TEST_CASE("kron preconditioner update matches hand algebra on a 2-vector") {
  KronHyper h;
  h.eps = 0.1;
  h.precond_lr = 0.25;
  KronTileState s = kron_init_state({2}, 1.0, seed_stream(2));
  s.q[0] = Tensor::from_rows({{2.0, 0.0}, {-1.0, 0.5}});
  const Tensor m_hat({2}, {1.0, -2.0});
  const Tensor probe({2}, {0.5, 1.5});

  // Steps 2-5 by hand. Dampen: m + eps*mean|m|*V.
  const double mean_abs_m = (1.0 + 2.0) / 2.0;
  const double d0 = 1.0 + 0.1 * mean_abs_m * 0.5;
  const double d1 = -2.0 + 0.1 * mean_abs_m * 1.5;
  // B = Q^-T V: solve [[2,-1],[0,0.5]] z = (0.5, 1.5) by back substitution.
  const double b1 = 1.5 / 0.5;
  const double b0 = (0.5 - (-1.0) * b1) / 2.0;
  // A = Q d.
  const double a0 = 2.0 * d0;
  const double a1 = -1.0 * d0 + 0.5 * d1;
  // T1 = a a', T2 = b b', s_norm = max|T1 + T2|.
  const double t1_00 = a0 * a0, t1_01 = a0 * a1, t1_11 = a1 * a1;
  const double t2_00 = b0 * b0, t2_01 = b0 * b1, t2_11 = b1 * b1;
  const double s_norm = std::max({std::fabs(t1_00 + t2_00), std::fabs(t1_01 + t2_01),
                                  std::fabs(t1_11 + t2_11)});
  // Q' = Q - plr/s * tril(T1 - T2) Q.
  const double f = 0.25 / s_norm;
  const double q00 = 2.0 - f * (t1_00 - t2_00) * 2.0;
  const double q10 = -1.0 - f * ((t1_01 - t2_01) * 2.0 + (t1_11 - t2_11) * (-1.0));
  const double q11 = 0.5 - f * (t1_11 - t2_11) * 0.5;

  s = kron_update_preconditioner(std::move(s), m_hat, probe, h);
  CHECK(s.q[0].at(0, 0) == doctest::Approx(q00).epsilon(1e-14));
  CHECK(s.q[0].at(1, 0) == doctest::Approx(q10).epsilon(1e-14));
  CHECK(s.q[0].at(1, 1) == doctest::Approx(q11).epsilon(1e-14));
  CHECK(s.q[0].at(0, 1) == 0.0);
}

TEST_CASE("kron tile step with identity Q and p=0 is bias-corrected momentum sgd") {
  KronHyper h;
  h.beta1 = 0.9;
  h.update_probability = 0.0;
  h.weight_decay = 0.0;
  KronTileState s = kron_init_state({4}, 1.0, seed_stream(3));
  Tensor w = random_tensor({4}, 105);
  Tensor mu = Tensor::zeros({4});
  for (int t = 1; t <= 10; ++t) {
    const Tensor g = random_tensor({4}, 1050 + static_cast<uint64_t>(t));
    Tensor expect = w;
    for (int64_t i = 0; i < 4; ++i) {
      mu[i] = 0.9 * mu[i] + 0.1 * g[i];
      expect[i] -= 0.02 * mu[i] / (1.0 - std::pow(0.9, t));
    }
    auto r = kron_tile_step(w, g, h, 0.02, std::move(s));
    w = std::move(r.first);
    s = std::move(r.second);
    CHECK(max_abs_diff(w, expect) <= 1e-15);
  }
}

TEST_CASE("kron coupled weight decay and balance counter cycle") {
  KronHyper h;
  h.beta1 = 0.0;  // mu == g
  h.update_probability = 0.0;
  h.weight_decay = 0.5;
  KronTileState s = kron_init_state({2}, 1.0, seed_stream(4));
  const Tensor w({2}, {1.0, -1.0});
  auto [w1, s1] = kron_tile_step(w, Tensor::zeros({2}), h, 0.1, std::move(s));
  // g~ = 0 + wd * w; w' = w - lr * g~.
  CHECK(w1[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
  CHECK(w1[1] == doctest::Approx(-1.0 + 0.1 * 0.5).epsilon(1e-15));

  for (int t = 2; t <= 250; ++t) {
    auto r = kron_tile_step(w1, Tensor::zeros({2}), h, 0.0, std::move(s1));
    s1 = std::move(r.second);
    CHECK(s1.balance_counter == t % 100);
    CHECK(s1.balance_counter < 100);
  }
}

TEST_CASE("kron Q stays lower-triangular under forced updates") {
  KronHyper h;
  h.update_probability = 1.0;
  h.precond_lr = 0.3;
  KronTileState s = kron_init_state({3, 4}, 1.0, derive_stream(11, 0, "kron-test"));
  Tensor w = random_tensor({3, 4}, 106);
  for (int t = 0; t < 120; ++t) {
    const Tensor g = random_tensor({3, 4}, 1060 + static_cast<uint64_t>(t));
    auto r = kron_tile_step(w, g, h, 1e-3, std::move(s));
    w = std::move(r.first);
    s = std::move(r.second);
  }
  for (const auto& q : s.q) {
    for (int64_t i = 0; i < q.rows(); ++i) {
      for (int64_t j = i + 1; j < q.cols(); ++j) CHECK(q.at(i, j) == 0.0);
    }
  }
}

TEST_CASE("kron whitening flattens the preconditioned gradient scale") {
  // Fixed quadratic with H = Ha (x) Hb; gradients at gaussian iterates.
  const int64_t n = 4;
  std::vector<double> eigs_a{1.0, 3.0, 9.0, 27.0};
  std::vector<double> eigs_b{1.0, 2.0, 4.0, 8.0};
  Tensor ha({n, n}), hb({n, n});
  for (int64_t i = 0; i < n; ++i) {
    ha.at(i, i) = eigs_a[static_cast<size_t>(i)];
    hb.at(i, i) = eigs_b[static_cast<size_t>(i)];
  }
  KronHyper h;
  h.precond_lr = 0.5;
  h.eps = 1e-8;
  KronTileState s = kron_init_state({n, n}, 1.0, seed_stream(5));
  RngStream data = seed_stream(6);

  auto coord_ratio = [&](bool preconditioned) {
    Tensor sq = Tensor::zeros({n, n});
    RngStream eval = seed_stream(7);
    for (int k = 0; k < 200; ++k) {
      const Tensor g = matmul(matmul(ha, gaussian_like(eval, {n, n})), hb);
      Tensor v = g;
      if (preconditioned) {
        for (int64_t i = 0; i < 2; ++i) {
          v = fold_dim(matmul(s.q[static_cast<size_t>(i)], unfold_dim(v, i)), v.shape(), i);
        }
      }
      for (int64_t i = 0; i < v.size(); ++i) sq[i] += v[i] * v[i];
    }
    double lo = 1e300, hi = 0.0;
    for (int64_t i = 0; i < sq.size(); ++i) {
      lo = std::min(lo, std::sqrt(sq[i]));
      hi = std::max(hi, std::sqrt(sq[i]));
    }
    return hi / lo;
  };

  const double raw_ratio = coord_ratio(false);
  for (int t = 0; t < 500; ++t) {
    const Tensor g = matmul(matmul(ha, gaussian_like(data, {n, n})), hb);
    const Tensor probe = gaussian_like(data, {n, n});
    s = kron_update_preconditioner(std::move(s), g, probe, h);
  }
  const double precond_ratio = coord_ratio(true);
  CHECK(precond_ratio < raw_ratio);
  CHECK(precond_ratio < 0.5 * raw_ratio);  // decisively flatter, not borderline
}

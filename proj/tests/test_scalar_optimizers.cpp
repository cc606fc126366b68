#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "optbench/errors.hpp"
#include "optbench/scalar_optimizers.hpp"
#include "test_util.hpp"

using namespace optbench;
using testutil::random_tensor;

namespace {

ScalarHyper default_hyper() {
  ScalarHyper h;
  h.beta1 = 0.9;
  h.beta2 = 0.98;
  h.eps = 1e-10;
  return h;
}

Tensor scalar1(double v) { return Tensor({1}, {v}); }

}  // namespace

TEST_CASE("adamw first step hand evaluation") {
  ScalarHyper h = default_hyper();
  h.weight_decay = 0.1;
  const auto [w, s] = adamw_step(scalar1(1.0), scalar1(2.0), h, 0.1, MomentState{});
  // m_hat = 2, v_hat = 4 -> update 0.1 * 2/(2 + eps); decay 0.1*0.1*1.
  CHECK(w[0] == doctest::Approx(0.89).epsilon(1e-9));
  CHECK(s.m[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.v[0] == doctest::Approx(0.08).epsilon(1e-15));
  CHECK(s.t == 1);
}

TEST_CASE("adamw with an all-zero gradient stream leaves w fixed; state decays") {
  ScalarHyper h = default_hyper();
  // From a zero state the moments stay zero and w never moves.
  MomentState s;
  Tensor w = scalar1(2.0);
  for (int t = 0; t < 5; ++t) {
    auto r = adamw_step(w, scalar1(0.0), h, 0.1, std::move(s));
    w = std::move(r.w);
    s = std::move(r.state);
    CHECK(w[0] == 2.0);
  }
  // From a warm state the moments decay geometrically toward zero.
  s.m = scalar1(0.4);
  s.v = scalar1(0.9);
  s.t = 3;
  const auto r = adamw_step(w, scalar1(0.0), h, 0.0, std::move(s));
  CHECK(r.state.m[0] == doctest::Approx(0.9 * 0.4).epsilon(1e-15));
  CHECK(r.state.v[0] == doctest::Approx(0.98 * 0.9).epsilon(1e-15));
}

TEST_CASE("adamw first step direction is -sign(g) as eps -> 0") {
  ScalarHyper h = default_hyper();
  h.eps = 1e-18;
  const Tensor g = random_tensor({16}, 42);
  const auto [w, s] = adamw_step(Tensor::zeros({16}), g, h, 0.01, MomentState{});
  for (int64_t i = 0; i < 16; ++i) {
    CHECK(w[i] == doctest::Approx(-0.01 * (g[i] > 0 ? 1.0 : -1.0)).epsilon(1e-9));
  }
}

TEST_CASE("bias-correction identity at t=1") {
  ScalarHyper h = default_hyper();
  const Tensor g = random_tensor({8}, 9);
  const auto [w, s] = adamw_step(Tensor::zeros({8}), g, h, 0.0, MomentState{});
  for (int64_t i = 0; i < 8; ++i) {
    CHECK(s.m[i] / (1.0 - h.beta1) == doctest::Approx(g[i]).epsilon(1e-15));
    CHECK(s.v[i] / (1.0 - h.beta2) == doctest::Approx(g[i] * g[i]).epsilon(1e-15));
  }
}

TEST_CASE("nadamw first step hand evaluation") {
  ScalarHyper h = default_hyper();
  const auto [w, s] = nadamw_step(scalar1(1.0), scalar1(2.0), h, 0.1, MomentState{});
  // m = 0.2, m_tilde = 0.9*0.2 + 0.1*2 = 0.38, m_hat = 3.8, v_hat = 4.
  CHECK(w[0] == doctest::Approx(0.81).epsilon(1e-9));
}

TEST_CASE("nadamw with beta1=0 equals adamw") {
  ScalarHyper h = default_hyper();
  h.beta1 = 0.0;
  const Tensor w0 = random_tensor({12}, 1);
  const Tensor g = random_tensor({12}, 2);
  const auto a = adamw_step(w0, g, h, 0.05, MomentState{});
  const auto n = nadamw_step(w0, g, h, 0.05, MomentState{});
  CHECK(testutil::max_abs_diff(a.w, n.w) == 0.0);
}

TEST_CASE("lion hand evaluation and codomain") {
  ScalarHyper h;
  h.beta1 = 0.9;
  h.lion_beta2 = 0.95;
  h.weight_decay = 0.0;
  const auto [w, s] = lion_step(scalar1(0.0), scalar1(-3.0), h, 0.1, MomentState{});
  CHECK(w[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.m[0] == doctest::Approx(-0.15).epsilon(1e-15));

  // Zero gradient with zero momentum moves nothing (sign(0) = 0).
  const auto still = lion_step(scalar1(0.7), scalar1(0.0), h, 0.1, MomentState{});
  CHECK(still.w[0] == 0.7);

  // Per-coordinate |update| is 0 or lr when wd = 0.
  const Tensor w0 = random_tensor({32}, 5);
  const Tensor g = random_tensor({32}, 6);
  const auto r = lion_step(w0, g, h, 0.03, MomentState{});
  for (int64_t i = 0; i < 32; ++i) {
    const double step = std::fabs(r.w[i] - w0[i]);
    CHECK((step == 0.0 || std::fabs(step - 0.03) < 1e-15));
  }
}

TEST_CASE("mars corrected gradient hand evaluation") {
  ScalarHyper h;
  h.beta1 = 0.95;
  h.mars_gamma = 0.025;
  const Tensor c = mars_corrected_gradient(scalar1(1.0), scalar1(0.0), h);
  CHECK(c[0] == doctest::Approx(1.475).epsilon(1e-15));

  // Constant gradient stream: the correction vanishes.
  const Tensor c2 = mars_corrected_gradient(scalar1(1.0), scalar1(1.0), h);
  CHECK(c2[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mars with gamma=0 is exactly adamw") {
  ScalarHyper h = default_hyper();
  h.mars_gamma = 0.0;
  h.clip.max_norm = 1.0;
  for (uint64_t trial = 0; trial < 100; ++trial) {
    const Tensor w0 = random_tensor({6}, 2000 + trial);
    const Tensor g = random_tensor({6}, 3000 + trial);
    const auto a = adamw_step(w0, g, h, 0.02, MomentState{});
    const auto m = mars_step(w0, g, h, 0.02, MomentState{});
    CHECK(testutil::max_abs_diff(a.w, m.w) <= 1e-15);
  }
}

TEST_CASE("mars records the raw gradient as prev_grad") {
  ScalarHyper h = default_hyper();
  h.mars_gamma = 0.05;
  h.clip.max_norm = 0.5;  // clip c, not what lands in prev_grad
  const Tensor g = random_tensor({4}, 77);
  const auto r = mars_step(Tensor::zeros({4}), g, h, 0.01, MomentState{});
  CHECK(testutil::max_abs_diff(r.state.prev_grad, g) == 0.0);
}

TEST_CASE("adam-mini block second moment hand evaluation") {
  ScalarHyper h = default_hyper();
  const Tensor g({2}, {3.0, 4.0});
  const auto [w, s] =
      adammini_step(Tensor::zeros({2}), g, h, 0.0, MomentState{}, BlockPartition::whole(2));
  CHECK(s.v_blocks[0] == doctest::Approx(0.25).epsilon(1e-15));         // (1-b2)*mean(g^2)
  CHECK(s.v_blocks[0] / (1.0 - 0.98) == doctest::Approx(12.5).epsilon(1e-12));
}

TEST_CASE("adam-mini with singleton blocks equals adamw") {
  ScalarHyper h = default_hyper();
  for (uint64_t trial = 0; trial < 100; ++trial) {
    const Tensor w0 = random_tensor({5}, 4000 + trial);
    const Tensor g = random_tensor({5}, 5000 + trial);
    const auto a = adamw_step(w0, g, h, 0.03, MomentState{});
    const auto m = adammini_step(w0, g, h, 0.03, MomentState{}, BlockPartition::singletons(5));
    CHECK(testutil::max_abs_diff(a.w, m.w) <= 1e-15);
  }
}

TEST_CASE("adam-mini zero gradient decays block moments by beta2") {
  ScalarHyper h = default_hyper();
  MomentState s;
  s.m = Tensor::zeros({3});
  s.v_blocks = {0.5};
  s.t = 2;
  const auto r = adammini_step(Tensor::zeros({3}), Tensor::zeros({3}), h, 0.1, s,
                               BlockPartition::whole(3));
  CHECK(r.state.v_blocks[0] == doctest::Approx(0.98 * 0.5).epsilon(1e-15));
}

TEST_CASE("partition validation rejects gaps and overlaps") {
  BlockPartition gap{{{0, 2}, {3, 5}}};
  CHECK_THROWS_AS(gap.validate(5), ConfigError);
  BlockPartition overlap{{{0, 3}, {2, 5}}};
  CHECK_THROWS_AS(overlap.validate(5), ConfigError);
  BlockPartition ok{{{0, 3}, {3, 5}}};
  CHECK_NOTHROW(ok.validate(5));
}

TEST_CASE("cautious mask, rescale and zero-support convention") {
  ScalarHyper h;
  h.beta1 = 0.5;
  h.beta2 = 0.0;
  h.eps = 1e-12;
  // Seed the momentum so the adam direction u comes out (0.5, 0.2) against
  // g = (1, -1): mask (1, 0), mean 1/2, rescaled update (1.0, 0).
  MomentState s;
  s.m = Tensor({2}, {-0.5, 1.2});
  s.v = Tensor({2}, {0.0, 0.0});
  s.t = 0;
  const Tensor g({2}, {1.0, -1.0});
  const auto r = cautious_step(Tensor::zeros({2}), g, h, 0.1, s);
  CHECK(r.w[0] == doctest::Approx(-0.1).epsilon(1e-9));
  CHECK(r.w[1] == doctest::Approx(0.0).epsilon(1e-12));

  // Full disagreement: update is zero but decoupled decay still applies.
  ScalarHyper h2 = default_hyper();
  h2.weight_decay = 0.5;
  MomentState s2;
  s2.m = Tensor({2}, {1.0, 1.0});  // u > 0 while g < 0 everywhere
  s2.v = Tensor({2}, {1.0, 1.0});
  s2.t = 5;
  const Tensor w0({2}, {1.0, -2.0});
  const auto r2 = cautious_step(w0, Tensor({2}, {-1.0, -1.0}), h2, 0.1, s2);
  CHECK(r2.w[0] == doctest::Approx(1.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
  CHECK(r2.w[1] == doctest::Approx(-2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
}

TEST_CASE("cautious with all-aligned signs equals adamw") {
  ScalarHyper h = default_hyper();
  for (uint64_t trial = 0; trial < 100; ++trial) {
    const Tensor w0 = random_tensor({7}, 6000 + trial);
    const Tensor g = random_tensor({7}, 7000 + trial);
    // First step from zero state: u is aligned with g coordinate-wise.
    const auto a = adamw_step(w0, g, h, 0.04, MomentState{});
    const auto c = cautious_step(w0, g, h, 0.04, MomentState{});
    CHECK(testutil::max_abs_diff(a.w, c.w) <= 1e-15);
  }
}

TEST_CASE("decoupled decay: zero gradient from zero state shrinks w exactly") {
  const double lr = 0.1, wd = 0.3;
  const Tensor w0 = random_tensor({4}, 12);
  Tensor expected = w0;
  for (int64_t i = 0; i < 4; ++i) expected[i] = w0[i] * (1.0 - lr * wd);
  const Tensor zero = Tensor::zeros({4});
  ScalarHyper h = default_hyper();
  h.weight_decay = wd;

  CHECK(testutil::max_abs_diff(adamw_step(w0, zero, h, lr, MomentState{}).w, expected) == 0.0);
  CHECK(testutil::max_abs_diff(nadamw_step(w0, zero, h, lr, MomentState{}).w, expected) == 0.0);
  CHECK(testutil::max_abs_diff(lion_step(w0, zero, h, lr, MomentState{}).w, expected) == 0.0);
  CHECK(testutil::max_abs_diff(mars_step(w0, zero, h, lr, MomentState{}).w, expected) == 0.0);
  CHECK(testutil::max_abs_diff(cautious_step(w0, zero, h, lr, MomentState{}).w, expected) == 0.0);
  CHECK(testutil::max_abs_diff(
            adammini_step(w0, zero, h, lr, MomentState{}, BlockPartition::whole(4)).w, expected) ==
        0.0);
}

TEST_CASE("steps are pure: identical inputs give bit-identical outputs") {
  ScalarHyper h = default_hyper();
  h.weight_decay = 0.05;
  h.clip.max_norm = 2.0;
  const Tensor w0 = random_tensor({10}, 21);
  const Tensor g = random_tensor({10}, 22);
  MomentState s;
  s.m = random_tensor({10}, 23);
  s.v = random_tensor({10}, 24) * random_tensor({10}, 24);
  s.t = 7;

  using StepFn = std::function<StepResult(const Tensor&, const Tensor&, const ScalarHyper&,
                                          double, MomentState)>;
  const std::vector<StepFn> steps{
      [](auto&& w, auto&& g2, auto&& hh, double lr, MomentState st) {
        return adamw_step(w, g2, hh, lr, std::move(st));
      },
      [](auto&& w, auto&& g2, auto&& hh, double lr, MomentState st) {
        return nadamw_step(w, g2, hh, lr, std::move(st));
      },
      [](auto&& w, auto&& g2, auto&& hh, double lr, MomentState st) {
        return lion_step(w, g2, hh, lr, std::move(st));
      },
      [](auto&& w, auto&& g2, auto&& hh, double lr, MomentState st) {
        return mars_step(w, g2, hh, lr, std::move(st));
      },
      [](auto&& w, auto&& g2, auto&& hh, double lr, MomentState st) {
        return cautious_step(w, g2, hh, lr, std::move(st));
      },
      [](auto&& w, auto&& g2, auto&& hh, double lr, MomentState st) {
        return adammini_step(w, g2, hh, lr, std::move(st), BlockPartition::whole(10));
      },
  };
  for (const auto& step : steps) {
    const auto r1 = step(w0, g, h, 0.01, s);
    const auto r2 = step(w0, g, h, 0.01, s);
    CHECK(testutil::max_abs_diff(r1.w, r2.w) == 0.0);
    CHECK(testutil::max_abs_diff(r1.state.m, r2.state.m) == 0.0);
    CHECK(r1.state.t == r2.state.t);
  }
}

TEST_CASE("non-finite gradients are rejected") {
  const Tensor bad({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(adamw_step(Tensor::zeros({2}), bad, default_hyper(), 0.1, MomentState{}),
                  NumericError);
  CHECK_THROWS_AS(lion_step(Tensor::zeros({2}), bad, default_hyper(), 0.1, MomentState{}),
                  NumericError);
}

TEST_CASE("hyper validation") {
  ScalarHyper h = default_hyper();
  h.beta1 = 1.0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  h = default_hyper();
  h.eps = 0.0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
}

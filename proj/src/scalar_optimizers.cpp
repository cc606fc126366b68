#include "optbench/scalar_optimizers.hpp"

#include <cmath>

#include "optbench/errors.hpp"

namespace optbench {

namespace {

void ensure_like(Tensor& t, const Tensor& like) {
  if (t.empty()) t = Tensor::zeros(like.shape());
}

}  // namespace

void ScalarHyper::validate() const {
  auto in_unit = [](double b) { return b >= 0.0 && b < 1.0; };
  if (!in_unit(beta1) || !in_unit(beta2) || !in_unit(lion_beta2)) {
    throw ConfigError("scalar hyper: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("scalar hyper: eps must be positive");
  if (weight_decay < 0.0 || mars_gamma < 0.0) {
    throw ConfigError("scalar hyper: weight decay and mars gamma must be non-negative");
  }
}

void require_finite_gradient(const Tensor& g, const char* who) {
  if (!g.all_finite()) {
    throw NumericError(std::string(who) + ": non-finite gradient");
  }
}

StepResult adamw_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                      MomentState s) {
  check_same_shape(w, g_hat, "adamw_step");
  ensure_like(s.m, w);
  ensure_like(s.v, w);
  s.t += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
  Tensor out = w;
  for (int64_t i = 0; i < w.size(); ++i) {
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g_hat[i];
    s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * g_hat[i] * g_hat[i];
    const double m_hat = s.m[i] / bc1;
    const double v_hat = s.v[i] / bc2;
    out[i] = w[i] * (1.0 - lr * h.weight_decay) - lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
  return {std::move(out), std::move(s)};
}

StepResult nadamw_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                       MomentState s) {
  check_same_shape(w, g_hat, "nadamw_step");
  ensure_like(s.m, w);
  ensure_like(s.v, w);
  s.t += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
  Tensor out = w;
  for (int64_t i = 0; i < w.size(); ++i) {
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g_hat[i];
    s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * g_hat[i] * g_hat[i];
    const double m_tilde = h.beta1 * s.m[i] + (1.0 - h.beta1) * g_hat[i];
    const double m_hat = m_tilde / bc1;
    const double v_hat = s.v[i] / bc2;
    out[i] = w[i] * (1.0 - lr * h.weight_decay) - lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
  return {std::move(out), std::move(s)};
}

StepResult lion_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                     MomentState s) {
  check_same_shape(w, g_hat, "lion_step");
  ensure_like(s.m, w);
  s.t += 1;
  Tensor out = w;
  for (int64_t i = 0; i < w.size(); ++i) {
    const double dir = h.beta1 * s.m[i] + (1.0 - h.beta1) * g_hat[i];
    s.m[i] = h.lion_beta2 * s.m[i] + (1.0 - h.lion_beta2) * g_hat[i];
    const double step = dir > 0.0 ? 1.0 : (dir < 0.0 ? -1.0 : 0.0);
    out[i] = w[i] * (1.0 - lr * h.weight_decay) - lr * step;
  }
  return {std::move(out), std::move(s)};
}

StepResult cautious_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                         MomentState s) {
  check_same_shape(w, g_hat, "cautious_step");
  ensure_like(s.m, w);
  ensure_like(s.v, w);
  s.t += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
  Tensor u(w.shape());
  double mask_sum = 0.0;
  for (int64_t i = 0; i < w.size(); ++i) {
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g_hat[i];
    s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * g_hat[i] * g_hat[i];
    u[i] = (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + h.eps);
    if (u[i] * g_hat[i] > 0.0) mask_sum += 1.0;
  }
  const double mask_mean = mask_sum / static_cast<double>(w.size());
  Tensor out = w;
  for (int64_t i = 0; i < w.size(); ++i) {
    // mean(s)=0 yields a zero update; weight decay stays unmasked.
    const double masked = (mask_mean > 0.0 && u[i] * g_hat[i] > 0.0) ? u[i] / mask_mean : 0.0;
    out[i] = w[i] * (1.0 - lr * h.weight_decay) - lr * masked;
  }
  return {std::move(out), std::move(s)};
}

Tensor mars_corrected_gradient(const Tensor& g, const Tensor& prev_grad, const ScalarHyper& h) {
  const double k = h.mars_gamma * h.beta1 / (1.0 - h.beta1);
  Tensor c = g;
  if (k != 0.0) {
    for (int64_t i = 0; i < c.size(); ++i) {
      const double prev = prev_grad.empty() ? 0.0 : prev_grad[i];
      c[i] += k * (g[i] - prev);
    }
  }
  return c;
}

StepResult adammini_core(const Tensor& w, const Tensor& g_hat, const ScalarHyper& h, double lr,
                         MomentState s, const BlockPartition& partition) {
  check_same_shape(w, g_hat, "adammini_step");
  partition.validate(w.size());
  ensure_like(s.m, w);
  if (s.v_blocks.empty()) s.v_blocks.assign(partition.ranges.size(), 0.0);
  if (s.v_blocks.size() != partition.ranges.size()) {
    throw ConfigError("adammini_step: state has " + std::to_string(s.v_blocks.size()) +
                      " blocks, partition has " + std::to_string(partition.ranges.size()));
  }
  s.t += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
  Tensor out = w;
  for (int64_t i = 0; i < w.size(); ++i) {
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g_hat[i];
  }
  for (size_t b = 0; b < partition.ranges.size(); ++b) {
    const auto [begin, end] = partition.ranges[b];
    double sq = 0.0;
    for (int64_t i = begin; i < end; ++i) sq += g_hat[i] * g_hat[i];
    sq /= static_cast<double>(end - begin);
    s.v_blocks[b] = h.beta2 * s.v_blocks[b] + (1.0 - h.beta2) * sq;
    const double denom = std::sqrt(s.v_blocks[b] / bc2) + h.eps;
    for (int64_t i = begin; i < end; ++i) {
      out[i] = w[i] * (1.0 - lr * h.weight_decay) - lr * (s.m[i] / bc1) / denom;
    }
  }
  return {std::move(out), std::move(s)};
}

StepResult adamw_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                      MomentState s) {
  require_finite_gradient(g, "adamw_step");
  return adamw_core(w, clip_gradient(g, h.clip), h, lr, std::move(s));
}

StepResult nadamw_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                       MomentState s) {
  require_finite_gradient(g, "nadamw_step");
  return nadamw_core(w, clip_gradient(g, h.clip), h, lr, std::move(s));
}

StepResult lion_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                     MomentState s) {
  require_finite_gradient(g, "lion_step");
  return lion_core(w, clip_gradient(g, h.clip), h, lr, std::move(s));
}

StepResult cautious_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                         MomentState s) {
  require_finite_gradient(g, "cautious_step");
  return cautious_core(w, clip_gradient(g, h.clip), h, lr, std::move(s));
}

StepResult mars_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                     MomentState s) {
  require_finite_gradient(g, "mars_step");
  const Tensor c_hat = clip_gradient(mars_corrected_gradient(g, s.prev_grad, h), h.clip);
  StepResult res = adamw_core(w, c_hat, h, lr, std::move(s));
  res.state.prev_grad = g;
  return res;
}

StepResult adammini_step(const Tensor& w, const Tensor& g, const ScalarHyper& h, double lr,
                         MomentState s, const BlockPartition& partition) {
  require_finite_gradient(g, "adammini_step");
  return adammini_core(w, clip_gradient(g, h.clip), h, lr, std::move(s), partition);
}

}  // namespace optbench

#include "optbench/problems.hpp"

#include <cmath>

#include "optbench/errors.hpp"
#include "optbench/linalg.hpp"
#include "optbench/schedule.hpp"

namespace optbench {

namespace {

std::vector<double> log_spaced_eigs(int64_t n, double cond) {
  if (n <= 0) throw ConfigError("quadratic: dim must be positive");
  if (!(cond >= 1.0)) throw ConfigError("quadratic: condition number must be >= 1 (SPD)");
  std::vector<double> eigs(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double frac = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    eigs[static_cast<size_t>(i)] = std::pow(cond, frac);
  }
  return eigs;
}

// SPD matrix R diag(eigs) R' with a seeded random rotation.
Tensor spd_from_spectrum(const std::vector<double>& eigs, RngStream& rng) {
  const int64_t n = static_cast<int64_t>(eigs.size());
  const Tensor q = householder_qr(gaussian_like(rng, {n, n})).q;
  Tensor scaled = q;  // columns scaled by eigenvalues: R D
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) scaled.at(i, j) *= eigs[static_cast<size_t>(j)];
  }
  return matmul(scaled, transpose(q));
}

std::vector<int64_t> sample_indices(int64_t data_size, int64_t batch, uint64_t batch_seed) {
  RngStream s = derive_stream(batch_seed, 0, "batch-index");
  std::vector<int64_t> idx(static_cast<size_t>(batch));
  for (auto& i : idx) i = static_cast<int64_t>(draw_u64(s) % static_cast<uint64_t>(data_size));
  return idx;
}

}  // namespace

std::vector<Tensor> Problem::hvp(const std::vector<ParamBlock>& params,
                                 const std::vector<Tensor>& v, uint64_t batch_seed) const {
  double wnorm_sq = 0.0;
  for (const auto& p : params) {
    for (int64_t i = 0; i < p.value.size(); ++i) wnorm_sq += p.value[i] * p.value[i];
  }
  const double delta = 1e-4 * (1.0 + std::sqrt(wnorm_sq));

  auto shifted = [&](double sign) {
    std::vector<ParamBlock> out = params;
    for (size_t b = 0; b < out.size(); ++b) {
      for (int64_t i = 0; i < out[b].value.size(); ++i) {
        out[b].value[i] += sign * delta * v[b][i];
      }
    }
    return loss_grad(out, batch_seed).second;
  };

  auto plus = shifted(1.0);
  const auto minus = shifted(-1.0);
  for (size_t b = 0; b < plus.size(); ++b) {
    for (int64_t i = 0; i < plus[b].size(); ++i) {
      plus[b][i] = (plus[b][i] - minus[b][i]) / (2.0 * delta);
    }
  }
  return plus;
}

// ---------------------------------------------------------------------------

DiagQuadratic::DiagQuadratic(std::vector<double> eigs, Tensor b, double noise_scale,
                             int64_t batch, uint64_t init_seed)
    : eigs_(std::move(eigs)), b_(std::move(b)), noise_scale_(noise_scale), batch_(batch) {
  name_ = "quadratic";
  const int64_t n = static_cast<int64_t>(eigs_.size());
  for (double e : eigs_) {
    if (!(e > 0.0)) throw ConfigError("quadratic: H must be SPD (positive eigenvalues)");
  }
  if (b_.empty()) b_ = Tensor::zeros({n});
  if (b_.size() != n) throw ConfigError("quadratic: b length does not match dim");
  if (noise_scale_ < 0.0 || batch_ <= 0) throw ConfigError("quadratic: bad noise/batch");
  RngStream rng = derive_stream(init_seed, 0, "quadratic-init");
  init_ = {ParamBlock{"w", Role::kNorm, gaussian_like(rng, {n})}};
}

double DiagQuadratic::full_loss(const std::vector<ParamBlock>& params) const {
  const Tensor& w = params[0].value;
  double loss = 0.0;
  for (int64_t i = 0; i < w.size(); ++i) {
    loss += 0.5 * eigs_[static_cast<size_t>(i)] * w[i] * w[i] - b_[i] * w[i];
  }
  return loss;
}

std::pair<double, std::vector<Tensor>> DiagQuadratic::loss_grad(
    const std::vector<ParamBlock>& params, uint64_t batch_seed) const {
  const Tensor& w = params[0].value;
  Tensor g(w.shape());
  for (int64_t i = 0; i < w.size(); ++i) g[i] = eigs_[static_cast<size_t>(i)] * w[i] - b_[i];
  if (noise_scale_ > 0.0) {
    RngStream s = derive_stream(batch_seed, 0, "grad-noise");
    const Tensor z = gaussian_like(s, w.shape());
    const double scale = noise_scale_ / std::sqrt(static_cast<double>(batch_));
    for (int64_t i = 0; i < g.size(); ++i) g[i] += scale * z[i];
  }
  return {full_loss(params), {std::move(g)}};
}

std::vector<Tensor> DiagQuadratic::hvp(const std::vector<ParamBlock>&, const std::vector<Tensor>& v,
                                       uint64_t) const {
  Tensor out = v[0];
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= eigs_[static_cast<size_t>(i)];
  return {std::move(out)};
}

std::optional<double> DiagQuadratic::optimal_loss() const {
  double loss = 0.0;  // minimum at w* = H^-1 b
  for (int64_t i = 0; i < b_.size(); ++i) {
    loss -= 0.5 * b_[i] * b_[i] / eigs_[static_cast<size_t>(i)];
  }
  return loss;
}

// ---------------------------------------------------------------------------

KronQuadratic::KronQuadratic(int64_t side, double cond, double noise_scale, int64_t batch,
                             uint64_t seed)
    : noise_scale_(noise_scale), batch_(batch) {
  name_ = "kron_quadratic";
  if (side <= 0) throw ConfigError("kron_quadratic: dim must be positive");
  if (!(cond >= 1.0)) throw ConfigError("kron_quadratic: condition number must be >= 1 (SPD)");
  if (noise_scale_ < 0.0 || batch_ <= 0) throw ConfigError("kron_quadratic: bad noise/batch");
  RngStream rng = derive_stream(seed, 0, "kronq-init");
  const double factor_cond = std::sqrt(cond);
  ha_ = spd_from_spectrum(log_spaced_eigs(side, factor_cond), rng);
  hb_ = spd_from_spectrum(log_spaced_eigs(side, factor_cond), rng);
  init_ = {ParamBlock{"w", Role::kMatrix, gaussian_like(rng, {side, side})}};
}

double KronQuadratic::full_loss(const std::vector<ParamBlock>& params) const {
  const Tensor& w = params[0].value;
  return 0.5 * dot(w, matmul(matmul(ha_, w), hb_));
}

std::pair<double, std::vector<Tensor>> KronQuadratic::loss_grad(
    const std::vector<ParamBlock>& params, uint64_t batch_seed) const {
  const Tensor& w = params[0].value;
  Tensor g = matmul(matmul(ha_, w), hb_);
  if (noise_scale_ > 0.0) {
    RngStream s = derive_stream(batch_seed, 0, "grad-noise");
    const Tensor z = gaussian_like(s, w.shape());
    const double scale = noise_scale_ / std::sqrt(static_cast<double>(batch_));
    for (int64_t i = 0; i < g.size(); ++i) g[i] += scale * z[i];
  }
  return {full_loss(params), {std::move(g)}};
}

std::vector<Tensor> KronQuadratic::hvp(const std::vector<ParamBlock>&, const std::vector<Tensor>& v,
                                       uint64_t) const {
  return {matmul(matmul(ha_, v[0]), hb_)};
}

// ---------------------------------------------------------------------------

SoftmaxRegression::SoftmaxRegression(int64_t classes, int64_t features, int64_t data_size,
                                     int64_t batch, uint64_t seed)
    : classes_(classes), features_(features), data_size_(data_size), batch_(batch) {
  name_ = "softmax";
  if (classes_ < 2 || features_ <= 0 || data_size_ <= 0 || batch_ <= 0) {
    throw ConfigError("softmax: need classes >= 2 and positive dim/data/batch");
  }
  RngStream rng = derive_stream(seed, 0, "softmax-data");
  std::vector<Tensor> centers;
  centers.reserve(static_cast<size_t>(classes_));
  for (int64_t k = 0; k < classes_; ++k) centers.push_back(3.0 * gaussian_like(rng, {features_}));
  xs_.reserve(static_cast<size_t>(data_size_));
  ys_.reserve(static_cast<size_t>(data_size_));
  for (int64_t i = 0; i < data_size_; ++i) {
    const int64_t y = i % classes_;
    xs_.push_back(centers[static_cast<size_t>(y)] + gaussian_like(rng, {features_}));
    ys_.push_back(y);
  }
  RngStream wrng = derive_stream(seed, 0, "softmax-init");
  init_ = {ParamBlock{"w", Role::kHead, 0.05 * gaussian_like(wrng, {classes_, features_})}};
}

double SoftmaxRegression::batch_loss(const Tensor& w, const std::vector<int64_t>& idx,
                                     Tensor* grad) const {
  double loss = 0.0;
  std::vector<double> logits(static_cast<size_t>(classes_));
  for (int64_t i : idx) {
    const Tensor& x = xs_[static_cast<size_t>(i)];
    double zmax = -1e300;
    for (int64_t k = 0; k < classes_; ++k) {
      double z = 0.0;
      for (int64_t j = 0; j < features_; ++j) z += w.at(k, j) * x[j];
      logits[static_cast<size_t>(k)] = z;
      zmax = std::max(zmax, z);
    }
    double denom = 0.0;
    for (double& z : logits) {
      z = std::exp(z - zmax);
      denom += z;
    }
    const int64_t y = ys_[static_cast<size_t>(i)];
    loss -= std::log(logits[static_cast<size_t>(y)] / denom);
    if (grad) {
      for (int64_t k = 0; k < classes_; ++k) {
        const double p = logits[static_cast<size_t>(k)] / denom;
        const double coeff = p - (k == y ? 1.0 : 0.0);
        for (int64_t j = 0; j < features_; ++j) grad->at(k, j) += coeff * x[j];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  if (grad) *grad *= inv;
  return loss * inv;
}

std::pair<double, std::vector<Tensor>> SoftmaxRegression::loss_grad(
    const std::vector<ParamBlock>& params, uint64_t batch_seed) const {
  const auto idx = sample_indices(data_size_, batch_, batch_seed);
  Tensor grad({classes_, features_});
  const double loss = batch_loss(params[0].value, idx, &grad);
  return {loss, {std::move(grad)}};
}

double SoftmaxRegression::full_loss(const std::vector<ParamBlock>& params) const {
  std::vector<int64_t> all(static_cast<size_t>(data_size_));
  for (int64_t i = 0; i < data_size_; ++i) all[static_cast<size_t>(i)] = i;
  return batch_loss(params[0].value, all, nullptr);
}

// ---------------------------------------------------------------------------

TinyMlp::TinyMlp(int64_t in_dim, int64_t hidden, int64_t out_dim, int64_t data_size,
                 int64_t batch, uint64_t seed, double target_scale)
    : in_(in_dim), hidden_(hidden), out_(out_dim), data_size_(data_size), batch_(batch) {
  name_ = "mlp";
  if (in_ <= 0 || hidden_ <= 0 || out_ <= 0 || data_size_ <= 0 || batch_ <= 0) {
    throw ConfigError("mlp: all extents must be positive");
  }
  RngStream rng = derive_stream(seed, 0, "mlp-data");
  const Tensor t1 = (1.0 / std::sqrt(static_cast<double>(in_))) * gaussian_like(rng, {hidden_, in_});
  const Tensor t2 =
      (1.0 / std::sqrt(static_cast<double>(hidden_))) * gaussian_like(rng, {out_, hidden_});
  xs_.reserve(static_cast<size_t>(data_size_));
  ys_.reserve(static_cast<size_t>(data_size_));
  for (int64_t i = 0; i < data_size_; ++i) {
    Tensor x = gaussian_like(rng, {in_});
    Tensor a({hidden_});
    for (int64_t hh = 0; hh < hidden_; ++hh) {
      double z = 0.0;
      for (int64_t j = 0; j < in_; ++j) z += t1.at(hh, j) * x[j];
      a[hh] = std::tanh(z);
    }
    Tensor y({out_});
    for (int64_t o = 0; o < out_; ++o) {
      double z = 0.0;
      for (int64_t hh = 0; hh < hidden_; ++hh) z += t2.at(o, hh) * a[hh];
      y[o] = target_scale * z;
    }
    xs_.push_back(std::move(x));
    ys_.push_back(std::move(y));
  }
  RngStream wrng = derive_stream(seed, 0, "mlp-init");
  init_ = {
      ParamBlock{"w1", Role::kMatrix,
                 (1.0 / std::sqrt(static_cast<double>(in_))) * gaussian_like(wrng, {hidden_, in_})},
      ParamBlock{"w2", Role::kHead,
                 (1.0 / std::sqrt(static_cast<double>(hidden_))) *
                     gaussian_like(wrng, {out_, hidden_})},
  };
}

double TinyMlp::batch_loss(const Tensor& w1, const Tensor& w2, const std::vector<int64_t>& idx,
                           Tensor* g1, Tensor* g2) const {
  double loss = 0.0;
  Tensor a({hidden_}), e({out_});
  for (int64_t i : idx) {
    const Tensor& x = xs_[static_cast<size_t>(i)];
    const Tensor& y = ys_[static_cast<size_t>(i)];
    for (int64_t hh = 0; hh < hidden_; ++hh) {
      double z = 0.0;
      for (int64_t j = 0; j < in_; ++j) z += w1.at(hh, j) * x[j];
      a[hh] = std::tanh(z);
    }
    for (int64_t o = 0; o < out_; ++o) {
      double z = 0.0;
      for (int64_t hh = 0; hh < hidden_; ++hh) z += w2.at(o, hh) * a[hh];
      e[o] = z - y[o];
      loss += 0.5 * e[o] * e[o];
    }
    if (g1 && g2) {
      for (int64_t o = 0; o < out_; ++o) {
        for (int64_t hh = 0; hh < hidden_; ++hh) g2->at(o, hh) += e[o] * a[hh];
      }
      for (int64_t hh = 0; hh < hidden_; ++hh) {
        double back = 0.0;
        for (int64_t o = 0; o < out_; ++o) back += w2.at(o, hh) * e[o];
        back *= 1.0 - a[hh] * a[hh];
        for (int64_t j = 0; j < in_; ++j) g1->at(hh, j) += back * x[j];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  if (g1) *g1 *= inv;
  if (g2) *g2 *= inv;
  return loss * inv;
}

std::pair<double, std::vector<Tensor>> TinyMlp::loss_grad(const std::vector<ParamBlock>& params,
                                                          uint64_t batch_seed) const {
  const auto idx = sample_indices(data_size_, batch_, batch_seed);
  Tensor g1({hidden_, in_}), g2({out_, hidden_});
  const double loss = batch_loss(params[0].value, params[1].value, idx, &g1, &g2);
  return {loss, {std::move(g1), std::move(g2)}};
}

double TinyMlp::full_loss(const std::vector<ParamBlock>& params) const {
  std::vector<int64_t> all(static_cast<size_t>(data_size_));
  for (int64_t i = 0; i < data_size_; ++i) all[static_cast<size_t>(i)] = i;
  return batch_loss(params[0].value, params[1].value, all, nullptr, nullptr);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec, uint64_t master_seed) {
  if (spec.name == "quadratic") {
    return std::make_unique<DiagQuadratic>(log_spaced_eigs(spec.dim, spec.cond), Tensor{},
                                           spec.noise, spec.batch, master_seed);
  }
  if (spec.name == "kron_quadratic") {
    return std::make_unique<KronQuadratic>(spec.dim, spec.cond, spec.noise, spec.batch,
                                           master_seed);
  }
  if (spec.name == "softmax") {
    return std::make_unique<SoftmaxRegression>(spec.classes, spec.dim, spec.data_size, spec.batch,
                                               master_seed);
  }
  if (spec.name == "mlp") {
    return std::make_unique<TinyMlp>(spec.dim, spec.hidden, spec.out_dim, spec.data_size,
                                     spec.batch, master_seed);
  }
  throw ConfigError("unknown problem '" + spec.name + "'");
}

double finite_diff_grad_check(const Problem& problem, const std::vector<ParamBlock>& point,
                              double h_rel, uint64_t batch_seed) {
  const auto analytic = problem.loss_grad(point, batch_seed).second;
  double max_rel = 0.0;
  std::vector<ParamBlock> probe = point;
  for (size_t b = 0; b < point.size(); ++b) {
    for (int64_t i = 0; i < point[b].value.size(); ++i) {
      const double w0 = point[b].value[i];
      const double h = h_rel * (1.0 + std::fabs(w0));
      probe[b].value[i] = w0 + h;
      const double lp = problem.loss_grad(probe, batch_seed).first;
      probe[b].value[i] = w0 - h;
      const double lm = problem.loss_grad(probe, batch_seed).first;
      probe[b].value[i] = w0;
      const double fd = (lp - lm) / (2.0 * h);
      const double g = analytic[b][i];
      const double rel = std::fabs(fd - g) / std::max({1.0, std::fabs(fd), std::fabs(g)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace optbench

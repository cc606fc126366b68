#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "optbench/blocks.hpp"
#include "optbench/rng.hpp"
#include "optbench/tensor.hpp"

namespace optbench {

// Config surface: problem.name, problem.dim, problem.cond, problem.noise,
// problem.batch (+ small per-problem extras).
struct ProblemSpec {
  std::string name = "kron_quadratic";
  int64_t dim = 16;        // quadratic: vector length (diag) or matrix side (kron);
                           // softmax: feature count; mlp: input width
  double cond = 1000.0;    // quadratic condition number
  double noise = 0.0;      // gradient noise scale (quadratics)
  int64_t batch = 32;
  int64_t classes = 4;     // softmax
  int64_t hidden = 8;      // mlp
  int64_t out_dim = 4;     // mlp
  int64_t data_size = 256; // softmax/mlp dataset size
};

// Deterministic desk-scale objective with analytic gradients. Oracles are
// pure: the same (params, batch_seed) always produces the same (loss, grads).
class Problem {
 public:
  virtual ~Problem() = default;

  const std::string& name() const { return name_; }
  const std::vector<ParamBlock>& initial_params() const { return init_; }

  virtual std::pair<double, std::vector<Tensor>> loss_grad(const std::vector<ParamBlock>& params,
                                                           uint64_t batch_seed) const = 0;
  // Noiseless full-data loss; this is what "validation loss" means here.
  virtual double full_loss(const std::vector<ParamBlock>& params) const = 0;

  virtual bool has_exact_hvp() const { return false; }
  // Hessian-vector product: exact where available, otherwise central
  // differences of loss_grad with delta = 1e-4 * (1 + |w|).
  virtual std::vector<Tensor> hvp(const std::vector<ParamBlock>& params,
                                  const std::vector<Tensor>& v, uint64_t batch_seed) const;

  virtual std::optional<double> optimal_loss() const { return std::nullopt; }

 protected:
  std::string name_;
  std::vector<ParamBlock> init_;
};

// Diagonal quadratic: L = 1/2 w'Hw - b'w with H = diag(eigs); gradient noise
// (scale/sqrt(batch)) drawn from the batch seed.
class DiagQuadratic final : public Problem {
 public:
  DiagQuadratic(std::vector<double> eigs, Tensor b, double noise_scale, int64_t batch,
                uint64_t init_seed);
  std::pair<double, std::vector<Tensor>> loss_grad(const std::vector<ParamBlock>& params,
                                                   uint64_t batch_seed) const override;
  double full_loss(const std::vector<ParamBlock>& params) const override;
  bool has_exact_hvp() const override { return true; }
  std::vector<Tensor> hvp(const std::vector<ParamBlock>& params, const std::vector<Tensor>& v,
                          uint64_t batch_seed) const override;
  std::optional<double> optimal_loss() const override;

 private:
  std::vector<double> eigs_;
  Tensor b_;
  double noise_scale_;
  int64_t batch_;
};

// Kronecker quadratic on a matrix parameter W: L = 1/2 <W, Ha W Hb>, grad =
// Ha W Hb (+ noise). Ha, Hb are SPD with spectra log-spaced to the requested
// condition numbers, conjugated by seeded random rotations.
class KronQuadratic final : public Problem {
 public:
  KronQuadratic(int64_t side, double cond, double noise_scale, int64_t batch, uint64_t seed);
  std::pair<double, std::vector<Tensor>> loss_grad(const std::vector<ParamBlock>& params,
                                                   uint64_t batch_seed) const override;
  double full_loss(const std::vector<ParamBlock>& params) const override;
  bool has_exact_hvp() const override { return true; }
  std::vector<Tensor> hvp(const std::vector<ParamBlock>& params, const std::vector<Tensor>& v,
                          uint64_t batch_seed) const override;
  std::optional<double> optimal_loss() const override { return 0.0; }
  const Tensor& ha() const { return ha_; }
  const Tensor& hb() const { return hb_; }

 private:
  Tensor ha_, hb_;
  double noise_scale_;
  int64_t batch_;
};

// Softmax regression on a fixed synthetic K-cluster Gaussian dataset.
class SoftmaxRegression final : public Problem {
 public:
  SoftmaxRegression(int64_t classes, int64_t features, int64_t data_size, int64_t batch,
                    uint64_t seed);
  std::pair<double, std::vector<Tensor>> loss_grad(const std::vector<ParamBlock>& params,
                                                   uint64_t batch_seed) const override;
  double full_loss(const std::vector<ParamBlock>& params) const override;

 private:
  double batch_loss(const Tensor& w, const std::vector<int64_t>& idx, Tensor* grad) const;
  int64_t classes_, features_, data_size_, batch_;
  std::vector<Tensor> xs_;
  std::vector<int64_t> ys_;
};

// Two-layer tanh network with squared error against a fixed teacher;
// blocks are {matrix, head} so Muon/Scion routing has real work to do.
class TinyMlp final : public Problem {
 public:
  // target_scale scales the teacher outputs (0 gives an all-zero target set).
  TinyMlp(int64_t in_dim, int64_t hidden, int64_t out_dim, int64_t data_size, int64_t batch,
          uint64_t seed, double target_scale = 1.0);
  std::pair<double, std::vector<Tensor>> loss_grad(const std::vector<ParamBlock>& params,
                                                   uint64_t batch_seed) const override;
  double full_loss(const std::vector<ParamBlock>& params) const override;

 private:
  double batch_loss(const Tensor& w1, const Tensor& w2, const std::vector<int64_t>& idx,
                    Tensor* g1, Tensor* g2) const;
  int64_t in_, hidden_, out_, data_size_, batch_;
  std::vector<Tensor> xs_, ys_;
};

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec, uint64_t master_seed);

// Central-difference gradient check at `point` with a frozen batch; returns
// the max per-coordinate relative error |fd - g| / max(1, |fd|, |g|).
double finite_diff_grad_check(const Problem& problem, const std::vector<ParamBlock>& point,
                              double h_rel, uint64_t batch_seed);

}  // namespace optbench

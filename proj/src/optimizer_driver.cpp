#include "optbench/optimizer_driver.hpp"

#include <cmath>
#include <map>
#include <optional>

#include "optbench/errors.hpp"
#include "optbench/matrix_optimizers.hpp"
#include "optbench/rng.hpp"
#include "optbench/scalar_optimizers.hpp"
#include "optbench/schedule.hpp"
#include "optbench/sophia.hpp"

namespace optbench {

namespace {

HyperConfig schedule_defaults() {
  return {
      {"warmup", int64_t{0}},
      {"min_lr_ratio", 0.0},
      {"decay_shape", std::string("cosine")},
      {"batch", int64_t{32}},
  };
}

std::map<std::string, OptimizerSchema> build_schemas() {
  const HyperConfig adam_like = {
      {"beta1", 0.9}, {"beta2", 0.98}, {"eps", 1e-10}, {"wd", 0.0}, {"clip", 0.0}};
  std::map<std::string, OptimizerSchema> out;

  auto with_schedule = [](HyperConfig extra) {
    HyperConfig d = schedule_defaults();
    for (auto& [k, v] : extra) d[k] = v;
    return d;
  };

  out["adamw"] = {{"lr"}, with_schedule(adam_like)};
  out["nadamw"] = {{"lr"}, with_schedule(adam_like)};
  out["cautious"] = {{"lr"}, with_schedule(adam_like)};
  out["adam-mini"] = {{"lr"}, with_schedule(adam_like)};

  out["lion"] = {{"lr"},
                 with_schedule({{"beta1", 0.9}, {"beta2", 0.95}, {"wd", 0.0}, {"clip", 0.0}})};

  {
    HyperConfig mars = adam_like;
    mars["beta2"] = 0.95;
    mars["gamma"] = 0.025;
    out["mars"] = {{"lr"}, with_schedule(mars)};
  }

  out["sophia"] = {{"lr"},
                   with_schedule({{"beta1", 0.95},
                                  {"beta2", 0.99},
                                  {"gamma", 0.0125},
                                  {"eps", 1e-12},
                                  {"k", int64_t{10}},
                                  {"wd", 0.0}})};

  out["muon"] = {{"lr", "lr_adam"},
                 with_schedule({{"beta_muon", 0.95},
                                {"eps_muon", 1e-5},
                                {"beta1", 0.9},
                                {"beta2", 0.98},
                                {"eps", 1e-10},
                                {"wd", 0.0},
                                {"clip", 0.0}})};

  out["scion"] = {{"lr", "lr_signgd"},
                  with_schedule({{"beta_muon", 0.95},
                                 {"eps_muon", 1e-15},
                                 {"beta1", 0.95},
                                 {"wd", 0.0},
                                 {"clip", 0.0}})};

  out["soap"] = {{"lr"},
                 with_schedule({{"beta1", 0.95},
                                {"beta2", 0.98},
                                {"beta_shampoo", 0.95},
                                {"f_pc", int64_t{10}},
                                {"eps", 1e-10},
                                {"block_size", int64_t{256}},
                                {"blocking", true},
                                {"wd", 0.0},
                                {"clip", 0.0}})};

  out["kron"] = {{"lr"},
                 with_schedule({{"beta1", 0.95},
                                {"plr", 0.2},
                                {"p_pc", 0.05},
                                {"init_pc", 1.0},
                                {"eps", 1e-8},
                                {"normalize_grads", false},
                                {"merge_small_dims", true},
                                {"blocking", true},
                                {"block_size", int64_t{256}},
                                {"target_merged_dim_size", int64_t{0}},  // 0 -> block_size
                                {"wd", 0.0},
                                {"clip", 0.0}})};
  return out;
}

const std::map<std::string, OptimizerSchema>& schemas() {
  static const std::map<std::string, OptimizerSchema> s = build_schemas();
  return s;
}

std::string schema_keys(const std::string& name) {
  const auto& schema = schemas().at(name);
  std::string keys;
  for (const auto& k : schema.required) keys += k + "(required) ";
  for (const auto& [k, _] : schema.defaults) keys += k + " ";
  if (!keys.empty()) keys.pop_back();
  return keys;
}

// The optionally-absent WSD fraction is accepted by every schema but has no
// default entry (absence means "no WSD phase").
bool is_wsd_key(const std::string& k) { return k == "wsd_decay"; }

}  // namespace

const std::vector<std::string>& known_optimizers() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : schemas()) out.push_back(k);
    return out;
  }();
  return names;
}

const OptimizerSchema& optimizer_schema(const std::string& name) {
  auto it = schemas().find(name);
  if (it == schemas().end()) {
    std::string all;
    for (const auto& n : known_optimizers()) all += n + " ";
    throw ConfigError("unknown optimizer '" + name + "' (known: " + all + ")");
  }
  return it->second;
}

void validate_hypers(const std::string& optimizer, const HyperConfig& hypers) {
  const OptimizerSchema& schema = optimizer_schema(optimizer);
  for (const auto& [key, _] : hypers) {
    if (key == "lr" || is_wsd_key(key)) continue;
    if (schema.required.count(key) || schema.defaults.count(key)) continue;
    throw ConfigError("hyperparameter '" + key + "' is not in the " + optimizer +
                      " schema (keys: lr(required) wsd_decay " + schema_keys(optimizer) + ")");
  }
  for (const auto& key : schema.required) {
    if (!hypers.count(key)) {
      throw ConfigError(optimizer + " config missing required hyperparameter '" + key +
                        "' (per-optimizer schema: lr(required) " + schema_keys(optimizer) + ")");
    }
  }
  if (!hypers.count("lr")) {
    throw ConfigError(optimizer + " config missing required hyperparameter 'lr'");
  }
}

HyperConfig hypers_with_defaults(const std::string& optimizer, const HyperConfig& hypers) {
  validate_hypers(optimizer, hypers);
  HyperConfig out = optimizer_schema(optimizer).defaults;
  for (const auto& [k, v] : hypers) out[k] = v;
  if (optimizer == "kron" && hyper_as_int(out.at("target_merged_dim_size"), "t") == 0) {
    out["target_merged_dim_size"] = out.at("block_size");
  }
  return out;
}

namespace {

double dget(const HyperConfig& h, const std::string& k) { return hyper_as_double(h.at(k), k); }
int64_t iget(const HyperConfig& h, const std::string& k) { return hyper_as_int(h.at(k), k); }
bool bget(const HyperConfig& h, const std::string& k) { return hyper_as_bool(h.at(k), k); }

void require_finite_block(const Tensor& g, const std::string& block_name) {
  if (!g.all_finite()) {
    throw NumericError("non-finite gradient for block '" + block_name + "'");
  }
}

// ---------------------------------------------------------------------------

enum class ScalarKind { kAdamW, kNAdamW, kLion, kMars, kCautious };

class ScalarDriver final : public OptimizerDriver {
 public:
  ScalarDriver(ScalarKind kind, const HyperConfig& h) : kind_(kind) {
    hyper_.beta1 = dget(h, "beta1");
    hyper_.beta2 = dget(h, "beta2");
    if (h.count("eps")) hyper_.eps = dget(h, "eps");
    hyper_.weight_decay = dget(h, "wd");
    hyper_.clip.max_norm = dget(h, "clip");
    if (kind == ScalarKind::kLion) hyper_.lion_beta2 = dget(h, "beta2");
    if (kind == ScalarKind::kMars) hyper_.mars_gamma = dget(h, "gamma");
    hyper_.validate();
  }

  void step(std::vector<ParamBlock>& params, std::vector<Tensor> grads, double lr,
            const StepContext&) override {
    for (size_t b = 0; b < params.size(); ++b) require_finite_block(grads[b], params[b].name);
    states_.resize(params.size());
    ScalarHyper core_hyper = hyper_;
    core_hyper.clip.max_norm = 0.0;  // the global cap below replaces per-op clipping

    if (kind_ == ScalarKind::kMars) {
      std::vector<Tensor> corrected(params.size());
      for (size_t b = 0; b < params.size(); ++b) {
        corrected[b] = mars_corrected_gradient(grads[b], states_[b].prev_grad, hyper_);
      }
      clip_gradients(corrected, hyper_.clip);
      for (size_t b = 0; b < params.size(); ++b) {
        auto res = adamw_core(params[b].value, corrected[b], core_hyper, lr,
                              std::move(states_[b]));
        params[b].value = std::move(res.w);
        states_[b] = std::move(res.state);
        states_[b].prev_grad = std::move(grads[b]);
      }
      t_ += 1;
      return;
    }

    clip_gradients(grads, hyper_.clip);
    for (size_t b = 0; b < params.size(); ++b) {
      StepResult res = [&] {
        switch (kind_) {
          case ScalarKind::kAdamW:
            return adamw_core(params[b].value, grads[b], core_hyper, lr, std::move(states_[b]));
          case ScalarKind::kNAdamW:
            return nadamw_core(params[b].value, grads[b], core_hyper, lr, std::move(states_[b]));
          case ScalarKind::kLion:
            return lion_core(params[b].value, grads[b], core_hyper, lr, std::move(states_[b]));
          case ScalarKind::kCautious:
            return cautious_core(params[b].value, grads[b], core_hyper, lr, std::move(states_[b]));
          default:
            throw ConfigError("unreachable scalar kind");
        }
      }();
      params[b].value = std::move(res.w);
      states_[b] = std::move(res.state);
    }
    t_ += 1;
  }

  int64_t steps_taken() const override { return t_; }

 private:
  ScalarKind kind_;
  ScalarHyper hyper_;
  std::vector<MomentState> states_;
  int64_t t_ = 0;
};

// ---------------------------------------------------------------------------

class AdamMiniDriver final : public OptimizerDriver {
 public:
  AdamMiniDriver(const HyperConfig& h, const std::vector<ParamBlock>& params) {
    hyper_.beta1 = dget(h, "beta1");
    hyper_.beta2 = dget(h, "beta2");
    hyper_.eps = dget(h, "eps");
    hyper_.weight_decay = dget(h, "wd");
    hyper_.clip.max_norm = dget(h, "clip");
    hyper_.validate();
    for (const auto& p : params) partitions_.push_back(adammini_partition(p));
    states_.resize(params.size());
  }

  void step(std::vector<ParamBlock>& params, std::vector<Tensor> grads, double lr,
            const StepContext&) override {
    for (size_t b = 0; b < params.size(); ++b) require_finite_block(grads[b], params[b].name);
    clip_gradients(grads, hyper_.clip);
    ScalarHyper core_hyper = hyper_;
    core_hyper.clip.max_norm = 0.0;
    for (size_t b = 0; b < params.size(); ++b) {
      auto res = adammini_core(params[b].value, grads[b], core_hyper, lr, std::move(states_[b]),
                               partitions_[b]);
      params[b].value = std::move(res.w);
      states_[b] = std::move(res.state);
    }
    t_ += 1;
  }

  int64_t steps_taken() const override { return t_; }

 private:
  ScalarHyper hyper_;
  std::vector<BlockPartition> partitions_;
  std::vector<MomentState> states_;
  int64_t t_ = 0;
};

// ---------------------------------------------------------------------------

class SophiaDriver final : public OptimizerDriver {
 public:
  SophiaDriver(const HyperConfig& h, HvpOracle hvp, uint64_t seed, uint64_t trial)
      : hvp_(std::move(hvp)) {
    if (!hvp_) throw ConfigError("sophia requires a Hessian-vector-product oracle");
    hyper_.beta1 = dget(h, "beta1");
    hyper_.beta2 = dget(h, "beta2");
    hyper_.gamma = dget(h, "gamma");
    hyper_.eps = dget(h, "eps");
    hyper_.k = iget(h, "k");
    hyper_.weight_decay = dget(h, "wd");
    hyper_.validate();
    rng_ = derive_stream(seed, trial, "sophia-hutchinson");
  }

  void step(std::vector<ParamBlock>& params, std::vector<Tensor> grads, double lr,
            const StepContext& ctx) override {
    for (size_t b = 0; b < params.size(); ++b) require_finite_block(grads[b], params[b].name);
    states_.resize(params.size());

    std::vector<std::optional<Tensor>> samples(params.size());
    if (sophia_refresh_due(t_ + 1, hyper_.k)) {
      std::vector<Tensor> probes;
      probes.reserve(params.size());
      for (const auto& p : params) probes.push_back(rademacher_like(rng_, p.value.shape()));
      std::vector<Tensor> hv = hvp_(params, probes, ctx.batch_seed);
      for (size_t b = 0; b < params.size(); ++b) {
        if (!hv[b].all_finite()) {
          throw NumericError("sophia: non-finite HVP for block '" + params[b].name + "'");
        }
        samples[b] = probes[b] * hv[b];
      }
    }
    for (size_t b = 0; b < params.size(); ++b) {
      auto res = sophia_step(params[b].value, grads[b], hyper_, lr, std::move(states_[b]),
                             samples[b]);
      params[b].value = std::move(res.w);
      states_[b] = std::move(res.state);
    }
    t_ += 1;
  }

  int64_t steps_taken() const override { return t_; }

 private:
  SophiaHyper hyper_;
  HvpOracle hvp_;
  RngStream rng_;
  std::vector<SophiaState> states_;
  int64_t t_ = 0;
};

// ---------------------------------------------------------------------------

class MuonDriver final : public OptimizerDriver {
 public:
  MuonDriver(const HyperConfig& h) {
    matrix_.beta = dget(h, "beta_muon");
    matrix_.ns_eps = dget(h, "eps_muon");
    matrix_.weight_decay = dget(h, "wd");
    adam_.beta1 = dget(h, "beta1");
    adam_.beta2 = dget(h, "beta2");
    adam_.eps = dget(h, "eps");
    adam_.weight_decay = dget(h, "wd");
    adam_.validate();
    clip_.max_norm = dget(h, "clip");
    lr_peak_ = dget(h, "lr");
    lr_adam_peak_ = dget(h, "lr_adam");
  }

  void step(std::vector<ParamBlock>& params, std::vector<Tensor> grads, double lr,
            const StepContext&) override {
    for (size_t b = 0; b < params.size(); ++b) require_finite_block(grads[b], params[b].name);
    clip_gradients(grads, clip_);
    momenta_.resize(params.size());
    adam_states_.resize(params.size());
    const double lr_adam = lr_adam_peak_ * (lr / lr_peak_);
    for (size_t b = 0; b < params.size(); ++b) {
      if (params[b].role == Role::kMatrix) {
        auto [w, m] = muon_matrix_step(params[b].value, grads[b], matrix_, lr,
                                       std::move(momenta_[b]));
        params[b].value = std::move(w);
        momenta_[b] = std::move(m);
      } else {
        auto res = adamw_core(params[b].value, grads[b], adam_, lr_adam,
                              std::move(adam_states_[b]));
        params[b].value = std::move(res.w);
        adam_states_[b] = std::move(res.state);
      }
    }
    t_ += 1;
  }

  int64_t steps_taken() const override { return t_; }

 private:
  MuonMatrixHyper matrix_;
  ScalarHyper adam_;
  ClipPolicy clip_;
  double lr_peak_ = 0.0, lr_adam_peak_ = 0.0;
  std::vector<Tensor> momenta_;
  std::vector<MomentState> adam_states_;
  int64_t t_ = 0;
};

class ScionDriver final : public OptimizerDriver {
 public:
  ScionDriver(const HyperConfig& h) {
    matrix_.beta = dget(h, "beta_muon");
    matrix_.ns_eps = dget(h, "eps_muon");
    matrix_.weight_decay = dget(h, "wd");
    sign_beta1_ = dget(h, "beta1");
    clip_.max_norm = dget(h, "clip");
    lr_peak_ = dget(h, "lr");
    lr_sign_peak_ = dget(h, "lr_signgd");
  }

  void step(std::vector<ParamBlock>& params, std::vector<Tensor> grads, double lr,
            const StepContext&) override {
    for (size_t b = 0; b < params.size(); ++b) require_finite_block(grads[b], params[b].name);
    clip_gradients(grads, clip_);
    momenta_.resize(params.size());
    const double lr_sign = lr_sign_peak_ * (lr / lr_peak_);
    for (size_t b = 0; b < params.size(); ++b) {
      if (params[b].role == Role::kMatrix) {
        auto [w, m] = muon_matrix_step(params[b].value, grads[b], matrix_, lr,
                                       std::move(momenta_[b]));
        params[b].value = std::move(w);
        momenta_[b] = std::move(m);
      } else {
        auto [w, m] = scion_sign_step(params[b].value, grads[b], sign_beta1_, lr_sign,
                                      std::move(momenta_[b]));
        params[b].value = std::move(w);
        momenta_[b] = std::move(m);
      }
    }
    t_ += 1;
  }

  int64_t steps_taken() const override { return t_; }

 private:
  MuonMatrixHyper matrix_;
  double sign_beta1_ = 0.95;
  ClipPolicy clip_;
  double lr_peak_ = 0.0, lr_sign_peak_ = 0.0;
  std::vector<Tensor> momenta_;
  int64_t t_ = 0;
};

// ---------------------------------------------------------------------------

class SoapDriver final : public OptimizerDriver {
 public:
  SoapDriver(const HyperConfig& h, const std::vector<ParamBlock>& params) {
    hyper_.beta1 = dget(h, "beta1");
    hyper_.beta2 = dget(h, "beta2");
    hyper_.shampoo_beta = dget(h, "beta_shampoo");
    hyper_.precond_freq = iget(h, "f_pc");
    hyper_.eps = dget(h, "eps");
    hyper_.weight_decay = dget(h, "wd");
    clip_.max_norm = dget(h, "clip");
    const int64_t block_size = bget(h, "blocking") ? iget(h, "block_size") : 0;

    for (const auto& p : params) {
      BlockLayout layout;
      layout.shape2d = p.value.rank() == 2
                           ? p.value.shape()
                           : std::vector<int64_t>{p.value.size(), 1};
      layout.tiles = partition_shape(layout.shape2d, block_size);
      for (const auto& tile : layout.tiles) {
        layout.states.push_back(soap_init_state(tile.extent[0], tile.extent[1]));
      }
      layouts_.push_back(std::move(layout));
    }
  }

  void step(std::vector<ParamBlock>& params, std::vector<Tensor> grads, double lr,
            const StepContext&) override {
    for (size_t b = 0; b < params.size(); ++b) require_finite_block(grads[b], params[b].name);
    clip_gradients(grads, clip_);
    for (size_t b = 0; b < params.size(); ++b) {
      auto& layout = layouts_[b];
      Tensor w2d = params[b].value.reshaped(layout.shape2d);
      const Tensor g2d = grads[b].reshaped(layout.shape2d);
      for (size_t ti = 0; ti < layout.tiles.size(); ++ti) {
        const Tensor wt = extract_tile(w2d, layout.tiles[ti]);
        const Tensor gt = extract_tile(g2d, layout.tiles[ti]);
        auto [w_new, s_new] = soap_step(wt, gt, hyper_, lr, std::move(layout.states[ti]));
        layout.states[ti] = std::move(s_new);
        insert_tile(w2d, layout.tiles[ti], w_new);
      }
      params[b].value = w2d.reshaped(params[b].value.shape());
    }
    t_ += 1;
  }

  int64_t steps_taken() const override { return t_; }

  const SoapBlockState& tile_state(size_t block, size_t tile) const {
    return layouts_[block].states[tile];
  }

 private:
  struct BlockLayout {
    std::vector<int64_t> shape2d;
    std::vector<TileSlice> tiles;
    std::vector<SoapBlockState> states;
  };
  SoapHyper hyper_;
  ClipPolicy clip_;
  std::vector<BlockLayout> layouts_;
  int64_t t_ = 0;
};

// ---------------------------------------------------------------------------

class KronDriver final : public OptimizerDriver {
 public:
  KronDriver(const HyperConfig& h, const std::vector<ParamBlock>& params, uint64_t seed,
             uint64_t trial) {
    hyper_.beta1 = dget(h, "beta1");
    hyper_.precond_lr = dget(h, "plr");
    hyper_.update_probability = dget(h, "p_pc");
    hyper_.init_pc = dget(h, "init_pc");
    hyper_.eps = dget(h, "eps");
    hyper_.normalize_grads = bget(h, "normalize_grads");
    hyper_.weight_decay = dget(h, "wd");
    clip_.max_norm = dget(h, "clip");
    const bool merge = bget(h, "merge_small_dims");
    const int64_t merge_target = iget(h, "target_merged_dim_size");
    const int64_t block_size = bget(h, "blocking") ? iget(h, "block_size") : 0;

    for (size_t b = 0; b < params.size(); ++b) {
      BlockLayout layout;
      layout.merged_shape = merge ? merge_small_dims(params[b].value.shape(), merge_target)
                                  : params[b].value.shape();
      layout.tiles = partition_shape(layout.merged_shape, block_size);
      for (size_t ti = 0; ti < layout.tiles.size(); ++ti) {
        const std::string purpose =
            "kron-" + std::to_string(b) + "-" + std::to_string(ti);
        layout.states.push_back(kron_init_state(layout.tiles[ti].extent, hyper_.init_pc,
                                                derive_stream(seed, trial, purpose)));
      }
      layouts_.push_back(std::move(layout));
    }
  }

  void step(std::vector<ParamBlock>& params, std::vector<Tensor> grads, double lr,
            const StepContext&) override {
    for (size_t b = 0; b < params.size(); ++b) require_finite_block(grads[b], params[b].name);
    if (clip_.max_norm > 0.0) clip_gradients(grads, clip_);
    for (size_t b = 0; b < params.size(); ++b) {
      auto& layout = layouts_[b];
      Tensor wm = params[b].value.reshaped(layout.merged_shape);
      const Tensor gm = grads[b].reshaped(layout.merged_shape);
      for (size_t ti = 0; ti < layout.tiles.size(); ++ti) {
        const Tensor wt = extract_tile(wm, layout.tiles[ti]);
        const Tensor gt = extract_tile(gm, layout.tiles[ti]);
        auto [w_new, s_new] = kron_tile_step(wt, gt, hyper_, lr, std::move(layout.states[ti]));
        layout.states[ti] = std::move(s_new);
        insert_tile(wm, layout.tiles[ti], w_new);
      }
      params[b].value = wm.reshaped(params[b].value.shape());
    }
    t_ += 1;
  }

  int64_t steps_taken() const override { return t_; }

  const KronTileState& tile_state(size_t block, size_t tile) const {
    return layouts_[block].states[tile];
  }

 private:
  struct BlockLayout {
    std::vector<int64_t> merged_shape;
    std::vector<TileSlice> tiles;
    std::vector<KronTileState> states;
  };
  KronHyper hyper_;
  ClipPolicy clip_;
  std::vector<BlockLayout> layouts_;
  int64_t t_ = 0;
};

}  // namespace

std::unique_ptr<OptimizerDriver> make_optimizer(const OptimizerSetup& setup,
                                                const std::vector<ParamBlock>& params) {
  const HyperConfig h = hypers_with_defaults(setup.name, setup.hypers);
  if (setup.name == "adamw") return std::make_unique<ScalarDriver>(ScalarKind::kAdamW, h);
  if (setup.name == "nadamw") return std::make_unique<ScalarDriver>(ScalarKind::kNAdamW, h);
  if (setup.name == "lion") return std::make_unique<ScalarDriver>(ScalarKind::kLion, h);
  if (setup.name == "mars") return std::make_unique<ScalarDriver>(ScalarKind::kMars, h);
  if (setup.name == "cautious") return std::make_unique<ScalarDriver>(ScalarKind::kCautious, h);
  if (setup.name == "adam-mini") return std::make_unique<AdamMiniDriver>(h, params);
  if (setup.name == "sophia") {
    return std::make_unique<SophiaDriver>(h, setup.hvp, setup.master_seed, setup.trial_id);
  }
  if (setup.name == "muon") return std::make_unique<MuonDriver>(h);
  if (setup.name == "scion") return std::make_unique<ScionDriver>(h);
  if (setup.name == "soap") return std::make_unique<SoapDriver>(h, params);
  if (setup.name == "kron") {
    return std::make_unique<KronDriver>(h, params, setup.master_seed, setup.trial_id);
  }
  throw ConfigError("unknown optimizer '" + setup.name + "'");
}

}  // namespace optbench

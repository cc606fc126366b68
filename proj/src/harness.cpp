#include "optbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "optbench/errors.hpp"
#include "optbench/optimizer_driver.hpp"
#include "optbench/rng.hpp"
#include "optbench/schedule.hpp"

namespace optbench {

namespace {

using nlohmann::json;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string fmt_double(double v) { return hyper_to_string(HyperValue{v}); }

std::string sanitize_filename(const std::string& s) {
  std::string out;
  for (char c : s) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')
               ? c
               : '-';
  }
  return out.empty() ? "trial" : out;
}

Schedule schedule_from_hypers(const HyperConfig& h, int64_t total_steps) {
  Schedule sch;
  sch.peak_lr = hyper_as_double(h.at("lr"), "lr");
  sch.warmup_steps = hyper_as_int(h.at("warmup"), "warmup");
  sch.total_steps = total_steps;
  sch.min_lr_ratio = hyper_as_double(h.at("min_lr_ratio"), "min_lr_ratio");
  const std::string shape = hyper_as_string(h.at("decay_shape"), "decay_shape");
  if (shape == "cosine") {
    sch.decay_shape = DecayShape::kCosine;
  } else if (shape == "linear") {
    sch.decay_shape = DecayShape::kLinear;
  } else {
    throw ConfigError("decay_shape must be 'cosine' or 'linear', got '" + shape + "'");
  }
  if (auto it = h.find("wsd_decay"); it != h.end()) {
    sch.wsd_decay_fraction = hyper_as_double(it->second, "wsd_decay");
  }
  sch.validate();
  return sch;
}

}  // namespace

int64_t TrialConfig::resolved_batch() const {
  if (auto it = hypers.find("batch"); it != hypers.end()) {
    return hyper_as_int(it->second, "batch");
  }
  return batch > 0 ? batch : problem.batch;
}

int64_t TrialConfig::resolved_steps() const {
  if (steps > 0) return steps;
  if (regime.d > 0.0) {
    return std::max<int64_t>(1, static_cast<int64_t>(regime.d / static_cast<double>(resolved_batch())));
  }
  throw ConfigError("trial '" + name + "': steps not set and no regime data budget to derive from");
}

void TrialConfig::validate() const {
  validate_hypers(optimizer, hypers);
  if (eval_interval <= 0) throw ConfigError("eval_interval must be positive");
  if (resolved_steps() <= 0) throw ConfigError("steps must be positive");
  if (resolved_batch() <= 0) throw ConfigError("batch must be positive");
}

uint64_t TrialConfig::hash() const {
  std::ostringstream os;
  os << optimizer << '|' << config_key(hypers) << '|' << problem.name << ',' << problem.dim << ','
     << problem.cond << ',' << problem.noise << ',' << problem.batch << ',' << problem.classes
     << ',' << problem.hidden << ',' << problem.out_dim << ',' << problem.data_size << '|'
     << regime.label << ',' << regime.n << ',' << regime.d << '|' << steps << '|' << batch << '|'
     << eval_interval << '|' << seed;
  return fnv1a(os.str());
}

std::string RunResult::trial_label() const {
  if (!config.name.empty()) return sanitize_filename(config.name);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config.hash()));
  return sanitize_filename(config.optimizer + "-" + buf);
}

TrialRecord RunResult::to_record() const {
  TrialRecord rec;
  rec.regime_label = config.regime.label;
  rec.config = hypers_full;
  rec.final_loss = final_loss;
  rec.failed = diverged;
  for (const auto& row : curve) rec.curve.push_back({row.step, row.val_loss});
  return rec;
}

RunResult run_trial(const TrialConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  RunResult out;
  out.config = cfg;
  out.hypers_full = hypers_with_defaults(cfg.optimizer, cfg.hypers);

  ProblemSpec pspec = cfg.problem;
  pspec.batch = cfg.resolved_batch();
  const auto problem = make_problem(pspec, cfg.seed);
  std::vector<ParamBlock> params = problem->initial_params();

  const int64_t steps = cfg.resolved_steps();
  const Schedule sched = schedule_from_hypers(out.hypers_full, steps);

  OptimizerSetup setup;
  setup.name = cfg.optimizer;
  setup.hypers = cfg.hypers;
  setup.master_seed = cfg.seed;
  setup.trial_id = cfg.hash();
  if (cfg.optimizer == "sophia") {
    setup.hvp = [p = problem.get()](const std::vector<ParamBlock>& at,
                                    const std::vector<Tensor>& v, uint64_t batch_seed) {
      return p->hvp(at, v, batch_seed);
    };
  }
  auto optimizer = make_optimizer(setup, params);

  const double initial = problem->full_loss(params);
  const double blowup = 10.0 * std::max(std::fabs(initial), 1e-12);
  const int64_t batch = cfg.resolved_batch();

  out.curve.push_back({0, 0, initial, initial, lr_at(sched, 0)});
  double last_val = initial;

  for (int64_t t = 1; t <= steps; ++t) {
    const uint64_t batch_seed = derive_stream(cfg.seed, static_cast<uint64_t>(t), "batch").state;
    auto [train_loss, grads] = problem->loss_grad(params, batch_seed);
    bool finite_grads = true;
    for (const auto& g : grads) finite_grads = finite_grads && g.all_finite();
    if (!std::isfinite(train_loss) || train_loss > blowup || !finite_grads) {
      out.diverged = true;
      break;
    }
    const double lr = lr_at(sched, t);
    optimizer->step(params, std::move(grads), lr, StepContext{batch_seed});
    if (t % cfg.eval_interval == 0 || t == steps) {
      const double val = problem->full_loss(params);
      out.curve.push_back({t, t * batch, train_loss, val, lr});
      last_val = val;
      if (!std::isfinite(val) || val > blowup) {
        out.diverged = true;
        break;
      }
    }
  }

  out.final_loss = out.diverged ? std::numeric_limits<double>::infinity() : last_val;
  const auto t_end = std::chrono::steady_clock::now();
  out.wall_seconds = std::chrono::duration<double>(t_end - t_start).count();
  const int64_t done = out.curve.empty() ? 0 : out.curve.back().step;
  out.steps_per_sec = out.wall_seconds > 0.0 ? static_cast<double>(done) / out.wall_seconds : 0.0;
  return out;
}

int thread_count_from_env() {
  if (const char* env = std::getenv("OPTBENCH_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return std::min(n, 256);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

std::vector<RunResult> run_trials(const std::vector<TrialConfig>& trials, int threads) {
  std::vector<RunResult> results(trials.size());
  std::vector<std::string> errors(trials.size());
  std::atomic<size_t> next{0};
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(trials.size())));

  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= trials.size()) return;
      try {
        results[i] = run_trial(trials[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw ConfigError("trial '" + trials[i].name + "': " + errors[i]);
    }
  }
  std::stable_sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) {
    const auto ka = std::make_tuple(a.config.regime.label, a.config.optimizer, a.config.hash());
    const auto kb = std::make_tuple(b.config.regime.label, b.config.optimizer, b.config.hash());
    return ka < kb;
  });
  return results;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

HyperValue hyper_from_json(const json& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<int64_t>();
  if (v.is_number_float()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  throw ConfigError(where + ": hyperparameter values must be scalars");
}

HyperConfig hypers_from_json(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  HyperConfig out;
  for (const auto& [key, v] : obj.items()) out[key] = hyper_from_json(v, where + "." + key);
  return out;
}

ProblemSpec problem_from_json(const json& obj) {
  reject_unknown_keys(obj, {"name", "dim", "cond", "noise", "batch", "classes", "hidden",
                            "out_dim", "data_size"},
                      "problem");
  ProblemSpec spec;
  if (obj.contains("name")) spec.name = obj.at("name").get<std::string>();
  if (obj.contains("dim")) spec.dim = obj.at("dim").get<int64_t>();
  if (obj.contains("cond")) spec.cond = obj.at("cond").get<double>();
  if (obj.contains("noise")) spec.noise = obj.at("noise").get<double>();
  if (obj.contains("batch")) spec.batch = obj.at("batch").get<int64_t>();
  if (obj.contains("classes")) spec.classes = obj.at("classes").get<int64_t>();
  if (obj.contains("hidden")) spec.hidden = obj.at("hidden").get<int64_t>();
  if (obj.contains("out_dim")) spec.out_dim = obj.at("out_dim").get<int64_t>();
  if (obj.contains("data_size")) spec.data_size = obj.at("data_size").get<int64_t>();
  return spec;
}

Regime regime_from_json(const json& obj) {
  reject_unknown_keys(obj, {"label", "n", "d"}, "regime");
  Regime r;
  if (obj.contains("label")) r.label = obj.at("label").get<std::string>();
  if (obj.contains("n")) r.n = obj.at("n").get<double>();
  if (obj.contains("d")) r.d = obj.at("d").get<double>();
  if (r.n < 0.0 || r.d < 0.0) throw ConfigError("regime: n and d must be non-negative");
  return r;
}

TrialConfig trial_from_json(const json& obj, uint64_t default_seed) {
  reject_unknown_keys(obj, {"name", "regime", "problem", "optimizer", "hypers", "steps",
                            "batch", "eval_interval", "seed"},
                      "trial");
  TrialConfig cfg;
  if (obj.contains("name")) cfg.name = obj.at("name").get<std::string>();
  if (obj.contains("regime")) cfg.regime = regime_from_json(obj.at("regime"));
  if (obj.contains("problem")) cfg.problem = problem_from_json(obj.at("problem"));
  if (!obj.contains("optimizer")) throw ConfigError("trial: missing 'optimizer'");
  cfg.optimizer = obj.at("optimizer").get<std::string>();
  if (obj.contains("hypers")) cfg.hypers = hypers_from_json(obj.at("hypers"), "hypers");
  if (obj.contains("steps")) cfg.steps = obj.at("steps").get<int64_t>();
  if (obj.contains("batch")) cfg.batch = obj.at("batch").get<int64_t>();
  if (obj.contains("eval_interval")) cfg.eval_interval = obj.at("eval_interval").get<int64_t>();
  cfg.seed = obj.contains("seed") ? obj.at("seed").get<uint64_t>() : default_seed;
  cfg.validate();
  return cfg;
}

SweepJob sweep_from_json(const json& obj, uint64_t default_seed) {
  reject_unknown_keys(obj, {"problem", "optimizer", "grid", "start", "delta1", "delta2",
                            "max_passes", "coordinate_order", "regimes", "eval_interval", "steps",
                            "seed"},
                      "sweep");
  SweepJob job;
  if (obj.contains("problem")) job.problem = problem_from_json(obj.at("problem"));
  if (!obj.contains("optimizer")) throw ConfigError("sweep: missing 'optimizer'");
  job.optimizer = obj.at("optimizer").get<std::string>();
  if (!obj.contains("grid") || !obj.at("grid").is_object()) {
    throw ConfigError("sweep: missing 'grid' object");
  }
  for (const auto& [name, list] : obj.at("grid").items()) {
    if (!list.is_array() || list.empty()) {
      throw ConfigError("sweep: grid for '" + name + "' must be a non-empty array");
    }
    std::vector<HyperValue> values;
    for (const auto& v : list) values.push_back(hyper_from_json(v, "grid." + name));
    job.grid.values[name] = std::move(values);
  }
  job.grid.validate();
  if (!obj.contains("start")) throw ConfigError("sweep: missing 'start' config");
  job.start = hypers_from_json(obj.at("start"), "start");
  if (obj.contains("delta1")) job.sweep.delta1 = obj.at("delta1").get<double>();
  if (obj.contains("delta2")) job.sweep.delta2 = obj.at("delta2").get<double>();
  if (obj.contains("max_passes")) job.sweep.max_passes = obj.at("max_passes").get<int>();
  if (obj.contains("coordinate_order")) {
    for (const auto& v : obj.at("coordinate_order")) {
      job.sweep.coordinate_order.push_back(v.get<std::string>());
    }
  }
  if (!obj.contains("regimes") || !obj.at("regimes").is_array() || obj.at("regimes").empty()) {
    throw ConfigError("sweep: missing non-empty 'regimes' array");
  }
  for (const auto& r : obj.at("regimes")) job.regimes.push_back(regime_from_json(r));
  if (obj.contains("eval_interval")) job.eval_interval = obj.at("eval_interval").get<int64_t>();
  if (obj.contains("steps")) job.steps_override = obj.at("steps").get<int64_t>();
  job.seed = obj.contains("seed") ? obj.at("seed").get<uint64_t>() : default_seed;
  job.sweep.validate();
  // Validate the start (and by extension every swept config) against the
  // optimizer schema up front.
  HyperConfig probe = job.start;
  validate_hypers(job.optimizer, probe);
  return job;
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not well-formed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown_keys(doc, {"seed", "out_dir", "run", "sweep", "fit", "report"}, "config root");

  ParsedConfig out;
  if (doc.contains("seed")) out.seed = doc.at("seed").get<uint64_t>();
  if (doc.contains("out_dir")) out.out_dir = doc.at("out_dir").get<std::string>();
  if (doc.contains("run")) {
    reject_unknown_keys(doc.at("run"), {"trials"}, "run");
    if (!doc.at("run").contains("trials") || !doc.at("run").at("trials").is_array()) {
      throw ConfigError("run: missing 'trials' array");
    }
    for (const auto& t : doc.at("run").at("trials")) {
      out.trials.push_back(trial_from_json(t, out.seed));
    }
  }
  if (doc.contains("sweep")) out.sweep = sweep_from_json(doc.at("sweep"), out.seed);
  if (doc.contains("fit")) {
    const json& f = doc.at("fit");
    reject_unknown_keys(f, {"records", "form", "optimizer", "out"}, "fit");
    FitJob job;
    if (!f.contains("records")) throw ConfigError("fit: missing 'records' path");
    job.records = f.at("records").get<std::string>();
    if (f.contains("form")) job.form = form_from_name(f.at("form").get<std::string>());
    if (f.contains("optimizer")) job.optimizer_filter = f.at("optimizer").get<std::string>();
    if (f.contains("out")) job.out = f.at("out").get<std::string>();
    out.fit = std::move(job);
  }
  if (doc.contains("report")) {
    const json& r = doc.at("report");
    reject_unknown_keys(r, {"dir", "baseline"}, "report");
    ReportJob job;
    if (!r.contains("dir")) throw ConfigError("report: missing 'dir'");
    job.dir = r.at("dir").get<std::string>();
    if (r.contains("baseline")) job.baseline = r.at("baseline").get<std::string>();
    out.report = std::move(job);
  }
  return out;
}

ParsedConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// ---------------------------------------------------------------------------
// Sweep driver

std::vector<RegimeSweepResult> run_sweep_job(const SweepJob& job, int threads) {
  std::vector<RegimeSweepResult> out(job.regimes.size());
  std::vector<std::string> errors(job.regimes.size());
  std::atomic<size_t> next{0};
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(job.regimes.size())));

  auto sweep_one = [&](size_t ri) {
    const Regime& regime = job.regimes[ri];
    TrialEvaluator evaluator = [&](const HyperConfig& hypers) -> EvalOutcome {
      TrialConfig cfg;
      cfg.regime = regime;
      cfg.problem = job.problem;
      cfg.optimizer = job.optimizer;
      cfg.hypers = hypers;
      cfg.steps = job.steps_override;
      cfg.eval_interval = job.eval_interval;
      cfg.seed = derive_stream(job.seed, fnv1a(regime.label), "sweep-trial").state;
      RunResult res = run_trial(cfg);
      return EvalOutcome{res.final_loss, res.to_record().curve, res.diverged};
    };
    SweepResult sr = coordinate_descent(job.grid, job.start, evaluator, job.sweep);
    for (auto& rec : sr.ledger) rec.regime_label = regime.label;
    out[ri] = RegimeSweepResult{regime, std::move(sr)};
  };

  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= job.regimes.size()) return;
      try {
        sweep_one(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw ConfigError("sweep regime '" + job.regimes[i].label + "': " + errors[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emission

namespace {

std::vector<std::string> hyper_columns(const std::vector<const HyperConfig*>& configs) {
  std::set<std::string> keys;
  for (const auto* c : configs) {
    for (const auto& [k, _] : *c) keys.insert(k);
  }
  return {keys.begin(), keys.end()};
}

std::string csv_hyper_cell(const HyperConfig& c, const std::string& key) {
  auto it = c.find(key);
  return it == c.end() ? std::string() : hyper_to_string(it->second);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);  // '\n' endings everywhere
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::string loss_cell(double loss) {
  return std::isfinite(loss) ? fmt_double(loss) : "inf";
}

}  // namespace

void write_results_csv(const std::vector<RunResult>& results, const std::filesystem::path& path) {
  std::vector<const HyperConfig*> configs;
  for (const auto& r : results) configs.push_back(&r.hypers_full);
  const auto columns = hyper_columns(configs);

  auto out = open_out(path);
  out << "regime,regime_n,regime_d,optimizer,config_hash";
  for (const auto& c : columns) out << ',' << c;
  out << ",final_loss,status\n";
  for (const auto& r : results) {
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(r.config.hash()));
    out << r.config.regime.label << ',' << fmt_double(r.config.regime.n) << ','
        << fmt_double(r.config.regime.d) << ',' << r.config.optimizer << ',' << hash_hex;
    for (const auto& c : columns) out << ',' << csv_hyper_cell(r.hypers_full, c);
    out << ',' << loss_cell(r.final_loss) << ',' << r.status() << '\n';
  }
}

void write_curves(const std::vector<RunResult>& results, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& r : results) {
    auto out = open_out(dir / (r.trial_label() + ".csv"));
    out << "step,samples,train_loss,val_loss,lr\n";
    for (const auto& row : r.curve) {
      out << row.step << ',' << row.samples << ',' << loss_cell(row.train_loss) << ','
          << loss_cell(row.val_loss) << ',' << fmt_double(row.lr) << '\n';
    }
  }
}

void write_timings_csv(const std::vector<RunResult>& results, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "trial,optimizer,wall_s,steps_per_s\n";
  for (const auto& r : results) {
    char wall[32], sps[32];
    std::snprintf(wall, sizeof(wall), "%.3f", r.wall_seconds);
    std::snprintf(sps, sizeof(sps), "%.1f", r.steps_per_sec);
    out << r.trial_label() << ',' << r.config.optimizer << ',' << wall << ',' << sps << '\n';
  }
}

void write_sweep_ledger_csv(const std::vector<RegimeSweepResult>& sweeps,
                            const std::string& optimizer, const std::filesystem::path& path) {
  std::vector<const HyperConfig*> configs;
  for (const auto& s : sweeps) {
    for (const auto& rec : s.sweep.ledger) configs.push_back(&rec.config);
  }
  const auto columns = hyper_columns(configs);

  auto out = open_out(path);
  out << "regime,label,optimizer";
  for (const auto& c : columns) out << ',' << c;
  out << ",final_loss,status\n";
  for (const auto& s : sweeps) {
    for (const auto& rec : s.sweep.ledger) {
      out << fmt_double(s.regime.n) << 'x' << fmt_double(s.regime.d) << ',' << s.regime.label
          << ',' << optimizer;
      for (const auto& c : columns) out << ',' << csv_hyper_cell(rec.config, c);
      out << ',' << loss_cell(rec.final_loss) << ',' << (rec.failed ? "failed" : "ok") << '\n';
    }
  }
}

void write_sweep_summary_json(const std::vector<RegimeSweepResult>& sweeps, const SweepJob& job,
                              const std::filesystem::path& path) {
  json doc;
  doc["optimizer"] = job.optimizer;
  doc["delta1"] = job.sweep.delta1;
  doc["delta2"] = job.sweep.delta2;
  json regimes = json::array();

  std::vector<std::vector<HyperConfig>> sets;
  for (const auto& s : sweeps) {
    json r;
    r["label"] = s.regime.label;
    r["n"] = s.regime.n;
    r["d"] = s.regime.d;
    r["passes"] = s.sweep.passes;
    r["evaluations"] = s.sweep.ledger.size();
    r["best_loss"] = s.sweep.best_loss;
    json best;
    for (const auto& [k, v] : s.sweep.best) best[k] = hyper_to_string(v);
    r["best"] = best;
    const auto near = near_optimal_set(s.sweep.ledger, job.sweep.delta2);
    sets.push_back(near);
    r["near_optimal_count"] = near.size();
    regimes.push_back(std::move(r));
  }
  doc["regimes"] = std::move(regimes);

  if (sets.size() >= 2) {
    json sens;
    for (const auto& [name, _] : job.grid.values) {
      const auto cls = classify_scaling_sensitivity(sets, name);
      json entry;
      entry["sensitive"] = cls.sensitive;
      if (cls.witness) entry["witness"] = hyper_to_string(*cls.witness);
      sens[name] = std::move(entry);
    }
    doc["scaling_sensitivity"] = std::move(sens);
  }

  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Records / fit / speedup IO

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

int column_index(const std::vector<std::string>& header, const std::string& name) {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double parse_loss(const std::string& cell) {
  if (cell == "inf" || cell.empty()) return std::numeric_limits<double>::infinity();
  return std::stod(cell);
}

}  // namespace

std::vector<RecordRow> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open records file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("records file is empty: " + path.string());
  const auto header = split_csv_line(line);
  const int c_regime = column_index(header, "regime");
  const int c_n = column_index(header, "regime_n");
  const int c_d = column_index(header, "regime_d");
  const int c_opt = column_index(header, "optimizer");
  const int c_loss = column_index(header, "final_loss");
  const int c_status = column_index(header, "status");
  if (c_n < 0 || c_d < 0 || c_opt < 0 || c_loss < 0) {
    throw ConfigError("records file " + path.string() +
                      " needs columns regime_n, regime_d, optimizer, final_loss");
  }
  std::vector<RecordRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    RecordRow row;
    if (c_regime >= 0) row.regime_label = cells[static_cast<size_t>(c_regime)];
    row.n = std::stod(cells[static_cast<size_t>(c_n)]);
    row.d = std::stod(cells[static_cast<size_t>(c_d)]);
    row.optimizer = cells[static_cast<size_t>(c_opt)];
    row.final_loss = parse_loss(cells[static_cast<size_t>(c_loss)]);
    row.status = c_status >= 0 ? cells[static_cast<size_t>(c_status)] : "ok";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FitPoint> read_fit_points_csv(const std::filesystem::path& path, ModelForm form,
                                          const std::string& optimizer_filter) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fit input " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("fit input is empty: " + path.string());
  const auto header = split_csv_line(line);

  const int c_y = column_index(header, "y");
  std::vector<FitPoint> points;
  if (c_y >= 0) {
    const int c_n = column_index(header, "n");
    const int c_d = column_index(header, "d");
    if (c_d < 0) throw ConfigError("fit input needs a 'd' column");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      FitPoint pt;
      if (c_n >= 0 && !cells[static_cast<size_t>(c_n)].empty()) {
        pt.n = std::stod(cells[static_cast<size_t>(c_n)]);
      }
      pt.d = std::stod(cells[static_cast<size_t>(c_d)]);
      pt.y = std::stod(cells[static_cast<size_t>(c_y)]);
      points.push_back(pt);
    }
    return points;
  }

  // results.csv layout: regime_n/regime_d/final_loss with an optimizer filter.
  in.clear();
  in.seekg(0);
  for (const auto& row : read_records_csv(path)) {
    if (!optimizer_filter.empty() && row.optimizer != optimizer_filter) continue;
    if (row.status != "ok" || !std::isfinite(row.final_loss)) continue;
    FitPoint pt;
    pt.n = row.n;
    pt.d = row.d;
    pt.y = row.final_loss;
    points.push_back(pt);
  }
  if (form == ModelForm::kLD) {
    // N plays no role in the LD form.
    for (auto& pt : points) pt.n.reset();
  }
  return points;
}

void write_fits_json(const std::vector<FitCoeffs>& fits, const std::vector<std::string>& labels,
                     const std::filesystem::path& path) {
  json arr = json::array();
  for (size_t i = 0; i < fits.size(); ++i) {
    const FitCoeffs& f = fits[i];
    json coeffs;
    coeffs["alpha"] = f.alpha;
    if (f.form != ModelForm::kLD) coeffs["A"] = f.a_exp;
    coeffs["beta"] = f.beta;
    coeffs["B"] = f.b_exp;
    if (f.form == ModelForm::kLND) coeffs["gamma"] = f.gamma;
    json entry;
    entry["form"] = form_name(f.form);
    entry["coeffs"] = std::move(coeffs);
    entry["rms"] = f.rms;
    entry["n_points"] = f.n_points;
    if (i < labels.size() && !labels[i].empty()) entry["label"] = labels[i];
    arr.push_back(std::move(entry));
  }
  auto out = open_out(path);
  out << (arr.size() == 1 ? arr[0] : json{{"fits", arr}}).dump(2) << '\n';
}

SpeedupTable compute_speedups(const std::vector<RecordRow>& records, const std::string& baseline) {
  SpeedupTable table;

  // Group by the regime's N (exact string key; values round-trip through CSV).
  std::map<std::string, double> group_n;
  std::map<std::string, std::vector<const RecordRow*>> groups;
  for (const auto& row : records) {
    const std::string key = fmt_double(row.n);
    group_n[key] = row.n;
    groups[key].push_back(&row);
  }

  for (const auto& [key, rows] : groups) {
    std::vector<FitPoint> base_points;
    std::set<std::string> distinct_d;
    for (const auto* row : rows) {
      if (row->optimizer == baseline && row->status == "ok" && std::isfinite(row->final_loss)) {
        base_points.push_back(FitPoint{std::nullopt, row->d, row->final_loss});
        distinct_d.insert(fmt_double(row->d));
      }
    }
    if (distinct_d.size() < 3) {
      table.warnings.push_back("no usable " + baseline + " baseline for regime group n=" + key +
                               " (need >= 3 data budgets); speedup omitted");
      continue;
    }
    FitCoeffs fit;
    try {
      fit = fit_nlls(ModelForm::kLD, base_points);
    } catch (const std::exception& e) {
      table.warnings.push_back("baseline fit failed for regime group n=" + key + ": " + e.what());
      continue;
    }
    table.baseline_fits.push_back(fit);
    table.baseline_labels.push_back("n=" + key);

    for (const auto* row : rows) {
      if (row->status != "ok" || !std::isfinite(row->final_loss)) continue;
      SpeedupRow s;
      s.optimizer = row->optimizer;
      s.regime_label = row->regime_label;
      if (row->optimizer == baseline) {
        s.ratio = 1.0;
      } else {
        try {
          s.ratio = speedup_ratio(fit, row->final_loss, row->d);
        } catch (const FitError& e) {
          table.warnings.push_back(row->optimizer + " at " + row->regime_label + ": " + e.what());
          continue;
        }
      }
      table.rows.push_back(std::move(s));
    }
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const SpeedupRow& a, const SpeedupRow& b) {
                     return std::tie(a.optimizer, a.regime_label) <
                            std::tie(b.optimizer, b.regime_label);
                   });
  return table;
}

void write_speedup_csv(const SpeedupTable& table, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "optimizer,regime,ratio\n";
  for (const auto& row : table.rows) {
    out << row.optimizer << ',' << row.regime_label << ',' << fmt_double(row.ratio) << '\n';
  }
}

void emit_report(const std::filesystem::path& dir, const std::string& baseline) {
  const auto records = read_records_csv(dir / "results.csv");
  const SpeedupTable table = compute_speedups(records, baseline);

  write_fits_json(table.baseline_fits, table.baseline_labels, dir / "fits.json");
  write_speedup_csv(table, dir / "speedup.csv");

  auto out = open_out(dir / "report.txt");
  out << "optbench report\n===============\n\n";
  out << "results (" << records.size() << " trials, baseline " << baseline << ")\n";
  char buf[64];
  for (const auto& row : records) {
    if (std::isfinite(row.final_loss)) {
      std::snprintf(buf, sizeof(buf), "%.6f", row.final_loss);
    } else {
      std::snprintf(buf, sizeof(buf), "diverged");
    }
    out << "  " << row.regime_label << "  " << row.optimizer << "  loss=" << buf << "  ["
        << row.status << "]\n";
  }
  out << "\nbaseline data-scaling fits\n";
  for (size_t i = 0; i < table.baseline_fits.size(); ++i) {
    const auto& f = table.baseline_fits[i];
    out << "  " << table.baseline_labels[i] << ": L(D) = " << fmt_double(f.alpha) << " * D^-"
        << fmt_double(f.b_exp) << " + " << fmt_double(f.beta) << "  (rms " << fmt_double(f.rms)
        << ", " << f.n_points << " points)\n";
  }
  out << "\nspeedup ratios (D_" << baseline << " / D_optimizer)\n";
  for (const auto& row : table.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.ratio);
    out << "  " << row.optimizer << "  " << row.regime_label << "  " << buf << '\n';
  }
  if (!table.warnings.empty()) {
    out << "\nwarnings\n";
    for (const auto& w : table.warnings) out << "  WARNING: " << w << '\n';
  }
}

}  // namespace optbench

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "optbench/errors.hpp"
#include "optbench/harness.hpp"

namespace fs = std::filesystem;
using namespace optbench;

namespace {

ParsedConfig load_config(const std::string& path, std::optional<uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!seed_override) return parse_config_text(buf.str());
  auto doc = nlohmann::json::parse(buf.str());
  doc["seed"] = *seed_override;
  return parse_config_text(doc.dump());
}

int cmd_run(const std::string& config_path, std::optional<uint64_t> seed,
            std::optional<std::string> out_dir) {
  const ParsedConfig cfg = load_config(config_path, seed);
  if (cfg.trials.empty()) throw ConfigError("config has no run.trials");
  const fs::path out = out_dir.value_or(cfg.out_dir);
  const int threads = thread_count_from_env();

  const auto results = run_trials(cfg.trials, threads);
  write_results_csv(results, out / "results.csv");
  write_curves(results, out / "curves");
  write_timings_csv(results, out / "timings.csv");

  int diverged = 0;
  for (const auto& r : results) diverged += r.diverged ? 1 : 0;
  std::cout << "ran " << results.size() << " trials (" << threads << " threads), " << diverged
            << " diverged; results in " << (out / "results.csv").string() << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, std::optional<uint64_t> seed,
              std::optional<std::string> out_dir) {
  const ParsedConfig cfg = load_config(config_path, seed);
  if (!cfg.sweep) throw ConfigError("config has no sweep section");
  const fs::path out = out_dir.value_or(cfg.out_dir);
  const int threads = thread_count_from_env();

  const auto sweeps = run_sweep_job(*cfg.sweep, threads);
  write_sweep_ledger_csv(sweeps, cfg.sweep->optimizer, out / "ledger.csv");
  write_sweep_summary_json(sweeps, *cfg.sweep, out / "sweep_summary.json");

  for (const auto& s : sweeps) {
    std::cout << s.regime.label << ": best_loss=" << s.sweep.best_loss << " after "
              << s.sweep.ledger.size() << " evaluations, " << s.sweep.passes << " passes\n";
  }
  std::cout << "ledger in " << (out / "ledger.csv").string() << "\n";
  return 0;
}

int run_fit_job(const FitJob& job) {
  const auto points = read_fit_points_csv(job.records, job.form, job.optimizer_filter);
  const FitCoeffs fit = fit_nlls(job.form, points);
  write_fits_json({fit}, {job.optimizer_filter}, job.out);
  std::cout << "fit " << form_name(job.form) << " on " << fit.n_points
            << " points: rms=" << fit.rms << " -> " << job.out << "\n";
  return 0;
}

bool is_json_path(const std::string& path) {
  return path.size() > 5 && path.substr(path.size() - 5) == ".json";
}

int cmd_fit(const std::string& records_path, const std::string& form_name_str,
            const std::string& optimizer, const std::string& out_file) {
  if (is_json_path(records_path)) {
    const ParsedConfig cfg = load_config(records_path, std::nullopt);
    if (!cfg.fit) throw ConfigError("config has no fit section");
    return run_fit_job(*cfg.fit);
  }
  FitJob job;
  job.records = records_path;
  job.form = form_from_name(form_name_str);
  job.optimizer_filter = optimizer;
  job.out = out_file;
  return run_fit_job(job);
}

int cmd_speedup(const std::string& records_path, const std::string& baseline,
                const std::string& out_file) {
  const auto records = read_records_csv(records_path);
  const SpeedupTable table = compute_speedups(records, baseline);
  write_speedup_csv(table, out_file);
  for (const auto& w : table.warnings) std::cerr << "WARNING: " << w << "\n";
  std::cout << table.rows.size() << " speedup rows -> " << out_file << "\n";
  return 0;
}

int cmd_report(const std::string& dir, const std::string& baseline) {
  if (is_json_path(dir)) {
    const ParsedConfig cfg = load_config(dir, std::nullopt);
    if (!cfg.report) throw ConfigError("config has no report section");
    emit_report(cfg.report->dir, cfg.report->baseline);
    std::cout << "report written to " << (fs::path(cfg.report->dir) / "report.txt").string()
              << "\n";
    return 0;
  }
  emit_report(dir, baseline);
  std::cout << "report written to " << (fs::path(dir) / "report.txt").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optbench: desk-scale optimizer benchmark laboratory"};
  app.require_subcommand(1);

  std::string config_path, records_path, dir;
  std::string form = "ld", baseline = "adamw", optimizer, out_file;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;

  auto* run = app.add_subcommand("run", "run the trials in a config");
  run->add_option("config", config_path, "JSON config")->required();
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "coordinate-descent hyperparameter sweep");
  sweep->add_option("config", config_path, "JSON config")->required();
  sweep->add_option("--seed", seed, "master seed override");
  sweep->add_option("--out", out_dir, "output directory");

  auto* fit = app.add_subcommand("fit", "fit a power law to recorded losses");
  fit->add_option("records", records_path, "records CSV (results.csv or n,d,y), or a config.json")
      ->required();
  fit->add_option("--form", form, "ld | hyper | lnd")->default_val("ld");
  fit->add_option("--optimizer", optimizer, "restrict to one optimizer's rows");
  fit->add_option("--out", out_file, "output JSON path")->default_val("fits.json");

  auto* speedup = app.add_subcommand("speedup", "estimated speedup ratios vs a baseline");
  speedup->add_option("records", records_path, "records CSV")->required();
  speedup->add_option("--baseline", baseline, "baseline optimizer")->default_val("adamw");
  speedup->add_option("--out", out_file, "output CSV path")->default_val("speedup.csv");

  auto* report = app.add_subcommand("report", "fits + speedups + human summary for a run dir");
  report->add_option("dir", dir, "directory containing results.csv, or a config.json")
      ->required();
  report->add_option("--baseline", baseline, "baseline optimizer")->default_val("adamw");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seed, out_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, seed, out_dir);
    if (fit->parsed()) return cmd_fit(records_path, form, optimizer, out_file);
    if (speedup->parsed()) return cmd_speedup(records_path, baseline, out_file);
    if (report->parsed()) return cmd_report(dir, baseline);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

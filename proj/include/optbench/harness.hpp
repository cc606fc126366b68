#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "optbench/fitlaw.hpp"
#include "optbench/hyper.hpp"
#include "optbench/problems.hpp"
#include "optbench/sweep.hpp"

namespace optbench {

struct TrialConfig {
  std::string name;  // empty -> "<optimizer>-<hash>"
  Regime regime;     // label may be empty for standalone runs
  ProblemSpec problem;
  std::string optimizer;
  HyperConfig hypers;
  int64_t steps = 0;  // 0 -> derived as regime.d / batch
  int64_t batch = 0;  // 0 -> problem.batch; hypers["batch"] overrides both
  int64_t eval_interval = 100;
  uint64_t seed = 0;

  int64_t resolved_batch() const;  // hypers["batch"] overrides problem.batch
  int64_t resolved_steps() const;
  void validate() const;
  uint64_t hash() const;
};

struct CurveRow {
  int64_t step = 0;
  int64_t samples = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct RunResult {
  TrialConfig config;
  HyperConfig hypers_full;  // with schema defaults applied
  double final_loss = 0.0;  // +inf when diverged
  bool diverged = false;
  std::vector<CurveRow> curve;
  double wall_seconds = 0.0;
  double steps_per_sec = 0.0;

  std::string status() const { return diverged ? "diverged" : "ok"; }
  std::string trial_label() const;
  TrialRecord to_record() const;
};

// Deterministic training loop: batch at step t is derived from (seed, t); a
// non-finite or >10x-initial loss stops the run early with the divergence
// flag set and the partial curve retained.
RunResult run_trial(const TrialConfig& cfg);

// Embarrassingly parallel execution; output order is (regime, optimizer,
// config hash) regardless of the worker count.
std::vector<RunResult> run_trials(const std::vector<TrialConfig>& trials, int threads);

// OPTBENCH_THREADS, falling back to the hardware count.
int thread_count_from_env();

struct SweepJob {
  ProblemSpec problem;
  std::string optimizer;
  Grid grid;
  HyperConfig start;
  SweepConfig sweep;
  std::vector<Regime> regimes;
  int64_t eval_interval = 100;
  int64_t steps_override = 0;  // 0 -> steps from regime.d / batch
  uint64_t seed = 0;
};

struct RegimeSweepResult {
  Regime regime;
  SweepResult sweep;
};

struct FitJob {
  std::string records;  // CSV path: results.csv layout or (n,)d,y columns
  ModelForm form = ModelForm::kLD;
  std::string optimizer_filter;
  std::string out = "fits.json";
};

struct ReportJob {
  std::string dir;
  std::string baseline = "adamw";
};

struct ParsedConfig {
  uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<TrialConfig> trials;   // "run" section
  std::optional<SweepJob> sweep;     // "sweep" section
  std::optional<FitJob> fit;         // "fit" section
  std::optional<ReportJob> report;   // "report" section
};

// Strict parse of the single-document JSON config: unknown keys, unknown
// optimizers and out-of-schema hyperparameters are rejected by name.
ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::filesystem::path& path);

// Sweep driver: coordinate descent per regime with a memoized run_trial
// evaluator (failures score +inf).
std::vector<RegimeSweepResult> run_sweep_job(const SweepJob& job, int threads);

// ---------------------------------------------------------------------------
// Emission. All canonical outputs are byte-deterministic; measured timings go
// to timings.csv which is outside the determinism contract.

void write_results_csv(const std::vector<RunResult>& results, const std::filesystem::path& path);
void write_curves(const std::vector<RunResult>& results, const std::filesystem::path& dir);
void write_timings_csv(const std::vector<RunResult>& results, const std::filesystem::path& path);
void write_sweep_ledger_csv(const std::vector<RegimeSweepResult>& sweeps,
                            const std::string& optimizer, const std::filesystem::path& path);
void write_sweep_summary_json(const std::vector<RegimeSweepResult>& sweeps, const SweepJob& job,
                              const std::filesystem::path& path);

// A record row as consumed by fit/speedup/report.
struct RecordRow {
  std::string regime_label;
  double n = 0.0;
  double d = 0.0;
  std::string optimizer;
  double final_loss = 0.0;
  std::string status;
};

std::vector<RecordRow> read_records_csv(const std::filesystem::path& path);
// Generic fit input: columns (n,)d,y, or a records CSV (rows with status!=ok
// are dropped and final_loss is y).
std::vector<FitPoint> read_fit_points_csv(const std::filesystem::path& path, ModelForm form,
                                          const std::string& optimizer_filter);

void write_fits_json(const std::vector<FitCoeffs>& fits, const std::vector<std::string>& labels,
                     const std::filesystem::path& path);

struct SpeedupRow {
  std::string optimizer;
  std::string regime_label;
  double ratio = 0.0;
};

struct SpeedupTable {
  std::vector<SpeedupRow> rows;
  std::vector<std::string> warnings;          // regimes lacking a usable baseline
  std::vector<FitCoeffs> baseline_fits;       // one LD fit per regime N group
  std::vector<std::string> baseline_labels;   // matching labels ("n=...")
};

// Fits the baseline's LD law per regime-N group (needs >= 3 distinct D) and
// solves every finite row against it; baseline rows get ratio 1 by identity.
SpeedupTable compute_speedups(const std::vector<RecordRow>& records, const std::string& baseline);

void write_speedup_csv(const SpeedupTable& table, const std::filesystem::path& path);

// Human summary (losses rounded to 6 places) plus fits.json and speedup.csv
// next to an existing results.csv.
void emit_report(const std::filesystem::path& dir, const std::string& baseline);

}  // namespace optbench

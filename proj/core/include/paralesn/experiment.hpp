#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "paralesn/config.hpp"
#include "paralesn/scan.hpp"
#include "paralesn/tasks.hpp"

namespace paralesn {

// ----------------------------------------------------------------------- run

struct MetricSpec {
  std::string name;
  bool higher_is_better = false;
};

/// "auto" resolves to memory_capacity for memcap and nrmse otherwise.
MetricSpec resolve_metric(const TaskSpec& task);
double evaluate_metric(const std::string& name, const RealMatrix& pred, const RealMatrix& target);

/// Dataset for a task spec. Random tasks draw from a seed derived from
/// `seed`, so data never shares a stream with model sampling.
tasks::TaskDataset make_dataset(const TaskSpec& task, std::uint64_t seed);

struct ModelFeatures {
  RealMatrix features;  // T x F, real
  std::size_t parameter_count = 0;
  double seconds = 0.0;
};

/// Samples the reservoir for repeat `repeat` and runs it over the whole
/// input sequence.
ModelFeatures compute_features(const ExperimentConfig& config, const tasks::TaskDataset& data,
                               std::size_t repeat, int workers);

struct LambdaScore {
  double lambda = 0.0;
  double valid_metric = 0.0;
};

struct RepeatResult {
  std::size_t repeat = 0;
  double valid_metric = 0.0;
  std::optional<double> test_metric;
  double selected_lambda = 0.0;  // ridge only
  std::vector<LambdaScore> lambda_table;
  std::size_t reservoir_parameters = 0;
  std::size_t readout_parameters = 0;
  double recurrence_seconds = 0.0;
  double readout_seconds = 0.0;  // standardization + fit + selection
  double total_seconds = 0.0;
};

/// Forward, standardize on training rows, fit the readout, select on
/// validation and (if score_test) report the test metric. Test targets are
/// read only after selection.
RepeatResult evaluate_repeat(const ExperimentConfig& config, const tasks::TaskDataset& data,
                             std::size_t repeat, bool score_test, int workers);

struct RunResult {
  std::string task;
  std::string model;
  std::string metric;
  bool higher_is_better = false;
  std::vector<RepeatResult> repeats;
  double mean = 0.0;
  double std = 0.0;  // sample std over repeats, 0 for one repeat
  std::size_t parameter_count = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string mode;
  std::string rng_algorithm;
  std::string version;
  nlohmann::json config;

  /// Recomputes mean and std from the per-repeat test metrics.
  void summarize();
  std::string summary_line() const;
};

nlohmann::json to_json(const RunResult& result);
RunResult run_result_from_json(const nlohmann::json& j);

/// Validates the config, then evaluates every repeat. A dataset can be
/// passed in to skip generation.
RunResult cmd_run(const ExperimentConfig& config, const tasks::TaskDataset* data = nullptr);

/// run.json (full record) and run.csv (one row per repeat) under `dir`.
void write_run(const RunResult& result, const std::filesystem::path& dir);
RunResult read_run(const std::filesystem::path& json_path);

// --------------------------------------------------------------------- sweep

using Assignment = std::vector<std::pair<std::string, double>>;

/// Points of the sweep in evaluation order. Grid: Cartesian product. Random:
/// `budget` distinct draws from the product. One-at-a-time: the base point
/// followed by each parameter varied alone.
std::vector<Assignment> enumerate_sweep(const ExperimentConfig& config);

struct SweepPoint {
  std::size_t index = 0;
  Assignment assignment;
  bool ok = false;
  std::string status;        // "ok" or the rejection reason
  double valid_metric = 0.0; // mean over repeats
  double selected_lambda = 0.0;
  std::vector<LambdaScore> lambda_table;  // first repeat
  std::string config_hash;
};

struct SweepResult {
  std::string metric;
  bool higher_is_better = false;
  std::vector<SweepPoint> points;  // evaluation order
  std::vector<std::size_t> ranking;  // indices into points, best first
  std::size_t test_reads_during_selection = 0;
  ExperimentConfig best_config;
  RunResult best_run;
};

/// Evaluates every point on the validation split (points run on an OpenMP
/// pool of config.workers threads), then runs the winner on the test split.
SweepResult cmd_sweep(const ExperimentConfig& config);

/// sweep.csv (ranked table), sweep.json and the best run's files.
void write_sweep(const SweepResult& result, const std::filesystem::path& dir);

// ---------------------------------------------------------------- bench-scan

struct BenchScanConfig {
  std::vector<std::size_t> lengths{1024, 65536};
  std::vector<std::size_t> widths{128};
  int workers = 0;  // parallel mode; 0: all available
  std::size_t samples = 5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t length = 0;
  std::size_t width = 0;
  std::string mode;
  int workers = 1;
  double median_seconds = 0.0;
  std::vector<double> samples;
};

struct SpeedupRow {
  std::size_t length = 0;
  std::size_t width = 0;
  double sequential_seconds = 0.0;
  double parallel_seconds = 0.0;
  double ratio = 0.0;  // parallel / sequential
};

struct ParamAuditRow {
  std::size_t n_h = 0;
  std::size_t n_in = 0;
  std::size_t k = 0;
  std::size_t paralesn_stored = 0;
  std::size_t paralesn_formula = 0;  // 2 N_h + N_h N_in + k + 1
  std::size_t esn_stored = 0;
  std::size_t esn_formula = 0;       // N_h^2 + N_h N_in + N_h
  double ratio = 0.0;                // paralesn / esn
};

struct MachineInfo {
  unsigned hardware_threads = 0;
  int omp_max_threads = 0;
  std::string cpu_model;
  std::string compiler;
};

struct BenchScanResult {
  MachineInfo machine;
  std::vector<BenchRow> rows;
  std::vector<SpeedupRow> speedups;
  std::vector<ParamAuditRow> audit;
  /// Sequential median at the longest length over the shortest, per width.
  std::vector<std::pair<std::size_t, double>> sequential_growth;
};

MachineInfo describe_machine();
/// Samples both models and compares stored counts with the closed forms.
std::vector<ParamAuditRow> parameter_audit(const std::vector<std::size_t>& widths, std::size_t n_in,
                                           std::size_t k);
/// Median wall time of one layer's recurrence (input projection + scan).
BenchScanResult cmd_bench_scan(const BenchScanConfig& config);
nlohmann::json to_json(const BenchScanResult& result);
void write_bench(const BenchScanResult& result, const std::filesystem::path& dir);

// -------------------------------------------------------------------- verify

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

using CombineFn = std::function<AffineElement(const AffineElement&, const AffineElement&)>;

/// Folds random affine sequences with `combine` (sequential fold and a
/// pairwise tree) and checks both against the direct recurrence, plus
/// associativity on random triples.
CheckResult verify_scan_combine(const CombineFn& combine, std::uint64_t seed);

/// Contraction check on a layer; passes when the observed behaviour matches
/// the layer's spectral radius (contraction below 1, divergence above).
CheckResult verify_esp(const ParalEsnLayer& layer, std::uint64_t seed);

/// Norm-wise relative difference between the analytic gradient and central
/// finite differences with step h.
double mlp_gradient_error(const MlpReadout& mlp, const RealMatrix& features,
                          const RealMatrix& targets, double h = 1e-6);

/// Scan oracle, parallel/sequential agreement, ESP on a contracting layer,
/// the 1.05 divergence control, diagonal equivalence, MLP gradients, ridge
/// recovery and generator fixed points.
VerifyReport cmd_verify(std::uint64_t seed);

// ------------------------------------------------------------------ generate

/// Writes <dir>/<name>.csv (inputs then targets) and <dir>/<name>.json with
/// split boundaries, washout and generator provenance. Returns the CSV path.
std::filesystem::path cmd_generate(const TaskSpec& task, std::uint64_t seed,
                                   const std::filesystem::path& dir);

}  // namespace paralesn

#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "paralesn/rng.hpp"
#include "paralesn/tensor.hpp"

namespace paralesn::tasks {

enum class SplitPart { kTrain = 0, kValid = 1, kTest = 2 };

/// Time indices: train [0, train_end), validation [train_end, valid_end),
/// test [valid_end, test_end).
struct Split {
  std::size_t train_end = 0;
  std::size_t valid_end = 0;
  std::size_t test_end = 0;
};

/// Counts target reads per split so model selection can be audited for
/// test-set leakage.
class SplitAccessLog {
 public:
  void record(SplitPart part) noexcept { counts_[static_cast<int>(part)].fetch_add(1); }
  std::size_t count(SplitPart part) const noexcept { return counts_[static_cast<int>(part)].load(); }
  void reset() noexcept {
    for (auto& c : counts_) c.store(0);
  }

 private:
  std::array<std::atomic<std::size_t>, 3> counts_{};
};

struct TaskDataset {
  std::string name;
  RealMatrix inputs;   // T x N_in
  RealMatrix targets;  // T x N_out
  Split split;
  std::size_t washout = 100;
  /// Rows before this index have undefined targets in at least one column
  /// (delayed-copy tasks); they never enter readout fitting.
  std::size_t target_valid_from = 0;
  /// Generator settings and seed, recorded for provenance.
  std::map<std::string, std::string> provenance;
  std::shared_ptr<SplitAccessLog> access = std::make_shared<SplitAccessLog>();

  std::size_t length() const noexcept { return inputs.rows(); }
  /// First training row used for fitting: max(washout, target_valid_from).
  std::size_t fit_begin() const noexcept;
  /// Row range [begin, end) of a split (training starts at fit_begin()).
  std::pair<std::size_t, std::size_t> range(SplitPart part) const;
  /// Target rows of a split; every call is recorded in the access log.
  RealMatrix split_targets(SplitPart part) const;

  /// Throws ConfigError if splits, washout or shapes are inconsistent.
  void validate() const;
};

// ------------------------------------------------------------------ generators

struct MemCapConfig {
  std::size_t length = 7000;
  std::size_t max_delay = 200;
  double low = -0.8;
  double high = 0.8;
  std::size_t washout = 100;
};

/// Input uniform on [low, high]; target column k-1 is the input delayed by k.
TaskDataset gen_memcap(const MemCapConfig& config, RngStream& rng);

/// y(t) = r^2 sign(r), r = x(t-d-1) x(t-d), x uniform on (-0.8, 0.8).
TaskDataset gen_ctxor(std::size_t delay, std::size_t length, RngStream& rng,
                      std::size_t washout = 100);

/// y(t) = sin(pi x(t-d)), x uniform on (-0.8, 0.8).
TaskDataset gen_sinmem(std::size_t delay, std::size_t length, RngStream& rng,
                       std::size_t washout = 100);

struct NarmaConfig {
  std::size_t order = 10;
  std::size_t length = 10000;
  std::size_t washout = 100;
  double divergence_bound = 10.0;
  int max_attempts = 10;
};

/// NARMA series for a given input: y(t) = 0.3 y(t-1) + 0.01 y(t-1) sum_{i=1..d} y(t-i)
/// + 1.5 x(t-d) x(t-1) + 0.1 with zero history. Index 0 of the spans is t = 1.
RealVector narma_series(std::span<const double> inputs, std::size_t order);

/// Inputs uniform on [0, 0.5]. A diverging draw (|y| above the bound) is
/// regenerated from the next stream id, up to max_attempts times.
TaskDataset gen_narma(const NarmaConfig& config, RngSpec spec);

struct MackeyGlassConfig {
  std::size_t length = 10000;
  std::size_t horizon = 1;
  double beta = 0.2;
  double gamma = 0.1;
  double exponent = 10.0;
  double delay = 17.0;
  double dt = 0.1;
  std::size_t subsample = 10;
  double history = 1.2;
  std::size_t transient = 1000;
  std::size_t washout = 100;
};

/// Samples of dx/dt = beta x(t-delay) / (1 + x(t-delay)^n) - gamma x(t),
/// integrated with fixed-step RK4 on a constant history. Delayed values at
/// half steps are the mean of the two neighbouring grid points. Returns
/// `count` samples taken every `subsample` steps after `transient` samples.
RealVector mackey_glass_series(const MackeyGlassConfig& config, std::size_t count);

TaskDataset gen_mackey_glass(const MackeyGlassConfig& config);

struct Lorenz96Config {
  std::size_t length = 1200;
  std::size_t horizon = 25;
  std::size_t dims = 5;
  double forcing = 8.0;
  double dt = 0.05;
  std::size_t transient = 500;
  std::size_t washout = 100;
};

/// dx_i/dt = x_{i-1} (x_{i+1} - x_{i-2}) - x_i + F with cyclic indices.
RealVector lorenz96_derivative(std::span<const double> state, double forcing);
RealVector lorenz96_rk4_step(std::span<const double> state, double dt, double forcing);

/// Trajectory from (F + 0.008, F, ..., F); one row per integration step.
RealMatrix lorenz96_trajectory(const Lorenz96Config& config, std::size_t count);

/// Inputs x(t), targets x(t + horizon); split 1/3 each.
TaskDataset gen_lorenz96(const Lorenz96Config& config);

// -------------------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  RealMatrix values;
};

/// Numeric CSV with a header row. Throws ParseError naming the row and column
/// of the first malformed cell.
CsvTable read_numeric_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, std::span<const std::string> header,
               const RealMatrix& values);

struct CsvForecastConfig {
  std::size_t delay = 192;
  double train_fraction = 0.6;
  double valid_fraction = 0.2;
  double clip = 10.0;
  std::size_t washout = 100;
};

/// Forecast every feature `delay` steps ahead. Features are standardized with
/// training-row statistics; only the training rows are clipped to
/// [-clip, clip]. Input t is row t, target t is row t + delay.
TaskDataset load_csv_forecasting(const std::filesystem::path& path,
                                 const CsvForecastConfig& config = {});
TaskDataset csv_forecasting_from_table(const CsvTable& table, const CsvForecastConfig& config);

}  // namespace paralesn::tasks

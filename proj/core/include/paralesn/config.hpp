#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "paralesn/baselines.hpp"
#include "paralesn/readout.hpp"
#include "paralesn/reservoir.hpp"

namespace paralesn {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class ModelKind { kParalEsn, kEsn, kScr };
enum class ReadoutKind { kRidge, kMlp };
enum class SweepStrategy { kGrid, kRandom, kOneAtATime };

struct TaskSpec {
  std::string name = "memcap";  // memcap ctxor sinmem narma mackey_glass lorenz96 csv
  std::size_t length = 0;       // 0: task default
  std::size_t delay = 0;        // memcap K, ctxor/sinmem d, csv horizon; 0: task default
  std::size_t order = 10;       // narma
  std::size_t horizon = 0;      // mackey_glass / lorenz96; 0: task default
  std::size_t washout = 100;
  std::string path;             // csv
  double train_fraction = 0.6;
  double valid_fraction = 0.2;
  double clip = 10.0;
  std::string metric = "auto";  // auto nrmse mse memory_capacity
};

struct ModelSpec {
  ModelKind kind = ModelKind::kParalEsn;
  std::size_t units = 128;
  std::size_t layers = 1;
  bool concat = false;
  LayerHyperparams layer;
  LayerHyperparams inter;
  EsnHyperparams esn_layer;
  EsnHyperparams esn_inter;

  DeepHyperparams paralesn_hyperparams() const;
  DeepBaselineHyperparams baseline_hyperparams() const;
};

struct ReadoutSpec {
  ReadoutKind kind = ReadoutKind::kRidge;
  std::vector<double> lambdas{0.0, 0.01, 0.1, 1.0, 10.0, 100.0};
  MlpConfig mlp;
};

struct SweepSpec {
  SweepStrategy strategy = SweepStrategy::kGrid;
  std::size_t budget = 0;  // random strategy only
  /// Parameter key (see apply_param) to candidate values, in file order.
  std::vector<std::pair<std::string, std::vector<double>>> params;
};

struct ExperimentConfig {
  TaskSpec task;
  ModelSpec model;
  ReadoutSpec readout;
  SweepSpec sweep;
  std::uint64_t seed = 0;
  ScanMode mode = ScanMode::kSequential;
  int workers = 0;
  std::size_t repeats = 1;
  bool allow_unlisted = false;

  /// Domain checks, then membership of every tuned value in the published
  /// search grid unless allow_unlisted. Throws ConfigError.
  void validate() const;
};

/// Sets one tunable value. Keys: units, layers, concat, and layer.<name> or
/// inter.<name> with name in rho_min rho_max theta_min theta_max tau omega_b
/// omega_mix omega_mixb k (ParalESN) or rho omega_in omega_b tau (ESN/SCR).
/// Throws ConfigError on an unknown key.
void apply_param(ExperimentConfig& config, const std::string& key, double value);

/// Published value grid of a key; empty when the key has none.
std::vector<double> listed_values(const ExperimentConfig& config, const std::string& key);

/// Scalars accept plain numbers and multiples of pi ("pi", "pi/2", "2pi").
double parse_number(const std::string& text);

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text);

nlohmann::json to_json(const ExperimentConfig& config);
/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

std::string to_string(ModelKind kind);
std::string to_string(ScanMode mode);

}  // namespace paralesn

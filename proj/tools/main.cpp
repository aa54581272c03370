// paralesn command-line harness.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "paralesn/config.hpp"
#include "paralesn/error.hpp"
#include "paralesn/experiment.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kVerifyFailed = 2, kRuntime = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<int> workers;
  std::string out = "results";
  std::optional<std::size_t> repeats;
  bool allow_unlisted = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment config (YAML)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--mode", c.mode, "Scan mode")->check(CLI::IsMember({"sequential", "parallel"}));
  cmd->add_option("--workers", c.workers, "Worker threads (0: all)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--repeats", c.repeats, "Override the repeat count")->check(CLI::PositiveNumber);
  cmd->add_flag("--allow-unlisted", c.allow_unlisted, "Accept values outside the published grids");
}

paralesn::ExperimentConfig resolve(const Common& c) {
  paralesn::ExperimentConfig cfg = paralesn::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.mode.empty()) cfg.mode = c.mode == "parallel" ? paralesn::ScanMode::kParallel : paralesn::ScanMode::kSequential;
  if (c.workers) cfg.workers = *c.workers;
  if (c.repeats) cfg.repeats = *c.repeats;
  if (c.allow_unlisted) cfg.allow_unlisted = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ParalESN reservoir computing harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", paralesn::kLibraryVersion);

  Common run_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "Train and evaluate one configuration");
  add_common(run, run_opts, true);

  auto* sweep = app.add_subcommand("sweep", "Hyperparameter sweep selected on validation");
  add_common(sweep, sweep_opts, true);

  paralesn::BenchScanConfig bench_cfg;
  std::string bench_out = "results";
  auto* bench = app.add_subcommand("bench-scan", "Time sequential and parallel scans");
  bench->add_option("--lengths", bench_cfg.lengths, "Sequence lengths");
  bench->add_option("--widths", bench_cfg.widths, "Hidden widths");
  bench->add_option("--workers", bench_cfg.workers, "Parallel workers (0: all)")->check(CLI::NonNegativeNumber);
  bench->add_option("--samples", bench_cfg.samples, "Timed runs per cell")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_cfg.seed, "Seed for layers and inputs");
  bench->add_option("--out", bench_out, "Output directory");

  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  verify->add_option("--seed", verify_seed, "Seed for the randomized checks");

  Common gen_opts;
  auto* generate = app.add_subcommand("generate", "Write a task dataset to CSV");
  add_common(generate, gen_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*run) {
      const auto cfg = resolve(run_opts);
      const auto result = paralesn::cmd_run(cfg);
      paralesn::write_run(result, run_opts.out);
      std::cout << result.summary_line() << "\n";
    } else if (*sweep) {
      const auto cfg = resolve(sweep_opts);
      const auto result = paralesn::cmd_sweep(cfg);
      paralesn::write_sweep(result, sweep_opts.out);
      std::size_t ok = result.ranking.size();
      std::cout << "evaluated " << ok << " of " << result.points.size() << " points; test reads during selection: "
                << result.test_reads_during_selection << "\n";
      const auto& best = result.points[result.ranking.front()];
      std::cout << "best point " << best.index << ":";
      for (const auto& [k, v] : best.assignment) std::cout << " " << k << "=" << v;
      std::cout << " (valid " << result.metric << " " << best.valid_metric << ")\n"
                << result.best_run.summary_line() << "\n";
    } else if (*bench) {
      const auto result = paralesn::cmd_bench_scan(bench_cfg);
      paralesn::write_bench(result, bench_out);
      std::cout << paralesn::to_json(result).dump(2) << "\n";
    } else if (*verify) {
      const auto report = paralesn::cmd_verify(verify_seed);
      for (const auto& c : report.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
      }
      return report.passed() ? kOk : kVerifyFailed;
    } else if (*generate) {
      const auto cfg = resolve(gen_opts);
      cfg.validate();
      const auto path = paralesn::cmd_generate(cfg.task, cfg.seed, gen_opts.out);
      std::cout << "wrote " << path.string() << "\n";
    }
  } catch (const paralesn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

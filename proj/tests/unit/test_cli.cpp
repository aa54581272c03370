#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "paralesn/experiment.hpp"
#include "paralesn/serialize.hpp"

using namespace paralesn;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "paralesn_test_cli" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig narma_config(ModelKind kind = ModelKind::kParalEsn) {
  ExperimentConfig c;
  c.task.name = "narma";
  c.task.length = 2000;
  c.model.kind = kind;
  c.model.units = 64;
  c.model.layer.omega_b = 1.0;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(R"(
seed: 12
repeats: 3
mode: parallel
task: {name: sinmem, delay: 20}
model:
  kind: paralesn
  units: 64
  layers: 2
  layer: {theta_max: pi, tau: 0.5, k: 5}
  inter: {rho_max: 0.5}
readout: {kind: ridge, lambdas: [0, 1]}
sweep:
  strategy: random
  budget: 4
  params:
    layer.omega_mix: [0.01, 0.1]
    layer.theta_min: [0, pi/2]
)");
  CHECK(c.seed == 12);
  CHECK(c.repeats == 3);
  CHECK(c.mode == ScanMode::kParallel);
  CHECK(c.task.delay == 20);
  CHECK(c.model.layers == 2);
  CHECK(c.model.layer.theta_max == std::numbers::pi);
  CHECK(c.model.layer.k == 5);
  CHECK(c.model.inter.rho_max == 0.5);
  CHECK(c.readout.lambdas == std::vector<double>{0.0, 1.0});
  CHECK(c.sweep.strategy == SweepStrategy::kRandom);
  REQUIRE(c.sweep.params.size() == 2);
  CHECK(c.sweep.params[0].first == "layer.omega_mix");
  CHECK(c.sweep.params[1].second[1] == std::numbers::pi / 2);
  CHECK_NOTHROW(c.validate());

  CHECK(parse_number("2pi") == 2 * std::numbers::pi);
  CHECK(parse_number("2*pi") == 2 * std::numbers::pi);
  CHECK(parse_number("0.25") == 0.25);
  CHECK_THROWS_AS(parse_number("two"), ConfigError);

  CHECK_THROWS_AS(parse_config("sed: 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model: {layer: {rho: 0.5}}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("readout: {kind: svm}\n"), ConfigError);

  const auto example = load_config(std::filesystem::path(PARALESN_SOURCE_DIR) / "configs/example.yaml");
  CHECK_NOTHROW(example.validate());
}

TEST_CASE("published grids") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.model.layer.tau = 0.3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.allow_unlisted = true;
  CHECK_NOTHROW(c.validate());

  ExperimentConfig e;
  e.model.kind = ModelKind::kEsn;
  apply_param(e, "layer.rho", 0.5);
  CHECK(e.model.esn_layer.rho == 0.5);
  CHECK_NOTHROW(e.validate());
  apply_param(e, "layer.omega_in", 0.2);
  CHECK_THROWS_AS(e.validate(), ConfigError);

  CHECK(listed_values(c, "layer.k") == std::vector<double>{3, 5, 7, 9});
  CHECK(listed_values(c, "layers") == std::vector<double>{1, 2, 3, 4, 5});
  CHECK_THROWS_AS(apply_param(c, "layer.bogus", 1.0), ConfigError);
  CHECK_THROWS_AS(apply_param(c, "layer.rho", 0.5), ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
  ExperimentConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("sweep enumeration") {
  ExperimentConfig c;
  c.sweep.params = {{"layer.tau", {0.1, 0.5}}, {"layer.k", {3, 5, 7}}};
  const auto grid = enumerate_sweep(c);
  REQUIRE(grid.size() == 6);
  CHECK(grid[0] == Assignment{{"layer.tau", 0.1}, {"layer.k", 3}});
  CHECK(grid[1] == Assignment{{"layer.tau", 0.1}, {"layer.k", 5}});
  CHECK(grid[5] == Assignment{{"layer.tau", 0.5}, {"layer.k", 7}});

  c.sweep.strategy = SweepStrategy::kRandom;
  c.sweep.budget = 4;
  const auto random = enumerate_sweep(c);
  CHECK(random.size() == 4);
  for (std::size_t i = 0; i < random.size(); ++i) {
    for (std::size_t j = i + 1; j < random.size(); ++j) CHECK(random[i] != random[j]);
  }
  CHECK(enumerate_sweep(c) == random);
  c.sweep.budget = 0;
  CHECK_THROWS_AS(enumerate_sweep(c), InvalidArgument);

  c.sweep.strategy = SweepStrategy::kOneAtATime;
  const auto oat = enumerate_sweep(c);
  CHECK(oat.size() == 1 + 2 + 3);
}

TEST_CASE("run determinism and result files") {
  const auto c = narma_config();
  const auto a = cmd_run(c);
  const auto b = cmd_run(c);
  REQUIRE(a.repeats.size() == 1);
  CHECK(a.repeats[0].test_metric.value() == b.repeats[0].test_metric.value());
  CHECK(a.parameter_count == 64 + 64 + 64 + 3 + 1);
  CHECK(a.rng_algorithm == "philox4x32-10");

  auto par = c;
  par.mode = ScanMode::kParallel;
  par.workers = 3;
  const auto p = cmd_run(par);
  CHECK(std::abs(*p.repeats[0].test_metric - *a.repeats[0].test_metric) <=
        1e-10 * std::abs(*a.repeats[0].test_metric));

  auto rep = c;
  rep.repeats = 3;
  const auto r = cmd_run(rep);
  const auto dir = scratch("run");
  write_run(r, dir);
  CHECK(std::filesystem::exists(dir / "run.csv"));
  auto back = read_run(dir / "run.json");
  back.summarize();
  CHECK(back.mean == r.mean);
  CHECK(back.std == r.std);
  CHECK(back.summary_line() == r.summary_line());
  CHECK(back.config_hash == r.config_hash);
  CHECK(run_result_from_json(to_json(r)).repeats.size() == 3);
}

TEST_CASE("ESN beats the constant predictor on NARMA") {
  auto c = narma_config(ModelKind::kEsn);
  c.model.esn_layer.omega_in = 0.1;
  const auto r = cmd_run(c);
  CHECK(*r.repeats[0].test_metric < 1.0);
}

TEST_CASE("sweep selection is audited") {
  auto c = narma_config();
  c.sweep.params = {{"layer.omega_mix", {0.1, 1.0}}, {"layer.rho_min", {0.0, 0.5}}};
  const auto s = cmd_sweep(c);
  CHECK(s.test_reads_during_selection == 0);
  REQUIRE(s.ranking.size() == 4);
  for (std::size_t i = 1; i < s.ranking.size(); ++i) {
    CHECK(s.points[s.ranking[i - 1]].valid_metric <= s.points[s.ranking[i]].valid_metric);
  }
  for (const auto& p : s.points) {
    REQUIRE(p.ok);
    double best = INFINITY;
    for (const auto& row : p.lambda_table) best = std::min(best, row.valid_metric);
    for (const auto& row : p.lambda_table) {
      if (row.lambda == p.selected_lambda) CHECK(row.valid_metric == best);
    }
  }
  const auto dir = scratch("sweep");
  write_sweep(s, dir);
  CHECK(std::filesystem::exists(dir / "sweep.csv"));
  CHECK(std::filesystem::exists(dir / "best" / "run.json"));

  SUBCASE("single point equals a plain run") {
    auto one = narma_config();
    one.sweep.params = {{"layer.omega_mix", {0.1}}};
    const auto single = cmd_sweep(one);
    auto direct = narma_config();
    direct.model.layer.omega_mix = 0.1;
    CHECK(*single.best_run.repeats[0].test_metric == *cmd_run(direct).repeats[0].test_metric);
  }
  SUBCASE("invalid points are rejected, not fatal") {
    auto bad = narma_config();
    bad.sweep.params = {{"layer.k", {3, 99}}};
    bad.allow_unlisted = true;
    const auto r = cmd_sweep(bad);
    CHECK(r.ranking.size() == 1);
    CAPTURE(r.points[1].status);
    CHECK(r.points[1].status.rfind("rejected", 0) == 0);
  }
}

TEST_CASE("NARMA sensitivity to the spectral radius") {
  auto c = narma_config();
  c.sweep.strategy = SweepStrategy::kOneAtATime;
  c.sweep.params = {{"layer.rho_max", {0.1}}};
  const auto s = cmd_sweep(c);
  REQUIRE(s.points.size() == 2);
  CHECK(s.points[1].valid_metric > s.points[0].valid_metric);
}

TEST_CASE("verify catches a tampered combine") {
  CHECK(verify_scan_combine([](const AffineElement& a, const AffineElement& b) { return scan_combine(a, b); }, 1)
            .passed);
  CHECK_FALSE(
      verify_scan_combine([](const AffineElement& a, const AffineElement& b) { return scan_combine(b, a); }, 1)
          .passed);
  const auto report = cmd_verify(0);
  for (const auto& check : report.checks) {
    CAPTURE(check.name);
    CAPTURE(check.detail);
    CHECK(check.passed);
  }
}

TEST_CASE("generate writes data and provenance") {
  TaskSpec t;
  t.name = "sinmem";
  t.length = 700;
  const auto dir = scratch("gen");
  const auto path = cmd_generate(t, 5, dir);
  CHECK(std::filesystem::exists(path));
  auto sidecar = path;
  sidecar.replace_extension(".json");
  std::ifstream in(sidecar);
  const auto j = nlohmann::json::parse(in);
  CHECK(j.contains("split"));
  const auto table = tasks::read_numeric_csv(path);
  CHECK(table.values.rows() == 700);
  const auto ds = make_dataset(t, 5);
  for (std::size_t r = 0; r < 700; ++r) {
    REQUIRE(table.values(r, 0) == ds.inputs(r, 0));
    REQUIRE(table.values(r, 1) == ds.targets(r, 0));
  }
}

TEST_CASE("model records round-trip bit for bit") {
  DeepHyperparams hp;
  hp.total_units = 20;
  hp.layers = 2;
  hp.first.omega_b = 0.1;
  RngSpec spec{77};
  RngStream rng(spec);
  io::ParalEsnRecord rec{hp, spec, DeepParalEsn::sample(hp, 3, rng)};
  const auto path = scratch("model") / "model.bin";
  std::filesystem::create_directories(path.parent_path());
  io::write_file(path, io::encode(rec));
  const auto back = io::decode_paralesn(io::read_file(path));
  CHECK(back.model == rec.model);
  CHECK(back.rng == spec);

  DeepBaselineHyperparams bhp;
  bhp.total_units = 12;
  RngStream brng(spec);
  io::BaselineRecord brec{bhp, spec, DeepBaseline::sample(bhp, 2, brng)};
  CHECK(io::decode_baseline(io::encode(brec)).model == brec.model);

  auto bytes = io::encode(rec);
  bytes[0] = 'X';
  CHECK_THROWS_AS(io::peek_kind(bytes), ParseError);
}

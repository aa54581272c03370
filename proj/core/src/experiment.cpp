#include "paralesn/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "paralesn/error.hpp"
#include "paralesn/metrics.hpp"
#include "paralesn/readout.hpp"
#include "paralesn/theory.hpp"

namespace paralesn {

namespace {

using Clock = std::chrono::steady_clock;
using tasks::SplitPart;
using tasks::TaskDataset;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kMlpStreamBase = 1'000'000;
constexpr std::uint64_t kSweepStream = 0xffff'ffffULL;

bool better(double a, double b, bool higher) { return higher ? a > b : a < b; }

std::size_t or_default(std::size_t v, std::size_t fallback) { return v ? v : fallback; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ----------------------------------------------------------------------- run

MetricSpec resolve_metric(const TaskSpec& task) {
  std::string name = task.metric;
  if (name == "auto") name = task.name == "memcap" ? "memory_capacity" : "nrmse";
  return {name, name == "memory_capacity"};
}

double evaluate_metric(const std::string& name, const RealMatrix& pred, const RealMatrix& target) {
  if (name == "nrmse") return tasks::metric_nrmse(pred, target).value;
  if (name == "mse") return tasks::metric_mse(pred, target).value;
  if (name == "memory_capacity") return tasks::metric_memory_capacity(pred, target).value;
  throw ConfigError("unknown metric '" + name + "'");
}

TaskDataset make_dataset(const TaskSpec& task, std::uint64_t seed) {
  const RngSpec data_spec{splitmix64(seed)};
  RngStream rng(data_spec, 0);
  TaskDataset ds;
  if (task.name == "memcap") {
    tasks::MemCapConfig c;
    c.length = or_default(task.length, c.length);
    c.max_delay = or_default(task.delay, c.max_delay);
    c.washout = task.washout;
    ds = tasks::gen_memcap(c, rng);
  } else if (task.name == "ctxor") {
    ds = tasks::gen_ctxor(or_default(task.delay, 5), or_default(task.length, 7000), rng, task.washout);
  } else if (task.name == "sinmem") {
    ds = tasks::gen_sinmem(or_default(task.delay, 10), or_default(task.length, 7000), rng, task.washout);
  } else if (task.name == "narma") {
    tasks::NarmaConfig c;
    c.order = task.order;
    c.length = or_default(task.length, c.length);
    c.washout = task.washout;
    ds = tasks::gen_narma(c, data_spec);
  } else if (task.name == "mackey_glass") {
    tasks::MackeyGlassConfig c;
    c.length = or_default(task.length, c.length);
    c.horizon = or_default(task.horizon, c.horizon);
    c.washout = task.washout;
    ds = tasks::gen_mackey_glass(c);
  } else if (task.name == "lorenz96") {
    tasks::Lorenz96Config c;
    c.length = or_default(task.length, c.length);
    c.horizon = or_default(task.horizon, c.horizon);
    c.washout = task.washout;
    ds = tasks::gen_lorenz96(c);
  } else if (task.name == "csv") {
    tasks::CsvForecastConfig c;
    c.delay = or_default(task.delay, c.delay);
    c.train_fraction = task.train_fraction;
    c.valid_fraction = task.valid_fraction;
    c.clip = task.clip;
    c.washout = task.washout;
    ds = tasks::load_csv_forecasting(task.path, c);
  } else {
    throw ConfigError("unknown task '" + task.name + "'");
  }
  ds.provenance["seed"] = std::to_string(seed);
  ds.provenance["data_seed"] = std::to_string(data_spec.seed);
  ds.provenance["rng"] = std::string(RngSpec::kAlgorithm);
  return ds;
}

ModelFeatures compute_features(const ExperimentConfig& config, const TaskDataset& data,
                               std::size_t repeat, int workers) {
  RngStream rng(RngSpec{config.seed}, 1 + repeat);
  ModelFeatures out;
  const std::size_t n_in = data.inputs.cols();
  if (config.model.kind == ModelKind::kParalEsn) {
    const DeepParalEsn model = DeepParalEsn::sample(config.model.paralesn_hyperparams(), n_in, rng);
    out.parameter_count = model.parameter_count();
    ForwardOptions opts;
    opts.mode = config.mode;
    opts.workers = workers;
    const auto start = Clock::now();
    out.features = model.forward(data.inputs, opts).features;
    out.seconds = seconds_since(start);
  } else {
    const DeepBaseline model = DeepBaseline::sample(config.model.baseline_hyperparams(), n_in, rng);
    out.parameter_count = model.parameter_count();
    const auto start = Clock::now();
    model.forward(data.inputs, out.features);
    out.seconds = seconds_since(start);
  }
  if (!all_finite(out.features.flat())) throw Error("reservoir produced non-finite features");
  return out;
}

RepeatResult evaluate_repeat(const ExperimentConfig& config, const TaskDataset& data,
                             std::size_t repeat, bool score_test, int workers) {
  const MetricSpec metric = resolve_metric(config.task);
  RepeatResult res;
  res.repeat = repeat;
  const ModelFeatures feat = compute_features(config, data, repeat, workers);
  res.recurrence_seconds = feat.seconds;
  res.reservoir_parameters = feat.parameter_count;

  const auto start = Clock::now();
  const auto [tr_begin, tr_end] = data.range(SplitPart::kTrain);
  const auto [va_begin, va_end] = data.range(SplitPart::kValid);
  const auto [te_begin, te_end] = data.range(SplitPart::kTest);
  const Standardizer scaler = Standardizer::fit(feat.features.slice_rows(tr_begin, tr_end));
  const RealMatrix x = scaler.transform(feat.features);
  const RealMatrix x_train = x.slice_rows(tr_begin, tr_end);
  const RealMatrix x_valid = x.slice_rows(va_begin, va_end);
  const RealMatrix y_train = data.split_targets(SplitPart::kTrain);
  const RealMatrix y_valid = data.split_targets(SplitPart::kValid);

  std::function<RealMatrix(const RealMatrix&)> predict;
  if (config.readout.kind == ReadoutKind::kRidge) {
    const RidgeProblem problem(x_train, y_train);
    std::optional<RidgeReadout> best;
    for (double lambda : config.readout.lambdas) {
      double score = std::numeric_limits<double>::quiet_NaN();
      RidgeReadout readout;
      try {
        readout = problem.solve(lambda);
        score = evaluate_metric(metric.name, readout.predict(x_valid), y_valid);
      } catch (const SingularMatrixError&) {
      }
      res.lambda_table.push_back({lambda, score});
      if (std::isfinite(score) && (!best || better(score, res.valid_metric, metric.higher_is_better))) {
        best = readout;
        res.valid_metric = score;
        res.selected_lambda = lambda;
      }
    }
    if (!best) throw Error("no regularization strength produced a finite validation score");
    res.readout_parameters = best->w_out.size() + best->b_out.size();
    predict = [readout = *best](const RealMatrix& f) { return readout.predict(f); };
  } else {
    RngStream rng(RngSpec{config.seed}, kMlpStreamBase + repeat);
    MlpConfig mlp = config.readout.mlp;
    if (metric.name == "memory_capacity" || metric.name == "nrmse" || metric.name == "mse") {
      mlp.loss = MlpLoss::kMeanSquaredError;
    }
    const MlpReadout head = fit_mlp(x_train, y_train, mlp, rng, &x_valid, &y_valid);
    res.valid_metric = evaluate_metric(metric.name, head.predict(x_valid), y_valid);
    res.readout_parameters = head.parameter_count();
    predict = [head](const RealMatrix& f) { return head.predict(f); };
  }
  res.readout_seconds = seconds_since(start);
  res.total_seconds = res.recurrence_seconds + res.readout_seconds;

  if (score_test) {
    const RealMatrix y_test = data.split_targets(SplitPart::kTest);
    res.test_metric = evaluate_metric(metric.name, predict(x.slice_rows(te_begin, te_end)), y_test);
  }
  return res;
}

void RunResult::summarize() {
  std::vector<double> v;
  for (const auto& r : repeats) {
    if (!r.test_metric) throw Error("summarize: repeat " + std::to_string(r.repeat) + " has no test metric");
    v.push_back(*r.test_metric);
  }
  if (v.empty()) throw Error("summarize: no repeats");
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

std::string RunResult::summary_line() const {
  std::ostringstream os;
  os.precision(6);
  os << task << " " << model << " " << metric << " = " << mean << " +- " << std << " (" << repeats.size()
     << " repeats, " << parameter_count << " reservoir parameters, config " << config_hash << ")";
  return os.str();
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : r.repeats) {
    nlohmann::json lt = nlohmann::json::array();
    for (const auto& s : rep.lambda_table) {
      lt.push_back({{"lambda", s.lambda},
                    {"valid_metric", std::isfinite(s.valid_metric) ? nlohmann::json(s.valid_metric)
                                                                  : nlohmann::json(nullptr)}});
    }
    reps.push_back({{"repeat", rep.repeat},
                    {"valid_metric", rep.valid_metric},
                    {"test_metric", rep.test_metric ? nlohmann::json(*rep.test_metric) : nlohmann::json(nullptr)},
                    {"selected_lambda", rep.selected_lambda},
                    {"lambda_table", lt},
                    {"reservoir_parameters", rep.reservoir_parameters},
                    {"readout_parameters", rep.readout_parameters},
                    {"recurrence_seconds", rep.recurrence_seconds},
                    {"readout_seconds", rep.readout_seconds},
                    {"total_seconds", rep.total_seconds}});
  }
  return {{"task", r.task},
          {"model", r.model},
          {"metric", r.metric},
          {"higher_is_better", r.higher_is_better},
          {"mean", r.mean},
          {"std", r.std},
          {"parameter_count", r.parameter_count},
          {"config_hash", r.config_hash},
          {"seed", r.seed},
          {"mode", r.mode},
          {"rng_algorithm", r.rng_algorithm},
          {"version", r.version},
          {"config", r.config},
          {"repeats", reps}};
}

RunResult run_result_from_json(const nlohmann::json& j) {
  try {
    RunResult r;
    r.task = j.at("task").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    r.higher_is_better = j.at("higher_is_better").get<bool>();
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
    r.parameter_count = j.at("parameter_count").get<std::size_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = j.at("mode").get<std::string>();
    r.rng_algorithm = j.at("rng_algorithm").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.config = j.at("config");
    for (const auto& rep : j.at("repeats")) {
      RepeatResult x;
      x.repeat = rep.at("repeat").get<std::size_t>();
      x.valid_metric = rep.at("valid_metric").get<double>();
      if (!rep.at("test_metric").is_null()) x.test_metric = rep.at("test_metric").get<double>();
      x.selected_lambda = rep.at("selected_lambda").get<double>();
      for (const auto& s : rep.at("lambda_table")) {
        const auto& v = s.at("valid_metric");
        x.lambda_table.push_back({s.at("lambda").get<double>(),
                                  v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>()});
      }
      x.reservoir_parameters = rep.at("reservoir_parameters").get<std::size_t>();
      x.readout_parameters = rep.at("readout_parameters").get<std::size_t>();
      x.recurrence_seconds = rep.at("recurrence_seconds").get<double>();
      x.readout_seconds = rep.at("readout_seconds").get<double>();
      x.total_seconds = rep.at("total_seconds").get<double>();
      r.repeats.push_back(std::move(x));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run record: ") + e.what());
  }
}

RunResult cmd_run(const ExperimentConfig& config, const TaskDataset* data) {
  config.validate();
  std::optional<TaskDataset> owned;
  if (!data) {
    owned = make_dataset(config.task, config.seed);
    data = &*owned;
  }
  const MetricSpec metric = resolve_metric(config.task);
  RunResult r;
  r.task = data->name;
  r.model = to_string(config.model.kind);
  r.metric = metric.name;
  r.higher_is_better = metric.higher_is_better;
  r.config_hash = config_hash(config);
  r.seed = config.seed;
  r.mode = to_string(config.mode);
  r.rng_algorithm = std::string(RngSpec::kAlgorithm);
  r.version = kLibraryVersion;
  r.config = to_json(config);
  for (std::size_t k = 0; k < config.repeats; ++k) {
    r.repeats.push_back(evaluate_repeat(config, *data, k, true, config.workers));
  }
  r.parameter_count = r.repeats.front().reservoir_parameters;
  r.summarize();
  return r;
}


void write_run(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "run.json");
    if (!out) throw Error("cannot write " + (dir / "run.json").string());
    out << to_json(r).dump(2) << '\n';
  }
  std::ofstream csv(dir / "run.csv");
  if (!csv) throw Error("cannot write " + (dir / "run.csv").string());
  csv << "repeat,task,model,metric,valid_metric,test_metric,selected_lambda,recurrence_seconds,"
         "readout_seconds,total_seconds,parameter_count,config_hash,seed,rng_algorithm,version\n";
  for (const auto& rep : r.repeats) {
    csv << rep.repeat << ',' << r.task << ',' << r.model << ',' << r.metric << ',' << fmt(rep.valid_metric)
        << ',' << (rep.test_metric ? fmt(*rep.test_metric) : "") << ',' << fmt(rep.selected_lambda) << ','
        << fmt(rep.recurrence_seconds) << ',' << fmt(rep.readout_seconds) << ','
        << fmt(rep.total_seconds) << ',' << r.parameter_count << ',' << r.config_hash << ','
        << r.seed << ',' << r.rng_algorithm << ',' << r.version << '\n';
  }
}

RunResult read_run(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error("cannot read " + json_path.string());
  try {
    return run_result_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(json_path.string() + ": " + e.what());
  }
}

// --------------------------------------------------------------------- sweep

std::vector<Assignment> enumerate_sweep(const ExperimentConfig& config) {
  const auto& params = config.sweep.params;
  for (const auto& [key, values] : params) {
    if (values.empty()) throw ConfigError("sweep parameter '" + key + "' has no values");
  }
  std::vector<Assignment> points;
  if (config.sweep.strategy == SweepStrategy::kOneAtATime) {
    points.emplace_back();
    for (const auto& [key, values] : params) {
      for (double v : values) points.push_back({{key, v}});
    }
    return points;
  }

  std::size_t total = 1;
  for (const auto& p : params) {
    if (total > std::numeric_limits<std::size_t>::max() / p.second.size()) {
      throw ConfigError("sweep grid too large");
    }
    total *= p.second.size();
  }
  auto point_at = [&](std::size_t index) {
    Assignment a(params.size());
    for (std::size_t j = params.size(); j-- > 0;) {
      const auto& values = params[j].second;
      a[j] = {params[j].first, values[index % values.size()]};
      index /= values.size();
    }
    return a;
  };

  if (config.sweep.strategy == SweepStrategy::kGrid) {
    for (std::size_t i = 0; i < total; ++i) points.push_back(point_at(i));
    return points;
  }

  if (config.sweep.budget == 0) throw InvalidArgument("random sweep needs a budget of at least 1");
  if (config.sweep.budget >= total) {
    for (std::size_t i = 0; i < total; ++i) points.push_back(point_at(i));
    return points;
  }
  RngStream rng(RngSpec{config.seed}, kSweepStream);
  std::set<std::size_t> seen;
  while (points.size() < config.sweep.budget) {
    const auto i = static_cast<std::size_t>(rng.next_unit() * static_cast<double>(total));
    if (seen.insert(i).second) points.push_back(point_at(i));
  }
  return points;
}

SweepResult cmd_sweep(const ExperimentConfig& config) {
  if (config.sweep.strategy == SweepStrategy::kRandom && config.sweep.budget == 0) {
    throw InvalidArgument("random sweep needs a budget of at least 1");
  }
  const std::vector<Assignment> assignments = enumerate_sweep(config);
  if (assignments.empty()) throw InvalidArgument("sweep has no points");
  const TaskDataset data = make_dataset(config.task, config.seed);
  const MetricSpec metric = resolve_metric(config.task);

  SweepResult out;
  out.metric = metric.name;
  out.higher_is_better = metric.higher_is_better;
  out.points.resize(assignments.size());
  std::vector<ExperimentConfig> configs(assignments.size(), config);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    SweepPoint& p = out.points[i];
    p.index = i;
    p.assignment = assignments[i];
    try {
      for (const auto& [key, value] : assignments[i]) apply_param(configs[i], key, value);
      configs[i].validate();
      p.ok = true;
      p.status = "ok";
      p.config_hash = config_hash(configs[i]);
    } catch (const ConfigError& e) {
      p.status = std::string("rejected: ") + e.what();
    }
  }

  const int pool = config.workers > 0 ? config.workers : default_workers();
  const int inner = pool > 1 ? 1 : config.workers;
  data.access->reset();
#pragma omp parallel for schedule(dynamic) num_threads(pool)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(assignments.size()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    SweepPoint& p = out.points[i];
    if (!p.ok) continue;
    try {
      double sum = 0.0;
      for (std::size_t k = 0; k < configs[i].repeats; ++k) {
        const RepeatResult r = evaluate_repeat(configs[i], data, k, false, inner);
        sum += r.valid_metric;
        if (k == 0) {
          p.selected_lambda = r.selected_lambda;
          p.lambda_table = r.lambda_table;
        }
      }
      p.valid_metric = sum / static_cast<double>(configs[i].repeats);
    } catch (const Error& e) {
      p.ok = false;
      p.status = std::string("failed: ") + e.what();
    }
  }
  out.test_reads_during_selection = data.access->count(SplitPart::kTest);

  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (out.points[i].ok) out.ranking.push_back(i);
  }
  if (out.ranking.empty()) throw Error("sweep: every point was rejected or failed");
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
    return better(out.points[a].valid_metric, out.points[b].valid_metric, metric.higher_is_better);
  });
  out.best_config = configs[out.ranking.front()];
  out.best_run = cmd_run(out.best_config, &data);
  return out;
}

void write_sweep(const SweepResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> keys;
  for (const auto& p : r.points) {
    for (const auto& [k, v] : p.assignment) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
  }
  std::ofstream csv(dir / "sweep.csv");
  if (!csv) throw Error("cannot write " + (dir / "sweep.csv").string());
  csv << "rank,point,status";
  for (const auto& k : keys) csv << ',' << k;
  csv << ",valid_" << r.metric << ",selected_lambda,config_hash\n";
  std::vector<std::size_t> order = r.ranking;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    if (!r.points[i].ok) order.push_back(i);
  }
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const SweepPoint& p = r.points[order[rank]];
    csv << (p.ok ? std::to_string(rank + 1) : "") << ',' << p.index << ",\"" << p.status << '"';
    for (const auto& k : keys) {
      csv << ',';
      for (const auto& [name, v] : p.assignment) {
        if (name == k) csv << fmt(v);
      }
    }
    csv << ',' << (p.ok ? fmt(p.valid_metric) : "") << ',' << (p.ok ? fmt(p.selected_lambda) : "") << ','
        << p.config_hash << '\n';
  }

  std::ofstream lam(dir / "sweep_lambdas.csv");
  lam << "point,lambda,valid_" << r.metric << '\n';
  for (const auto& p : r.points) {
    for (const auto& s : p.lambda_table) {
      lam << p.index << ',' << fmt(s.lambda) << ',' << (std::isfinite(s.valid_metric) ? fmt(s.valid_metric) : "")
          << '\n';
    }
  }

  nlohmann::json j;
  j["metric"] = r.metric;
  j["higher_is_better"] = r.higher_is_better;
  j["test_reads_during_selection"] = r.test_reads_during_selection;
  j["best_point"] = r.ranking.front();
  j["best_config"] = to_json(r.best_config);
  j["points"] = nlohmann::json::array();
  for (const auto& p : r.points) {
    nlohmann::json a = nlohmann::json::object();
    for (const auto& [k, v] : p.assignment) a[k] = v;
    j["points"].push_back({{"index", p.index},
                           {"assignment", a},
                           {"status", p.status},
                           {"valid_metric", p.ok ? nlohmann::json(p.valid_metric) : nlohmann::json(nullptr)},
                           {"selected_lambda", p.selected_lambda},
                           {"config_hash", p.config_hash}});
  }
  std::ofstream js(dir / "sweep.json");
  js << j.dump(2) << '\n';
  write_run(r.best_run, dir / "best");
}

// ---------------------------------------------------------------- bench-scan

MachineInfo describe_machine() {
  MachineInfo m;
  m.hardware_threads = std::thread::hardware_concurrency();
  m.omp_max_threads = omp_get_max_threads();
  std::ifstream cpu("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpu, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) m.cpu_model = line.substr(colon + 2);
      break;
    }
  }
  if (m.cpu_model.empty()) m.cpu_model = "unknown";
#if defined(__clang__)
  m.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  m.compiler = "gcc " __VERSION__;
#else
  m.compiler = "unknown";
#endif
  return m;
}

std::vector<ParamAuditRow> parameter_audit(const std::vector<std::size_t>& widths, std::size_t n_in,
                                           std::size_t k) {
  std::vector<ParamAuditRow> rows;
  for (std::size_t n : widths) {
    RngStream rng(RngSpec{0}, n);
    LayerHyperparams hp;
    hp.n_h = n;
    hp.k = k;
    EsnHyperparams ehp;
    ehp.n_h = n;
    ParamAuditRow row;
    row.n_h = n;
    row.n_in = n_in;
    row.k = k;
    row.paralesn_stored = ParalEsnLayer::sample(hp, n_in, rng).parameter_count();
    row.paralesn_formula = 2 * n + n * n_in + k + 1;
    row.esn_stored = EsnLayer::sample(ehp, n_in, rng).parameter_count();
    row.esn_formula = n * n + n * n_in + n;
    row.ratio = static_cast<double>(row.paralesn_stored) / static_cast<double>(row.esn_stored);
    rows.push_back(row);
  }
  return rows;
}

BenchScanResult cmd_bench_scan(const BenchScanConfig& config) {
  if (config.samples == 0) throw InvalidArgument("bench-scan: samples must be >= 1");
  if (config.lengths.empty() || config.widths.empty()) {
    throw InvalidArgument("bench-scan: need at least one length and one width");
  }
  BenchScanResult out;
  out.machine = describe_machine();
  const int par_workers = config.workers > 0 ? config.workers : default_workers();
  for (std::size_t n : config.widths) {
    RngStream rng(RngSpec{config.seed}, n);
    LayerHyperparams hp;
    hp.n_h = n;
    const ParalEsnLayer layer = ParalEsnLayer::sample(hp, 1, rng);
    for (std::size_t T : config.lengths) {
      RealMatrix x(T, 1);
      for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
      double seq_median = 0.0;
      for (ScanMode mode : {ScanMode::kSequential, ScanMode::kParallel}) {
        ForwardOptions opts;
        opts.mode = mode;
        opts.workers = mode == ScanMode::kParallel ? par_workers : 1;
        BenchRow row{T, n, to_string(mode), opts.workers, 0.0, {}};
        (void)layer_states(layer, x, opts);
        for (std::size_t s = 0; s < config.samples; ++s) {
          const auto start = Clock::now();
          const StateSequence h = layer_states(layer, x, opts);
          row.samples.push_back(seconds_since(start));
          if (h.rows() != T) throw Error("bench-scan: unexpected state length");
        }
        row.median_seconds = median(row.samples);
        if (mode == ScanMode::kSequential) {
          seq_median = row.median_seconds;
        } else {
          out.speedups.push_back({T, n, seq_median, row.median_seconds, row.median_seconds / seq_median});
        }
        out.rows.push_back(std::move(row));
      }
    }
    const auto [lo, hi] = std::minmax_element(config.lengths.begin(), config.lengths.end());
    double t_lo = 0.0, t_hi = 0.0;
    for (const auto& r : out.rows) {
      if (r.width != n || r.mode != "sequential") continue;
      if (r.length == *lo) t_lo = r.median_seconds;
      if (r.length == *hi) t_hi = r.median_seconds;
    }
    if (*lo != *hi && t_lo > 0.0) out.sequential_growth.emplace_back(n, t_hi / t_lo);
  }
  std::vector<std::size_t> audit_widths{128, 1024};
  for (std::size_t n : config.widths) {
    if (std::find(audit_widths.begin(), audit_widths.end(), n) == audit_widths.end()) audit_widths.push_back(n);
  }
  out.audit = parameter_audit(audit_widths, 1, 5);
  return out;
}

nlohmann::json to_json(const BenchScanResult& r) {
  nlohmann::json j;
  j["machine"] = {{"hardware_threads", r.machine.hardware_threads},
                  {"omp_max_threads", r.machine.omp_max_threads},
                  {"cpu_model", r.machine.cpu_model},
                  {"compiler", r.machine.compiler}};
  j["timings"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    j["timings"].push_back({{"length", row.length},
                            {"width", row.width},
                            {"mode", row.mode},
                            {"workers", row.workers},
                            {"median_seconds", row.median_seconds},
                            {"samples", row.samples}});
  }
  j["speedups"] = nlohmann::json::array();
  for (const auto& s : r.speedups) {
    j["speedups"].push_back({{"length", s.length},
                             {"width", s.width},
                             {"sequential_seconds", s.sequential_seconds},
                             {"parallel_seconds", s.parallel_seconds},
                             {"parallel_over_sequential", s.ratio}});
  }
  j["sequential_growth"] = nlohmann::json::array();
  for (const auto& [n, g] : r.sequential_growth) j["sequential_growth"].push_back({{"width", n}, {"ratio", g}});
  j["parameter_audit"] = nlohmann::json::array();
  for (const auto& a : r.audit) {
    j["parameter_audit"].push_back({{"n_h", a.n_h},
                                    {"n_in", a.n_in},
                                    {"k", a.k},
                                    {"paralesn_stored", a.paralesn_stored},
                                    {"paralesn_formula", a.paralesn_formula},
                                    {"esn_stored", a.esn_stored},
                                    {"esn_formula", a.esn_formula},
                                    {"ratio", a.ratio}});
  }
  return j;
}

void write_bench(const BenchScanResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream js(dir / "bench_scan.json");
  if (!js) throw Error("cannot write " + (dir / "bench_scan.json").string());
  js << to_json(r).dump(2) << '\n';
  std::ofstream csv(dir / "bench_scan.csv");
  csv << "length,width,mode,workers,median_seconds\n";
  for (const auto& row : r.rows) {
    csv << row.length << ',' << row.width << ',' << row.mode << ',' << row.workers << ','
        << fmt(row.median_seconds) << '\n';
  }
}

// -------------------------------------------------------------------- verify

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

AffineElement random_element(std::size_t width, RngStream& rng) {
  AffineElement e{ComplexVector(width), ComplexVector(width)};
  for (auto& g : e.gain) g = Complex(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7));
  for (auto& d : e.drive) d = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  return e;
}

double element_error(const AffineElement& a, const AffineElement& b) {
  double err = 0.0;
  for (std::size_t i = 0; i < a.width(); ++i) {
    err = std::max(err, std::abs(a.gain[i] - b.gain[i]) / std::max(1.0, std::abs(b.gain[i])));
    err = std::max(err, std::abs(a.drive[i] - b.drive[i]) / std::max(1.0, std::abs(b.drive[i])));
  }
  return err;
}

AffineElement tree_fold(const CombineFn& combine, std::span<const AffineElement> e) {
  if (e.size() == 1) return e[0];
  const std::size_t mid = e.size() / 2;
  return combine(tree_fold(combine, e.first(mid)), tree_fold(combine, e.subspan(mid)));
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace

CheckResult verify_scan_combine(const CombineFn& combine, std::uint64_t seed) {
  RngStream rng(RngSpec{seed}, 0x5ca7);
  double fold_err = 0.0, tree_err = 0.0, assoc_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t width = 1 + static_cast<std::size_t>(rng.next_unit() * 8);
    const std::size_t T = 2 + static_cast<std::size_t>(rng.next_unit() * 63);
    std::vector<AffineElement> elems;
    for (std::size_t t = 0; t < T; ++t) elems.push_back(random_element(width, rng));
    ComplexVector h0(width);
    for (auto& v : h0) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));

    // Direct recurrence as the oracle.
    ComplexVector h = h0;
    AffineElement acc = elems[0];
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < width; ++i) h[i] = elems[t].gain[i] * h[i] + elems[t].drive[i];
      if (t > 0) acc = combine(acc, elems[t]);
      for (std::size_t i = 0; i < width; ++i) {
        const Complex folded = acc.gain[i] * h0[i] + acc.drive[i];
        fold_err = std::max(fold_err, std::abs(folded - h[i]) / std::max(1.0, std::abs(h[i])));
      }
    }
    const AffineElement tree = tree_fold(combine, elems);
    for (std::size_t i = 0; i < width; ++i) {
      const Complex v = tree.gain[i] * h0[i] + tree.drive[i];
      tree_err = std::max(tree_err, std::abs(v - h[i]) / std::max(1.0, std::abs(h[i])));
    }
    const auto& a = elems[0];
    const auto& b = elems[1 % T];
    const auto& c = elems[T - 1];
    assoc_err = std::max(assoc_err, element_error(combine(combine(a, b), c), combine(a, combine(b, c))));
  }
  const double tol = 1e-12;
  CheckResult r;
  r.name = "scan_combine_oracle";
  r.passed = fold_err <= tol && tree_err <= tol && assoc_err <= tol;
  r.detail = "fold error " + sci(fold_err) + ", tree error " + sci(tree_err) + ", associativity error " +
             sci(assoc_err) + " (tolerance " + sci(tol) + ")";
  return r;
}

CheckResult verify_esp(const ParalEsnLayer& layer, std::uint64_t seed) {
  RngStream rng(RngSpec{seed}, 0xe5b);
  const auto summary = theory::esp_contraction_test(layer, 200, 5, rng);
  CheckResult r;
  r.name = "esp_contraction";
  const double rho = summary.max_modulus;
  if (rho < 1.0) {
    r.passed = summary.violations == 0;
    r.detail = "max|lambda_bar| = " + sci(rho) + ", " + std::to_string(summary.violations) +
               " violations of d_t <= r d_(t-1), worst step ratio " + sci(summary.worst_ratio);
  } else {
    double growth = 0.0;
    for (const auto& t : summary.trials) growth = std::max(growth, t.distances.back() / t.distances.front());
    r.passed = false;
    r.detail = "max|lambda_bar| = " + sci(rho) + (growth > 10.0 ? ": divergence detected" : ": no divergence seen") +
               ", d_T/d_0 = " + sci(growth);
  }
  return r;
}

double mlp_gradient_error(const MlpReadout& mlp, const RealMatrix& x, const RealMatrix& y, double h) {
  MlpParams grad;
  mlp.loss_and_gradient(x, y, &grad);
  MlpReadout probe = mlp;
  auto params = probe.params().tensors();
  const auto analytic = std::as_const(grad).tensors();
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double keep = params[t][i];
      params[t][i] = keep + h;
      const double up = probe.loss(x, y);
      params[t][i] = keep - h;
      const double down = probe.loss(x, y);
      params[t][i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t][i];
      diff += (a - numeric) * (a - numeric);
      na += a * a;
      nn += numeric * numeric;
    }
  }
  const double scale = std::max(std::sqrt(std::max(na, nn)), 1e-300);
  return std::sqrt(diff) / scale;
}

VerifyReport cmd_verify(std::uint64_t seed) {
  VerifyReport rep;
  auto guarded = [&](const std::string& name, const std::function<CheckResult()>& fn) {
    try {
      CheckResult c = fn();
      c.name = name;
      rep.checks.push_back(std::move(c));
    } catch (const std::exception& e) {
      rep.checks.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };

  guarded("scan_combine_oracle", [&] { return verify_scan_combine(scan_combine, seed); });

  guarded("scan_parallel_vs_sequential", [&] {
    RngStream rng(RngSpec{seed}, 0x5ca8);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t T = 1 + static_cast<std::size_t>(rng.next_unit() * 4096);
      const std::size_t n = 1 + static_cast<std::size_t>(rng.next_unit() * 64);
      std::vector<AffineElement> e;
      AffineSequence seq{ComplexMatrix(T, n), ComplexMatrix(T, n)};
      for (auto& g : seq.gains.flat()) g = std::polar(rng.uniform(0.0, 0.999), rng.uniform(0.0, 6.283));
      for (auto& d : seq.drives.flat()) d = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
      const ComplexVector h0(n, Complex(0.5, -0.25));
      const StateSequence ref = scan_sequential(seq, h0);
      for (std::size_t chunk : {std::size_t{1}, std::size_t{7}, std::size_t{64}, T}) {
        worst = std::max(worst, max_relative_error(scan_parallel(seq, h0, chunk), ref));
      }
    }
    return CheckResult{"", worst <= 1e-10, "max relative error " + sci(worst) + " (tolerance 1e-10)"};
  });

  guarded("esp_sufficiency", [&] {
    RngStream rng(RngSpec{seed}, 0xe5a);
    LayerHyperparams hp;
    hp.n_h = 64;
    hp.rho_min = 0.5;
    hp.rho_max = 0.95;
    return verify_esp(ParalEsnLayer::sample(hp, 2, rng), seed);
  });

  guarded("esp_negative_control", [&] {
    RngStream rng(RngSpec{seed}, 0xe5c);
    ComplexVector lambda(16);
    for (auto& l : lambda) l = std::polar(rng.uniform(0.1, 0.9), rng.uniform(0.0, 6.283));
    lambda[3] = std::polar(1.05, 0.3);
    const CheckResult inner = verify_esp(theory::linear_layer(lambda, 1, rng), seed);
    const bool detected = !inner.passed && inner.detail.find("divergence detected") != std::string::npos;
    return CheckResult{"", detected, "injected |lambda_bar| = 1.05; " + inner.detail};
  });

  guarded("diagonal_equivalence", [&] {
    RngStream rng(RngSpec{seed}, 0xd1a);
    const auto pair = theory::build_equivalence_pair(8, 2, rng);
    RealMatrix x(100, 2);
    for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
    const auto r = theory::verify_equivalence(pair, x);
    return CheckResult{"", r.passed && pair.reconstruction_error <= 1e-10,
                       "cond(V) = " + sci(pair.condition) + ", max deviation " + sci(r.max_deviation) +
                           " at step " + std::to_string(r.worst_step) + " (tolerance " + sci(r.tolerance) +
                           "), reconstruction " + sci(pair.reconstruction_error)};
  });

  guarded("mlp_gradient", [&] {
    RngStream rng(RngSpec{seed}, 0x9ad);
    MlpConfig cfg;
    cfg.hidden = 6;
    const MlpReadout mlp(4, 3, cfg, rng);
    RealMatrix x(10, 4), y(10, 3);
    for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
    for (auto& v : y.flat()) v = rng.uniform(-1.0, 1.0);
    const double err = mlp_gradient_error(mlp, x, y);
    return CheckResult{"", err <= 1e-5, "relative error " + sci(err) + " (tolerance 1e-5)"};
  });

  guarded("ridge_recovery", [&] {
    RngStream rng(RngSpec{seed}, 0x71d);
    RealMatrix x(200, 6), w(2, 6), y(200, 2);
    for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
    for (auto& v : w.flat()) v = rng.uniform(-2.0, 2.0);
    for (std::size_t r = 0; r < 200; ++r) {
      for (std::size_t o = 0; o < 2; ++o) {
        double acc = 0.5 * static_cast<double>(o) - 0.25;
        for (std::size_t c = 0; c < 6; ++c) acc += w(o, c) * x(r, c);
        y(r, o) = acc;
      }
    }
    const RealMatrix pred = fit_ridge(x, y, 0.0).predict(x);
    double resid = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) resid = std::max(resid, std::abs(pred.flat()[i] - y.flat()[i]));
    return CheckResult{"", resid <= 1e-10, "max residual " + sci(resid) + " (tolerance 1e-10)"};
  });

  guarded("forward_parallel_vs_sequential", [&] {
    RngStream rng(RngSpec{seed}, 0xf0d);
    DeepHyperparams hp;
    hp.total_units = 48;
    hp.layers = 3;
    hp.concat = true;
    const DeepParalEsn model = DeepParalEsn::sample(hp, 2, rng);
    RealMatrix x(3000, 2);
    for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
    ForwardOptions par;
    par.mode = ScanMode::kParallel;
    par.chunk_size = 100;
    const double err = max_relative_error(model.forward(x, par).features, model.forward(x).features);
    return CheckResult{"", err <= 1e-10, "max relative error " + sci(err) + " (tolerance 1e-10)"};
  });

  guarded("generator_fixed_points", [&] {
    tasks::MackeyGlassConfig mg;
    mg.history = 1.0;
    mg.subsample = 1;
    mg.transient = 0;
    double mg_err = 0.0;
    for (double v : tasks::mackey_glass_series(mg, 10000)) mg_err = std::max(mg_err, std::abs(v - 1.0));
    RealVector state(5, 8.0);
    double l96_err = 0.0;
    for (int s = 0; s < 10000; ++s) {
      state = tasks::lorenz96_rk4_step(state, 0.05, 8.0);
      for (double v : state) l96_err = std::max(l96_err, std::abs(v - 8.0));
    }
    const RealVector zero(2, 0.0);
    const RealVector y = tasks::narma_series(zero, 10);
    const double narma_err = std::max(std::abs(y[0] - 0.1), std::abs(y[1] - 0.1301));
    const bool ok = mg_err <= 1e-12 && l96_err <= 1e-12 && narma_err <= 1e-15;
    return CheckResult{"", ok,
                       "mackey-glass drift " + sci(mg_err) + ", lorenz96 drift " + sci(l96_err) +
                           ", narma hand-value error " + sci(narma_err)};
  });
  return rep;
}

// ------------------------------------------------------------------ generate

std::filesystem::path cmd_generate(const TaskSpec& task, std::uint64_t seed,
                                   const std::filesystem::path& dir) {
  const TaskDataset ds = make_dataset(task, seed);
  std::filesystem::create_directories(dir);
  std::vector<std::string> header;
  for (std::size_t c = 0; c < ds.inputs.cols(); ++c) header.push_back("x" + std::to_string(c));
  for (std::size_t c = 0; c < ds.targets.cols(); ++c) header.push_back("y" + std::to_string(c));
  const RealMatrix parts[] = {ds.inputs, ds.targets};
  const auto csv_path = dir / (ds.name + ".csv");
  tasks::write_csv(csv_path, header, hconcat(parts));

  nlohmann::json j;
  j["name"] = ds.name;
  j["rows"] = ds.length();
  j["input_columns"] = ds.inputs.cols();
  j["target_columns"] = ds.targets.cols();
  j["split"] = {{"train_end", ds.split.train_end},
                {"valid_end", ds.split.valid_end},
                {"test_end", ds.split.test_end}};
  j["washout"] = ds.washout;
  j["target_valid_from"] = ds.target_valid_from;
  j["provenance"] = ds.provenance;
  j["version"] = kLibraryVersion;
  std::ofstream js(dir / (ds.name + ".json"));
  if (!js) throw Error("cannot write provenance sidecar");
  js << j.dump(2) << '\n';
  return csv_path;
}

}  // namespace paralesn

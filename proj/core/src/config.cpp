#include "paralesn/config.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <numbers>
#include <set>

#include <yaml-cpp/yaml.h>

#include "paralesn/error.hpp"

namespace paralesn {

namespace {

constexpr double kPi = std::numbers::pi;

const std::vector<double> kLayers{1, 2, 3, 4, 5};
const std::vector<double> kOmegaB{0, 0.01, 0.1, 1, 10};
const std::vector<double> kTau{0.1, 0.5, 0.9, 1};
const std::vector<double> kOmegaIn{0.01, 0.1, 1, 10};
const std::vector<double> kRho{0.1, 0.5, 0.9};
const std::vector<double> kRhoMax{0.1, 0.5, 0.9};
const std::vector<double> kRhoMin{0, 0.1, 0.5, 0.9};
const std::vector<double> kThetaMax{kPi / 2, kPi, 2 * kPi};
const std::vector<double> kThetaMin{0, kPi / 2, kPi, 2 * kPi};
const std::vector<double> kOmegaMix{0.01, 0.1, 1, 10};
const std::vector<double> kOmegaMixB{0, 0.01, 0.1, 1, 10};
const std::vector<double> kKernel{3, 5, 7, 9};
const std::vector<double> kBool{0, 1};

bool listed(const std::vector<double>& set, double v) {
  return std::any_of(set.begin(), set.end(),
                     [&](double s) { return std::abs(s - v) <= 1e-9 * std::max(1.0, std::abs(s)); });
}

std::size_t as_count(double v, const std::string& key) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 9007199254740992.0) {
    throw ConfigError(key + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

struct Field {
  std::string scope;  // layer or inter
  std::string name;
};

Field split_key(const std::string& key) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) return {"", key};
  return {key.substr(0, dot), key.substr(dot + 1)};
}

bool is_paralesn(const ExperimentConfig& c) { return c.model.kind == ModelKind::kParalEsn; }

const std::vector<double>* grid_for(const ExperimentConfig& c, const std::string& key) {
  const Field f = split_key(key);
  if (f.scope.empty()) {
    if (f.name == "layers") return &kLayers;
    if (f.name == "concat") return &kBool;
    return nullptr;
  }
  if (f.name == "omega_b") return &kOmegaB;
  if (f.name == "tau") return &kTau;
  if (is_paralesn(c)) {
    if (f.name == "rho_max") return &kRhoMax;
    if (f.name == "rho_min") return &kRhoMin;
    if (f.name == "theta_max") return &kThetaMax;
    if (f.name == "theta_min") return &kThetaMin;
    if (f.name == "omega_mix") return &kOmegaMix;
    if (f.name == "omega_mixb") return &kOmegaMixB;
    if (f.name == "k") return &kKernel;
  } else {
    if (f.name == "rho") return &kRho;
    if (f.name == "omega_in") return &kOmegaIn;
  }
  return nullptr;
}

double read_param(const ExperimentConfig& c, const std::string& key) {
  const Field f = split_key(key);
  if (f.scope.empty()) {
    if (f.name == "units") return static_cast<double>(c.model.units);
    if (f.name == "layers") return static_cast<double>(c.model.layers);
    if (f.name == "concat") return c.model.concat ? 1.0 : 0.0;
  } else if (is_paralesn(c)) {
    const LayerHyperparams& hp = f.scope == "layer" ? c.model.layer : c.model.inter;
    if (f.name == "rho_min") return hp.rho_min;
    if (f.name == "rho_max") return hp.rho_max;
    if (f.name == "theta_min") return hp.theta_min;
    if (f.name == "theta_max") return hp.theta_max;
    if (f.name == "tau") return hp.tau;
    if (f.name == "omega_b") return hp.omega_b;
    if (f.name == "omega_mix") return hp.omega_mix;
    if (f.name == "omega_mixb") return hp.omega_mixb;
    if (f.name == "k") return static_cast<double>(hp.k);
  } else {
    const EsnHyperparams& hp = f.scope == "layer" ? c.model.esn_layer : c.model.esn_inter;
    if (f.name == "rho") return hp.rho;
    if (f.name == "omega_in") return hp.omega_in;
    if (f.name == "omega_b") return hp.omega_b;
    if (f.name == "tau") return hp.tau;
  }
  throw ConfigError("unknown parameter '" + key + "'");
}

// --------------------------------------------------------------------- YAML

using Node = YAML::Node;

void check_keys(const Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

double number(const Node& n, const std::string& where) {
  try {
    return parse_number(n.as<std::string>());
  } catch (const YAML::Exception&) {
    throw ConfigError(where + " must be a scalar");
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <typename T>
void maybe(const Node& parent, const char* key, T& out, const std::string& where) {
  const Node n = parent[key];
  if (!n) return;
  const std::string path = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    try {
      out = n.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path + " must be true or false");
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    out = n.as<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    out = number(n, path);
  } else {
    out = static_cast<T>(as_count(number(n, path), path));
  }
}

void read_paralesn_layer(const Node& n, LayerHyperparams& hp, const std::string& where) {
  check_keys(n, where, {"rho_min", "rho_max", "theta_min", "theta_max", "tau", "omega_b",
                        "omega_mix", "omega_mixb", "k"});
  maybe(n, "rho_min", hp.rho_min, where);
  maybe(n, "rho_max", hp.rho_max, where);
  maybe(n, "theta_min", hp.theta_min, where);
  maybe(n, "theta_max", hp.theta_max, where);
  maybe(n, "tau", hp.tau, where);
  maybe(n, "omega_b", hp.omega_b, where);
  maybe(n, "omega_mix", hp.omega_mix, where);
  maybe(n, "omega_mixb", hp.omega_mixb, where);
  maybe(n, "k", hp.k, where);
}

void read_esn_layer(const Node& n, EsnHyperparams& hp, const std::string& where) {
  check_keys(n, where, {"rho", "omega_in", "omega_b", "tau"});
  maybe(n, "rho", hp.rho, where);
  maybe(n, "omega_in", hp.omega_in, where);
  maybe(n, "omega_b", hp.omega_b, where);
  maybe(n, "tau", hp.tau, where);
}

ModelKind model_kind(const std::string& s) {
  if (s == "paralesn") return ModelKind::kParalEsn;
  if (s == "esn") return ModelKind::kEsn;
  if (s == "scr") return ModelKind::kScr;
  throw ConfigError("model.kind must be paralesn, esn or scr (got '" + s + "')");
}

ExperimentConfig from_node(const Node& root) {
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  check_keys(root, "config",
             {"seed", "repeats", "mode", "workers", "allow_unlisted", "task", "model", "readout", "sweep"});
  maybe(root, "seed", c.seed, "config");
  maybe(root, "repeats", c.repeats, "config");
  maybe(root, "allow_unlisted", c.allow_unlisted, "config");
  if (const Node w = root["workers"]) c.workers = static_cast<int>(as_count(number(w, "workers"), "workers"));
  if (const Node m = root["mode"]) {
    const auto s = m.as<std::string>();
    if (s == "sequential") c.mode = ScanMode::kSequential;
    else if (s == "parallel") c.mode = ScanMode::kParallel;
    else throw ConfigError("mode must be sequential or parallel (got '" + s + "')");
  }

  if (const Node t = root["task"]) {
    check_keys(t, "task", {"name", "length", "delay", "order", "horizon", "washout", "path",
                           "train_fraction", "valid_fraction", "clip", "metric"});
    maybe(t, "name", c.task.name, "task");
    maybe(t, "length", c.task.length, "task");
    maybe(t, "delay", c.task.delay, "task");
    maybe(t, "order", c.task.order, "task");
    maybe(t, "horizon", c.task.horizon, "task");
    maybe(t, "washout", c.task.washout, "task");
    maybe(t, "path", c.task.path, "task");
    maybe(t, "train_fraction", c.task.train_fraction, "task");
    maybe(t, "valid_fraction", c.task.valid_fraction, "task");
    maybe(t, "clip", c.task.clip, "task");
    maybe(t, "metric", c.task.metric, "task");
  }

  if (const Node m = root["model"]) {
    check_keys(m, "model", {"kind", "units", "layers", "concat", "layer", "inter"});
    if (const Node k = m["kind"]) c.model.kind = model_kind(k.as<std::string>());
    maybe(m, "units", c.model.units, "model");
    maybe(m, "layers", c.model.layers, "model");
    maybe(m, "concat", c.model.concat, "model");
    if (is_paralesn(c)) {
      if (const Node l = m["layer"]) read_paralesn_layer(l, c.model.layer, "model.layer");
      if (const Node l = m["inter"]) read_paralesn_layer(l, c.model.inter, "model.inter");
    } else {
      if (const Node l = m["layer"]) read_esn_layer(l, c.model.esn_layer, "model.layer");
      if (const Node l = m["inter"]) read_esn_layer(l, c.model.esn_inter, "model.inter");
    }
  }

  if (const Node r = root["readout"]) {
    check_keys(r, "readout", {"kind", "lambdas", "mlp"});
    if (const Node k = r["kind"]) {
      const auto s = k.as<std::string>();
      if (s == "ridge") c.readout.kind = ReadoutKind::kRidge;
      else if (s == "mlp") c.readout.kind = ReadoutKind::kMlp;
      else throw ConfigError("readout.kind must be ridge or mlp (got '" + s + "')");
    }
    if (const Node l = r["lambdas"]) {
      if (!l.IsSequence()) throw ConfigError("readout.lambdas must be a list");
      c.readout.lambdas.clear();
      for (const auto& v : l) c.readout.lambdas.push_back(number(v, "readout.lambdas"));
    }
    if (const Node m = r["mlp"]) {
      check_keys(m, "readout.mlp", {"hidden", "learning_rate", "epochs", "patience", "batch_size"});
      maybe(m, "hidden", c.readout.mlp.hidden, "readout.mlp");
      maybe(m, "learning_rate", c.readout.mlp.learning_rate, "readout.mlp");
      maybe(m, "epochs", c.readout.mlp.epochs, "readout.mlp");
      maybe(m, "patience", c.readout.mlp.patience, "readout.mlp");
      maybe(m, "batch_size", c.readout.mlp.batch_size, "readout.mlp");
    }
  }

  if (const Node s = root["sweep"]) {
    check_keys(s, "sweep", {"strategy", "budget", "params"});
    if (const Node st = s["strategy"]) {
      const auto v = st.as<std::string>();
      if (v == "grid") c.sweep.strategy = SweepStrategy::kGrid;
      else if (v == "random") c.sweep.strategy = SweepStrategy::kRandom;
      else if (v == "oat") c.sweep.strategy = SweepStrategy::kOneAtATime;
      else throw ConfigError("sweep.strategy must be grid, random or oat (got '" + v + "')");
    }
    maybe(s, "budget", c.sweep.budget, "sweep");
    if (const Node p = s["params"]) {
      if (!p.IsMap()) throw ConfigError("sweep.params must be a mapping");
      for (const auto& kv : p) {
        const auto key = kv.first.as<std::string>();
        std::vector<double> values;
        if (kv.second.IsSequence()) {
          for (const auto& v : kv.second) values.push_back(number(v, "sweep.params." + key));
        } else {
          values.push_back(number(kv.second, "sweep.params." + key));
        }
        c.sweep.params.emplace_back(key, std::move(values));
      }
    }
  }
  return c;
}

nlohmann::json layer_json(const LayerHyperparams& hp) {
  return {{"rho_min", hp.rho_min},     {"rho_max", hp.rho_max},     {"theta_min", hp.theta_min},
          {"theta_max", hp.theta_max}, {"tau", hp.tau},             {"omega_b", hp.omega_b},
          {"omega_mix", hp.omega_mix}, {"omega_mixb", hp.omega_mixb}, {"k", hp.k}};
}

nlohmann::json layer_json(const EsnHyperparams& hp) {
  return {{"rho", hp.rho}, {"omega_in", hp.omega_in}, {"omega_b", hp.omega_b}, {"tau", hp.tau}};
}

}  // namespace

DeepHyperparams ModelSpec::paralesn_hyperparams() const {
  DeepHyperparams hp;
  hp.total_units = units;
  hp.layers = layers;
  hp.concat = concat;
  hp.first = layer;
  hp.inter = inter;
  return hp;
}

DeepBaselineHyperparams ModelSpec::baseline_hyperparams() const {
  DeepBaselineHyperparams hp;
  hp.kind = kind == ModelKind::kScr ? BaselineKind::kScr : BaselineKind::kEsn;
  hp.total_units = units;
  hp.layers = layers;
  hp.concat = concat;
  hp.first = esn_layer;
  hp.inter = esn_inter;
  return hp;
}

double parse_number(const std::string& raw) {
  std::string s;
  for (char ch : raw) {
    if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
  }
  auto plain = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw ConfigError("'" + raw + "' is not a number");
    }
    if (used != t.size()) throw ConfigError("'" + raw + "' is not a number");
    return v;
  };
  const auto p = s.find("pi");
  if (p == std::string::npos) return plain(s);
  std::string head = s.substr(0, p);
  if (!head.empty() && head.back() == '*') head.pop_back();
  const double factor = head.empty() ? 1.0 : plain(head);
  const std::string tail = s.substr(p + 2);
  double divisor = 1.0;
  if (!tail.empty()) {
    if (tail.front() != '/') throw ConfigError("'" + raw + "' is not a number");
    divisor = plain(tail.substr(1));
  }
  return factor * kPi / divisor;
}

void apply_param(ExperimentConfig& c, const std::string& key, double v) {
  const Field f = split_key(key);
  if (f.scope.empty()) {
    if (f.name == "units") c.model.units = as_count(v, key);
    else if (f.name == "layers") c.model.layers = as_count(v, key);
    else if (f.name == "concat") c.model.concat = v != 0.0;
    else throw ConfigError("unknown parameter '" + key + "'");
    return;
  }
  if (f.scope != "layer" && f.scope != "inter") throw ConfigError("unknown parameter '" + key + "'");
  if (is_paralesn(c)) {
    LayerHyperparams& hp = f.scope == "layer" ? c.model.layer : c.model.inter;
    if (f.name == "rho_min") hp.rho_min = v;
    else if (f.name == "rho_max") hp.rho_max = v;
    else if (f.name == "theta_min") hp.theta_min = v;
    else if (f.name == "theta_max") hp.theta_max = v;
    else if (f.name == "tau") hp.tau = v;
    else if (f.name == "omega_b") hp.omega_b = v;
    else if (f.name == "omega_mix") hp.omega_mix = v;
    else if (f.name == "omega_mixb") hp.omega_mixb = v;
    else if (f.name == "k") hp.k = as_count(v, key);
    else throw ConfigError("unknown ParalESN parameter '" + key + "'");
  } else {
    EsnHyperparams& hp = f.scope == "layer" ? c.model.esn_layer : c.model.esn_inter;
    if (f.name == "rho") hp.rho = v;
    else if (f.name == "omega_in") hp.omega_in = v;
    else if (f.name == "omega_b") hp.omega_b = v;
    else if (f.name == "tau") hp.tau = v;
    else throw ConfigError("unknown ESN/SCR parameter '" + key + "'");
  }
}

std::vector<double> listed_values(const ExperimentConfig& c, const std::string& key) {
  const auto* grid = grid_for(c, key);
  return grid ? *grid : std::vector<double>{};
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> tasks{"memcap", "ctxor", "sinmem", "narma",
                                           "mackey_glass", "lorenz96", "csv"};
  static const std::set<std::string> metrics{"auto", "nrmse", "mse", "memory_capacity"};
  if (!tasks.count(task.name)) throw ConfigError("unknown task '" + task.name + "'");
  if (!metrics.count(task.metric)) throw ConfigError("unknown metric '" + task.metric + "'");
  if (task.name == "csv" && task.path.empty()) throw ConfigError("task.path is required for csv");
  if (repeats == 0) throw ConfigError("repeats must be >= 1");
  if (model.units == 0 || model.layers == 0) throw ConfigError("model units and layers must be >= 1");
  if (readout.kind == ReadoutKind::kRidge) {
    if (readout.lambdas.empty()) throw ConfigError("readout.lambdas must not be empty");
    for (double l : readout.lambdas) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("ridge lambdas must be finite and >= 0");
    }
  }
  try {
    if (is_paralesn(*this)) {
      model.paralesn_hyperparams().validate();
    } else {
      model.esn_layer.validate();
      if (model.layers > 1) model.esn_inter.validate();
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (allow_unlisted) return;

  std::vector<std::string> keys{"layers"};
  const std::vector<std::string> names =
      is_paralesn(*this) ? std::vector<std::string>{"rho_min", "rho_max", "theta_min", "theta_max", "tau",
                                                    "omega_b", "omega_mix", "omega_mixb", "k"}
                         : std::vector<std::string>{"rho", "omega_in", "omega_b", "tau"};
  for (const auto& n : names) keys.push_back("layer." + n);
  if (model.layers > 1) {
    for (const auto& n : names) keys.push_back("inter." + n);
  }
  for (const auto& key : keys) {
    const double v = read_param(*this, key);
    const auto* grid = grid_for(*this, key);
    if (grid && !listed(*grid, v)) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      throw ConfigError(key + " = " + buf +
                        " is outside the published search grid (use --allow-unlisted)");
    }
  }
}

ExperimentConfig parse_config(const std::string& text) {
  try {
    return from_node(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return from_node(YAML::LoadFile(path.string()));
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot open config " + path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kParalEsn: return "paralesn";
    case ModelKind::kEsn: return "esn";
    case ModelKind::kScr: return "scr";
  }
  return "?";
}

std::string to_string(ScanMode mode) {
  return mode == ScanMode::kSequential ? "sequential" : "parallel";
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["repeats"] = c.repeats;
  j["mode"] = to_string(c.mode);
  j["allow_unlisted"] = c.allow_unlisted;
  j["task"] = {{"name", c.task.name},
               {"length", c.task.length},
               {"delay", c.task.delay},
               {"order", c.task.order},
               {"horizon", c.task.horizon},
               {"washout", c.task.washout},
               {"path", c.task.path},
               {"train_fraction", c.task.train_fraction},
               {"valid_fraction", c.task.valid_fraction},
               {"clip", c.task.clip},
               {"metric", c.task.metric}};
  j["model"] = {{"kind", to_string(c.model.kind)},
                {"units", c.model.units},
                {"layers", c.model.layers},
                {"concat", c.model.concat}};
  if (is_paralesn(c)) {
    j["model"]["layer"] = layer_json(c.model.layer);
    j["model"]["inter"] = layer_json(c.model.inter);
  } else {
    j["model"]["layer"] = layer_json(c.model.esn_layer);
    j["model"]["inter"] = layer_json(c.model.esn_inter);
  }
  j["readout"] = {{"kind", c.readout.kind == ReadoutKind::kRidge ? "ridge" : "mlp"},
                  {"lambdas", c.readout.lambdas},
                  {"mlp",
                   {{"hidden", c.readout.mlp.hidden},
                    {"learning_rate", c.readout.mlp.learning_rate},
                    {"epochs", c.readout.mlp.epochs},
                    {"patience", c.readout.mlp.patience},
                    {"batch_size", c.readout.mlp.batch_size}}}};
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace paralesn

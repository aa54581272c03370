#include "paralesn/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "paralesn/error.hpp"

namespace paralesn::tasks {

namespace {

Split fractional_split(std::size_t length, std::size_t train_num, std::size_t valid_num,
                       std::size_t den) {
  return {length * train_num / den, length * valid_num / den, length};
}

RealMatrix column(std::span<const double> values) {
  return RealMatrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

RealVector uniform_series(std::size_t length, double lo, double hi, RngStream& rng) {
  RealVector x(length);
  for (auto& v : x) v = rng.uniform(lo, hi);
  return x;
}

std::string to_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ------------------------------------------------------------------ TaskDataset

std::size_t TaskDataset::fit_begin() const noexcept { return std::max(washout, target_valid_from); }

std::pair<std::size_t, std::size_t> TaskDataset::range(SplitPart part) const {
  switch (part) {
    case SplitPart::kTrain:
      return {fit_begin(), split.train_end};
    case SplitPart::kValid:
      return {split.train_end, split.valid_end};
    case SplitPart::kTest:
      return {split.valid_end, split.test_end};
  }
  return {0, 0};
}

RealMatrix TaskDataset::split_targets(SplitPart part) const {
  access->record(part);
  const auto [begin, end] = range(part);
  return targets.slice_rows(begin, end);
}

void TaskDataset::validate() const {
  if (inputs.rows() != targets.rows()) throw ConfigError(name + ": input/target length mismatch");
  if (inputs.cols() == 0 || targets.cols() == 0) throw ConfigError(name + ": empty feature set");
  if (!(split.train_end <= split.valid_end && split.valid_end <= split.test_end &&
        split.test_end <= inputs.rows())) {
    throw ConfigError(name + ": splits must be ordered and within the series");
  }
  if (fit_begin() + 2 > split.train_end) {
    throw ConfigError(name + ": washout leaves fewer than two training rows");
  }
  if (split.valid_end == split.train_end || split.test_end == split.valid_end) {
    throw ConfigError(name + ": empty validation or test split");
  }
}

// ------------------------------------------------------------------ generators

TaskDataset gen_memcap(const MemCapConfig& config, RngStream& rng) {
  const std::size_t T = config.length;
  const std::size_t K = config.max_delay;
  if (K == 0) throw ConfigError("memcap: max_delay must be >= 1");
  if (T <= K + config.washout) throw ConfigError("memcap: length must exceed max_delay + washout");
  const RealVector x = uniform_series(T, config.low, config.high, rng);

  TaskDataset ds;
  ds.name = "memcap";
  ds.inputs = column(x);
  ds.targets = RealMatrix(T, K, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 1; k <= std::min(K, t); ++k) ds.targets(t, k - 1) = x[t - k];
  }
  ds.split = fractional_split(T, 5, 6, 7);
  ds.washout = config.washout;
  ds.target_valid_from = K;
  ds.provenance = {{"task", "memcap"},
                   {"length", std::to_string(T)},
                   {"max_delay", std::to_string(K)},
                   {"low", to_text(config.low)},
                   {"high", to_text(config.high)}};
  ds.validate();
  return ds;
}

TaskDataset gen_ctxor(std::size_t delay, std::size_t length, RngStream& rng, std::size_t washout) {
  if (length <= delay + 1) throw ConfigError("ctxor: length must exceed delay + 1");
  const RealVector x = uniform_series(length, -0.8, 0.8, rng);
  RealVector y(length, 0.0);
  for (std::size_t t = delay + 1; t < length; ++t) {
    const double r = x[t - delay - 1] * x[t - delay];
    y[t] = r * r * (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0));
  }
  TaskDataset ds;
  ds.name = "ctxor" + std::to_string(delay);
  ds.inputs = column(x);
  ds.targets = column(y);
  ds.split = fractional_split(length, 5, 6, 7);
  ds.washout = washout;
  ds.target_valid_from = delay + 1;
  ds.provenance = {{"task", "ctxor"}, {"delay", std::to_string(delay)}, {"length", std::to_string(length)}};
  ds.validate();
  return ds;
}

TaskDataset gen_sinmem(std::size_t delay, std::size_t length, RngStream& rng, std::size_t washout) {
  if (length <= delay) throw ConfigError("sinmem: length must exceed delay");
  const RealVector x = uniform_series(length, -0.8, 0.8, rng);
  RealVector y(length, 0.0);
  for (std::size_t t = delay; t < length; ++t) y[t] = std::sin(std::numbers::pi * x[t - delay]);
  TaskDataset ds;
  ds.name = "sinmem" + std::to_string(delay);
  ds.inputs = column(x);
  ds.targets = column(y);
  ds.split = fractional_split(length, 5, 6, 7);
  ds.washout = washout;
  ds.target_valid_from = delay;
  ds.provenance = {{"task", "sinmem"}, {"delay", std::to_string(delay)}, {"length", std::to_string(length)}};
  ds.validate();
  return ds;
}

RealVector narma_series(std::span<const double> inputs, std::size_t order) {
  const std::size_t T = inputs.size();
  RealVector y(T, 0.0);
  // Index s (0-based) holds time s + 1; anything at time <= 0 is zero.
  auto x_at = [&](std::ptrdiff_t time) { return time >= 1 ? inputs[static_cast<std::size_t>(time - 1)] : 0.0; };
  auto y_at = [&](std::ptrdiff_t time) { return time >= 1 ? y[static_cast<std::size_t>(time - 1)] : 0.0; };
  const auto d = static_cast<std::ptrdiff_t>(order);
  for (std::ptrdiff_t t = 1; t <= static_cast<std::ptrdiff_t>(T); ++t) {
    double window = 0.0;
    for (std::ptrdiff_t i = 1; i <= d; ++i) window += y_at(t - i);
    const double prev = y_at(t - 1);
    y[static_cast<std::size_t>(t - 1)] =
        0.3 * prev + 0.01 * prev * window + 1.5 * x_at(t - d) * x_at(t - 1) + 0.1;
  }
  return y;
}

TaskDataset gen_narma(const NarmaConfig& config, RngSpec spec) {
  if (config.length <= config.order) throw ConfigError("narma: length must exceed the order");
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    RngStream rng(spec, static_cast<std::uint64_t>(attempt));
    const RealVector x = uniform_series(config.length, 0.0, 0.5, rng);
    const RealVector y = narma_series(x, config.order);
    const bool diverged = std::any_of(y.begin(), y.end(), [&](double v) {
      return !std::isfinite(v) || std::abs(v) > config.divergence_bound;
    });
    if (diverged) continue;
    TaskDataset ds;
    ds.name = "narma" + std::to_string(config.order);
    ds.inputs = column(x);
    ds.targets = column(y);
    ds.split = fractional_split(config.length, 2, 3, 4);
    ds.washout = config.washout;
    ds.provenance = {{"task", "narma"},
                     {"order", std::to_string(config.order)},
                     {"length", std::to_string(config.length)},
                     {"attempt", std::to_string(attempt)}};
    ds.validate();
    return ds;
  }
  throw ConfigError("narma: series diverged in " + std::to_string(config.max_attempts) +
                    " consecutive draws");
}

RealVector mackey_glass_series(const MackeyGlassConfig& c, std::size_t count) {
  if (c.dt <= 0.0 || c.subsample == 0) throw ConfigError("mackey-glass: dt and subsample must be positive");
  const auto lag = static_cast<std::size_t>(std::llround(c.delay / c.dt));
  if (lag == 0) throw ConfigError("mackey-glass: delay shorter than one step");
  const std::size_t steps = (c.transient + count) * c.subsample;

  // x[i] is the state at step i - lag; the first lag + 1 entries are history.
  RealVector x(lag + 1 + steps, c.history);
  auto rhs = [&](double now, double lagged) {
    return c.beta * lagged / (1.0 + std::pow(lagged, c.exponent)) - c.gamma * now;
  };
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t i = lag + s;
    const double now = x[i];
    const double lag0 = x[i - lag];
    const double lag1 = x[i - lag + 1];
    const double lag_half = 0.5 * (lag0 + lag1);
    const double k1 = rhs(now, lag0);
    const double k2 = rhs(now + 0.5 * c.dt * k1, lag_half);
    const double k3 = rhs(now + 0.5 * c.dt * k2, lag_half);
    const double k4 = rhs(now + c.dt * k3, lag1);
    x[i + 1] = now + c.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  RealVector out(count);
  for (std::size_t n = 0; n < count; ++n) {
    out[n] = x[lag + (c.transient + n + 1) * c.subsample];
  }
  return out;
}

TaskDataset gen_mackey_glass(const MackeyGlassConfig& config) {
  if (config.length <= config.washout + 2) throw ConfigError("mackey-glass: series too short");
  const RealVector s = mackey_glass_series(config, config.length + config.horizon);
  TaskDataset ds;
  ds.name = config.horizon == 1 ? "mg" : "mg" + std::to_string(config.horizon);
  ds.inputs = column(std::span<const double>(s).first(config.length));
  ds.targets = column(std::span<const double>(s).subspan(config.horizon, config.length));
  ds.split = fractional_split(config.length, 2, 3, 4);
  ds.washout = config.washout;
  ds.provenance = {{"task", "mackey_glass"},
                   {"length", std::to_string(config.length)},
                   {"horizon", std::to_string(config.horizon)},
                   {"dt", to_text(config.dt)},
                   {"subsample", std::to_string(config.subsample)},
                   {"history", to_text(config.history)},
                   {"transient", std::to_string(config.transient)}};
  ds.validate();
  return ds;
}

RealVector lorenz96_derivative(std::span<const double> x, double forcing) {
  const std::size_t n = x.size();
  if (n < 4) throw InvalidArgument("lorenz96: at least 4 dimensions required");
  RealVector dx(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = x[(i + n - 1) % n];
    const double next = x[(i + 1) % n];
    const double prev2 = x[(i + n - 2) % n];
    dx[i] = prev * (next - prev2) - x[i] + forcing;
  }
  return dx;
}

RealVector lorenz96_rk4_step(std::span<const double> x, double dt, double forcing) {
  const std::size_t n = x.size();
  RealVector tmp(n), out(n);
  const RealVector k1 = lorenz96_derivative(x, forcing);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  const RealVector k2 = lorenz96_derivative(tmp, forcing);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  const RealVector k3 = lorenz96_derivative(tmp, forcing);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
  const RealVector k4 = lorenz96_derivative(tmp, forcing);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

RealMatrix lorenz96_trajectory(const Lorenz96Config& c, std::size_t count) {
  RealVector state(c.dims, c.forcing);
  state[0] += 0.008;
  for (std::size_t s = 0; s < c.transient; ++s) state = lorenz96_rk4_step(state, c.dt, c.forcing);
  RealMatrix out(count, c.dims);
  for (std::size_t t = 0; t < count; ++t) {
    state = lorenz96_rk4_step(state, c.dt, c.forcing);
    std::copy(state.begin(), state.end(), out.row(t).begin());
  }
  return out;
}

TaskDataset gen_lorenz96(const Lorenz96Config& config) {
  if (config.length <= config.washout + 2) throw ConfigError("lorenz96: series too short");
  const RealMatrix traj = lorenz96_trajectory(config, config.length + config.horizon);
  TaskDataset ds;
  ds.name = "lorenz" + std::to_string(config.horizon);
  ds.inputs = traj.slice_rows(0, config.length);
  ds.targets = traj.slice_rows(config.horizon, config.horizon + config.length);
  ds.split = fractional_split(config.length, 1, 2, 3);
  ds.washout = config.washout;
  ds.provenance = {{"task", "lorenz96"},
                   {"length", std::to_string(config.length)},
                   {"horizon", std::to_string(config.horizon)},
                   {"dt", to_text(config.dt)},
                   {"transient", std::to_string(config.transient)}};
  ds.validate();
  return ds;
}

// -------------------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

CsvTable read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open CSV file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
  CsvTable table;
  for (auto& h : split_line(line)) table.header.push_back(trim(h));
  const std::size_t cols = table.header.size();

  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != cols) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string cell = trim(cells[c]);
      double v = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last) {
        throw ParseError(path.string() + ": non-numeric cell '" + cell + "' at row " +
                         std::to_string(row) + ", column " + std::to_string(c + 1) + " (" +
                         table.header[c] + ")");
      }
      values.push_back(v);
    }
  }
  table.values = RealMatrix(row, cols, std::move(values));
  return table;
}

void write_csv(const std::filesystem::path& path, std::span<const std::string> header,
               const RealMatrix& values) {
  if (header.size() != values.cols()) throw ShapeError("write_csv: header width mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot write CSV file " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < values.cols(); ++c) out << (c ? "," : "") << values(r, c);
    out << '\n';
  }
}

TaskDataset csv_forecasting_from_table(const CsvTable& table, const CsvForecastConfig& config) {
  const std::size_t n = table.values.rows();
  const std::size_t f = table.values.cols();
  if (f == 0) throw ConfigError("csv forecasting: no feature columns");
  if (config.train_fraction <= 0.0 || config.valid_fraction <= 0.0 ||
      config.train_fraction + config.valid_fraction >= 1.0) {
    throw ConfigError("csv forecasting: split fractions must be positive and sum below 1");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::floor(config.valid_fraction * static_cast<double>(n)));
  if (n_train <= config.delay + config.washout + 2 || n_train + n_valid >= n) {
    throw ConfigError("csv forecasting: series of " + std::to_string(n) +
                      " rows is too short for delay " + std::to_string(config.delay));
  }

  RealMatrix series = table.values;
  for (std::size_t c = 0; c < f; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) mean += series(r, c);
    mean /= static_cast<double>(n_train);
    double var = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) var += (series(r, c) - mean) * (series(r, c) - mean);
    const double scale = std::max(std::sqrt(var / static_cast<double>(n_train)), 1e-8);
    for (std::size_t r = 0; r < n; ++r) series(r, c) = (series(r, c) - mean) / scale;
    for (std::size_t r = 0; r < n_train; ++r) {
      series(r, c) = std::clamp(series(r, c), -config.clip, config.clip);
    }
  }

  const std::size_t T = n - config.delay;
  TaskDataset ds;
  ds.name = "csv";
  ds.inputs = series.slice_rows(0, T);
  ds.targets = series.slice_rows(config.delay, n);
  ds.split = {n_train - config.delay, n_train + n_valid - config.delay, T};
  ds.washout = config.washout;
  ds.provenance = {{"task", "csv"},
                   {"delay", std::to_string(config.delay)},
                   {"rows", std::to_string(n)},
                   {"train_fraction", to_text(config.train_fraction)},
                   {"valid_fraction", to_text(config.valid_fraction)},
                   {"clip", to_text(config.clip)}};
  ds.validate();
  return ds;
}

TaskDataset load_csv_forecasting(const std::filesystem::path& path, const CsvForecastConfig& config) {
  TaskDataset ds = csv_forecasting_from_table(read_numeric_csv(path), config);
  ds.provenance["path"] = path.string();
  return ds;
}

}  // namespace paralesn::tasks

#include "paralesn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace paralesn {

namespace {

void matvec(const RealMatrix& a, std::span<const Complex> x, std::span<Complex> y) {
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = a.row(i).data();
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      re += row[j] * x[j].real();
      im += row[j] * x[j].imag();
    }
    y[i] = {re, im};
  }
}

Complex inner(std::span<const Complex> a, std::span<const Complex> b) {
  Complex acc{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

RealMatrix uniform_matrix(std::size_t rows, std::size_t cols, double scale, RngStream& rng) {
  RealMatrix m(rows, cols);
  for (auto& x : m.flat()) x = rng.uniform(-scale, scale);
  return m;
}

RealVector uniform_vector(std::size_t n, double scale, RngStream& rng) {
  RealVector v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

void check_inputs(std::size_t n_in, const RealMatrix& inputs, std::size_t n,
                  std::span<const double> h0) {
  if (inputs.cols() != n_in) {
    throw ShapeError("baseline forward: input width " + std::to_string(inputs.cols()) +
                     " != " + std::to_string(n_in));
  }
  if (!h0.empty() && h0.size() != n) throw ShapeError("baseline forward: h0 width");
}

}  // namespace

double estimate_spectral_radius(const RealMatrix& matrix, std::size_t max_iters, double tol,
                                std::uint64_t seed) {
  const std::size_t n = matrix.rows();
  if (n == 0 || matrix.cols() != n) throw ShapeError("estimate_spectral_radius: square matrix required");

  RngStream rng(RngSpec{seed});
  ComplexVector y0(n), y1(n), y2(n);
  for (auto& z : y0) z = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  double nrm = norm2(y0);
  for (auto& z : y0) z /= nrm;
  matvec(matrix, y0, y1);

  double estimate = 0.0;
  double previous = -1.0;
  int stable = 0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const double n1 = norm2(y1);
    if (n1 == 0.0) return 0.0;
    matvec(matrix, y1, y2);

    const Complex g11 = inner(y1, y1), g12 = inner(y1, y0);
    const Complex g21 = inner(y0, y1), g22 = inner(y0, y0);
    const double sin2 = 1.0 - std::norm(g21) / (g11.real() * g22.real());
    if (sin2 < 1e-8) {
      // Iterates are parallel: a single dominant eigenvalue.
      estimate = std::abs(inner(y1, y2) / g11);
    } else {
      const Complex r1 = inner(y1, y2), r2 = inner(y0, y2);
      const Complex det = g11 * g22 - g12 * g21;
      const Complex a = (r1 * g22 - g12 * r2) / det;
      const Complex b = (g11 * r2 - g21 * r1) / det;
      const Complex disc = std::sqrt(a * a + 4.0 * b);
      estimate = std::max(std::abs((a + disc) / 2.0), std::abs((a - disc) / 2.0));
    }

    if (std::abs(estimate - previous) <= tol * std::max(estimate, 1e-300)) {
      if (++stable >= 3) return estimate;
    } else {
      stable = 0;
    }
    previous = estimate;

    for (std::size_t i = 0; i < n; ++i) {
      y0[i] = y1[i] / n1;
      y1[i] = y2[i] / n1;
    }
  }
  throw ConvergenceError("estimate_spectral_radius: no convergence after " +
                             std::to_string(max_iters) + " iterations",
                         estimate);
}

void EsnHyperparams::validate() const {
  if (n_h == 0) throw InvalidArgument("esn hyperparams: n_h must be >= 1");
  if (!(rho >= 0.0)) throw InvalidArgument("esn hyperparams: rho must be >= 0");
  if (omega_in < 0.0 || omega_b < 0.0) throw InvalidArgument("esn hyperparams: scalings must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("esn hyperparams: tau must lie in (0, 1]");
}

EsnLayer EsnLayer::sample(const EsnHyperparams& hp, std::size_t n_in, RngStream& rng) {
  hp.validate();
  EsnLayer layer;
  layer.w_h = uniform_matrix(hp.n_h, hp.n_h, 1.0, rng);
  const double radius = estimate_spectral_radius(layer.w_h, 20000, 1e-6);
  if (radius > 0.0) {
    for (auto& x : layer.w_h.flat()) x *= hp.rho / radius;
  }
  layer.w_in = uniform_matrix(hp.n_h, n_in, hp.omega_in, rng);
  layer.bias = uniform_vector(hp.n_h, hp.omega_b, rng);
  layer.tau = hp.tau;
  return layer;
}

ScrLayer ScrLayer::sample(const EsnHyperparams& hp, std::size_t n_in, RngStream& rng) {
  hp.validate();
  ScrLayer layer;
  layer.rho = hp.rho;
  layer.w_in = uniform_matrix(hp.n_h, n_in, hp.omega_in, rng);
  layer.bias = uniform_vector(hp.n_h, hp.omega_b, rng);
  layer.tau = hp.tau;
  return layer;
}

RealMatrix ScrLayer::ring_matrix() const {
  const std::size_t n = units();
  RealMatrix w(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) w(i, (i + n - 1) % n) = rho;
  return w;
}

void cyclic_shift(std::span<const double> in, std::span<double> out) {
  const std::size_t n = in.size();
  if (out.size() != n) throw ShapeError("cyclic_shift: width mismatch");
  if (n == 0) return;
  out[0] = in[n - 1];
  std::copy(in.begin(), in.end() - 1, out.begin() + 1);
}

RealMatrix esn_forward(const EsnLayer& layer, const RealMatrix& inputs,
                       std::span<const double> h0) {
  const std::size_t n = layer.units();
  check_inputs(layer.input_width(), inputs, n, h0);
  const std::size_t T = inputs.rows();
  RealMatrix out(T, n);
  RealVector prev(n, 0.0);
  if (!h0.empty()) std::copy(h0.begin(), h0.end(), prev.begin());
  const double tau = layer.tau;
  for (std::size_t t = 0; t < T; ++t) {
    const double* x = inputs.row(t).data();
    double* h = out.row(t).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* wh = layer.w_h.row(i).data();
      const double* wi = layer.w_in.row(i).data();
      double acc = layer.bias[i];
      for (std::size_t j = 0; j < n; ++j) acc += wh[j] * prev[j];
      for (std::size_t j = 0; j < inputs.cols(); ++j) acc += wi[j] * x[j];
      h[i] = (1.0 - tau) * prev[i] + tau * std::tanh(acc);
    }
    std::copy(h, h + n, prev.begin());
  }
  return out;
}

RealMatrix scr_forward(const ScrLayer& layer, const RealMatrix& inputs,
                       std::span<const double> h0) {
  const std::size_t n = layer.units();
  check_inputs(layer.input_width(), inputs, n, h0);
  const std::size_t T = inputs.rows();
  RealMatrix out(T, n);
  RealVector prev(n, 0.0), shifted(n);
  if (!h0.empty()) std::copy(h0.begin(), h0.end(), prev.begin());
  const double tau = layer.tau;
  for (std::size_t t = 0; t < T; ++t) {
    cyclic_shift(prev, shifted);
    const double* x = inputs.row(t).data();
    double* h = out.row(t).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* wi = layer.w_in.row(i).data();
      double acc = layer.rho * shifted[i] + layer.bias[i];
      for (std::size_t j = 0; j < inputs.cols(); ++j) acc += wi[j] * x[j];
      h[i] = (1.0 - tau) * prev[i] + tau * std::tanh(acc);
    }
    std::copy(h, h + n, prev.begin());
  }
  return out;
}

DeepBaseline::DeepBaseline(std::vector<BaselineLayer> layers, bool concat)
    : layers_(std::move(layers)), concat_(concat) {
  if (layers_.empty()) throw InvalidArgument("DeepBaseline: no layers");
  auto units = [](const BaselineLayer& l) { return std::visit([](const auto& x) { return x.units(); }, l); };
  auto width = [](const BaselineLayer& l) {
    return std::visit([](const auto& x) { return x.input_width(); }, l);
  };
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (width(layers_[l]) != units(layers_[l - 1])) {
      throw ShapeError("DeepBaseline: layer " + std::to_string(l + 1) +
                       " input width must equal previous layer width");
    }
  }
}

DeepBaseline DeepBaseline::sample(const DeepBaselineHyperparams& hp, std::size_t n_in,
                                  RngStream& rng) {
  if (hp.layers == 0) throw InvalidArgument("DeepBaseline: layers must be >= 1");
  std::vector<std::size_t> units;
  if (hp.concat) {
    if (hp.total_units < hp.layers) throw InvalidArgument("DeepBaseline: fewer units than layers");
    units.assign(hp.layers, hp.total_units / hp.layers);
    units.front() += hp.total_units % hp.layers;
  } else {
    units.assign(hp.layers, hp.total_units);
  }
  std::vector<BaselineLayer> layers;
  std::size_t width = n_in;
  for (std::size_t l = 0; l < hp.layers; ++l) {
    EsnHyperparams lhp = l == 0 ? hp.first : hp.inter;
    lhp.n_h = units[l];
    if (hp.kind == BaselineKind::kEsn) {
      layers.emplace_back(EsnLayer::sample(lhp, width, rng));
    } else {
      layers.emplace_back(ScrLayer::sample(lhp, width, rng));
    }
    width = units[l];
  }
  return DeepBaseline(std::move(layers), hp.concat);
}

std::size_t DeepBaseline::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += std::visit([](const auto& x) { return x.parameter_count(); }, l);
  return n;
}

std::size_t DeepBaseline::feature_width() const {
  auto units = [](const BaselineLayer& l) { return std::visit([](const auto& x) { return x.units(); }, l); };
  if (!concat_) return units(layers_.back());
  std::size_t w = 0;
  for (const auto& l : layers_) w += units(l);
  return w;
}

std::vector<RealMatrix> DeepBaseline::forward(const RealMatrix& inputs,
                                              RealMatrix& features) const {
  std::vector<RealMatrix> states;
  states.reserve(layers_.size());
  const RealMatrix* current = &inputs;
  for (const auto& layer : layers_) {
    if (const auto* esn = std::get_if<EsnLayer>(&layer)) {
      states.push_back(esn_forward(*esn, *current));
    } else {
      states.push_back(scr_forward(std::get<ScrLayer>(layer), *current));
    }
    current = &states.back();
  }
  features = concat_ && states.size() > 1 ? hconcat(states) : states.back();
  return states;
}

}  // namespace paralesn

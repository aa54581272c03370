#include "paralesn/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace paralesn {

namespace {

StateSequence run_scan(const AffineSequence& seq, std::span<const Complex> h0,
                       const ForwardOptions& opts) {
  if (opts.mode == ScanMode::kSequential) return scan_sequential(seq, h0);
  const std::size_t chunk =
      opts.chunk_size > 0 ? opts.chunk_size : default_chunk_size(seq.length());
  return scan_parallel(seq, h0, chunk, opts.workers);
}

int worker_count(const ForwardOptions& opts) {
  if (opts.mode == ScanMode::kSequential) return 1;
  return opts.workers > 0 ? opts.workers : default_workers();
}

}  // namespace

void LayerHyperparams::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("layer hyperparams: " + msg); };
  if (n_h == 0) fail("n_h must be >= 1");
  if (!(rho_min >= 0.0 && rho_max < 1.0)) fail("rho range must lie in [0, 1)");
  if (rho_min > rho_max) fail("rho_min > rho_max");
  if (!(theta_min >= 0.0 && theta_max <= 2.0 * std::numbers::pi + 1e-12)) {
    fail("theta range must lie in [0, 2pi]");
  }
  if (theta_min > theta_max) fail("theta_min > theta_max");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (omega_b < 0.0 || omega_mix < 0.0 || omega_mixb < 0.0) fail("scalings must be >= 0");
  if (k == 0 || k % 2 == 0) fail("kernel size must be odd");
  if (k > n_h) fail("kernel size exceeds n_h");
}

ComplexVector init_diag_transition(const LayerHyperparams& hp, RngStream& rng) {
  hp.validate();
  const std::size_t n = hp.n_h;
  std::vector<double> radius(n), phase(n);
  for (auto& r : radius) r = rng.uniform(hp.rho_min, hp.rho_max);
  for (auto& p : phase) p = rng.uniform(hp.theta_min, hp.theta_max);
  ComplexVector lambda_bar(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex lambda = std::polar(radius[i], phase[i]);
    lambda_bar[i] = Complex(1.0 - hp.tau, 0.0) + hp.tau * lambda;
  }
  return lambda_bar;
}

InputWeights init_input_weights(const LayerHyperparams& hp, std::span<const Complex> lambda_bar,
                                std::size_t n_in, RngStream& rng) {
  if (lambda_bar.size() != hp.n_h) throw ShapeError("init_input_weights: lambda_bar width");
  if (n_in == 0) throw InvalidArgument("init_input_weights: input width must be >= 1");
  std::vector<double> row_scale(hp.n_h);
  for (std::size_t i = 0; i < hp.n_h; ++i) {
    const double radicand = 1.0 - std::norm(lambda_bar[i]);
    if (!(radicand > 0.0)) {
      throw DomainError("init_input_weights: |lambda_bar_" + std::to_string(i) + "| >= 1");
    }
    row_scale[i] = std::sqrt(radicand);
  }
  if (hp.input == InputKind::kDense) {
    ComplexMatrix w = sample_uniform_complex(hp.n_h, n_in, rng);
    for (std::size_t i = 0; i < hp.n_h; ++i) {
      for (auto& x : w.row(i)) x *= row_scale[i];
    }
    return DenseInput{std::move(w)};
  }
  ComplexMatrix w = sample_uniform_complex(hp.n_h, 1, rng);
  ComplexVector ring(hp.n_h);
  for (std::size_t i = 0; i < hp.n_h; ++i) ring[i] = w(i, 0) * row_scale[i];
  return RingInput{std::move(ring)};
}

ParalEsnLayer::ParalEsnLayer(ComplexVector lambda_bar, double tau, InputWeights input,
                             std::size_t input_width, ComplexVector bias, ComplexVector mix_kernel,
                             Complex mix_bias)
    : lambda_bar_(std::move(lambda_bar)),
      tau_(tau),
      input_(std::move(input)),
      input_width_(input_width),
      bias_(std::move(bias)),
      mix_kernel_(std::move(mix_kernel)),
      mix_bias_(mix_bias) {
  const std::size_t n = lambda_bar_.size();
  if (n == 0) throw InvalidArgument("ParalEsnLayer: no units");
  if (!(tau_ > 0.0 && tau_ <= 1.0)) throw InvalidArgument("ParalEsnLayer: tau must lie in (0, 1]");
  if (input_width_ == 0) throw InvalidArgument("ParalEsnLayer: input width must be >= 1");
  if (bias_.size() != n) throw ShapeError("ParalEsnLayer: bias width");
  if (mix_kernel_.empty() || mix_kernel_.size() % 2 == 0) {
    throw InvalidArgument("ParalEsnLayer: mixing kernel size must be odd");
  }
  if (const auto* dense = std::get_if<DenseInput>(&input_)) {
    if (dense->weights.rows() != n || dense->weights.cols() != input_width_) {
      throw ShapeError("ParalEsnLayer: dense input must be N_h x N_in");
    }
  } else if (std::get<RingInput>(input_).weights.size() != n) {
    throw ShapeError("ParalEsnLayer: ring input must store N_h weights");
  }
}

ParalEsnLayer ParalEsnLayer::sample(const LayerHyperparams& hp, std::size_t n_in,
                                    RngStream& rng) {
  hp.validate();
  ComplexVector lambda_bar = init_diag_transition(hp, rng);
  InputWeights input = init_input_weights(hp, lambda_bar, n_in, rng);

  ComplexMatrix raw_bias = sample_uniform_complex(hp.n_h, 1, rng);
  ComplexVector bias(hp.n_h);
  for (std::size_t i = 0; i < hp.n_h; ++i) bias[i] = raw_bias(i, 0) * hp.omega_b;

  ComplexMatrix raw_kernel = sample_uniform_complex(1, hp.k, rng);
  ComplexVector kernel(hp.k);
  for (std::size_t j = 0; j < hp.k; ++j) kernel[j] = raw_kernel(0, j) * hp.omega_mix;

  const Complex mix_bias = sample_uniform_complex(1, 1, rng)(0, 0) * hp.omega_mixb;
  return ParalEsnLayer(std::move(lambda_bar), hp.tau, std::move(input), n_in, std::move(bias),
                       std::move(kernel), mix_bias);
}

double ParalEsnLayer::max_modulus() const {
  double r = 0.0;
  for (const auto& l : lambda_bar_) r = std::max(r, std::abs(l));
  return r;
}

std::size_t ParalEsnLayer::parameter_count() const {
  const std::size_t n = units();
  const std::size_t input_count = std::holds_alternative<DenseInput>(input_)
                                      ? std::get<DenseInput>(input_).weights.size()
                                      : std::get<RingInput>(input_).weights.size();
  return n + input_count + n + mix_kernel_.size() + 1;
}

void ParalEsnLayer::project_input(std::span<const double> x, std::span<Complex> out) const {
  if (x.size() != input_width_) {
    throw ShapeError("ParalEsnLayer: input width " + std::to_string(x.size()) + " != " +
                     std::to_string(input_width_));
  }
  const std::size_t n = units();
  if (const auto* dense = std::get_if<DenseInput>(&input_)) {
    for (std::size_t i = 0; i < n; ++i) {
      const Complex* w = dense->weights.row(i).data();
      Complex acc{0.0, 0.0};
      for (std::size_t j = 0; j < x.size(); ++j) acc += w[j] * x[j];
      out[i] = acc;
    }
  } else {
    const auto& w = std::get<RingInput>(input_).weights;
    const std::size_t m = x.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = w[i] * x[(i + m - 1) % m];
  }
}

AffineSequence layer_drive(const ParalEsnLayer& layer, const RealMatrix& inputs, int workers) {
  if (inputs.cols() != layer.input_width()) {
    throw ShapeError("layer_drive: input width " + std::to_string(inputs.cols()) + " != " +
                     std::to_string(layer.input_width()));
  }
  const std::size_t T = inputs.rows();
  const std::size_t n = layer.units();
  AffineSequence seq{ComplexMatrix(1, n), ComplexMatrix(T, n)};
  std::copy(layer.lambda_bar().begin(), layer.lambda_bar().end(), seq.gains.row(0).begin());
  const double tau = layer.tau();
  const auto& bias = layer.bias();
#pragma omp parallel for num_threads(std::max(workers, 1)) schedule(static)
  for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(T); ++ti) {
    const auto t = static_cast<std::size_t>(ti);
    auto d = seq.drives.row(t);
    layer.project_input(inputs.row(t), d);
    for (std::size_t i = 0; i < n; ++i) d[i] = tau * (d[i] + bias[i]);
  }
  return seq;
}

StateSequence layer_states(const ParalEsnLayer& layer, const RealMatrix& inputs,
                           const ForwardOptions& opts,
                           std::optional<std::span<const Complex>> h0) {
  const AffineSequence seq = layer_drive(layer, inputs, worker_count(opts));
  if (h0) {
    if (h0->size() != layer.units()) throw ShapeError("layer_states: h0 width");
    return run_scan(seq, *h0, opts);
  }
  const ComplexVector zero(layer.units(), Complex{0.0, 0.0});
  return run_scan(seq, zero, opts);
}

RealMatrix mix(const ParalEsnLayer& layer, const StateSequence& states, int workers) {
  const std::size_t n = layer.units();
  const std::size_t k = layer.kernel_size();
  if (states.cols() != n) throw ShapeError("mix: state width != N_h");
  if (k > n) throw InvalidArgument("mix: kernel size exceeds N_h");
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  const auto& kernel = layer.mix_kernel();
  const double bias_re = layer.mix_bias().real();
  const std::size_t T = states.rows();
  RealMatrix out(T, n);
#pragma omp parallel for num_threads(std::max(workers, 1)) schedule(static)
  for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(T); ++ti) {
    const auto t = static_cast<std::size_t>(ti);
    const Complex* h = states.row(t).data();
    double* z = out.row(t).data();
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      double acc = bias_re;
      for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(k); ++j) {
        const std::ptrdiff_t src = i + j - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        const Complex& w = kernel[static_cast<std::size_t>(j)];
        const Complex& v = h[src];
        acc += w.real() * v.real() - w.imag() * v.imag();
      }
      z[i] = std::clamp(std::tanh(acc), -kMixBound, kMixBound);
    }
  }
  return out;
}

std::vector<std::size_t> split_units(std::size_t total, std::size_t layers, bool concat) {
  if (layers == 0) throw InvalidArgument("split_units: at least one layer required");
  if (!concat) return std::vector<std::size_t>(layers, total);
  if (total < layers) throw InvalidArgument("split_units: fewer units than layers");
  std::vector<std::size_t> units(layers, total / layers);
  units.front() += total % layers;
  return units;
}

void DeepHyperparams::validate() const {
  if (layers == 0) throw InvalidArgument("deep hyperparams: layers must be >= 1");
  if (total_units == 0) throw InvalidArgument("deep hyperparams: total units must be >= 1");
  const auto units = split_units(total_units, layers, concat);
  for (std::size_t l = 0; l < layers; ++l) {
    LayerHyperparams hp = l == 0 ? first : inter;
    hp.n_h = units[l];
    hp.validate();
  }
}

DeepParalEsn::DeepParalEsn(std::vector<ParalEsnLayer> layers, bool concat)
    : layers_(std::move(layers)), concat_(concat) {
  if (layers_.empty()) throw InvalidArgument("DeepParalEsn: no layers");
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (layers_[l].input_width() != layers_[l - 1].units()) {
      throw ShapeError("DeepParalEsn: layer " + std::to_string(l + 1) +
                       " input width must equal previous layer width");
    }
  }
}

DeepParalEsn DeepParalEsn::sample(const DeepHyperparams& hp, std::size_t n_in, RngStream& rng) {
  hp.validate();
  const auto units = split_units(hp.total_units, hp.layers, hp.concat);
  std::vector<ParalEsnLayer> layers;
  layers.reserve(hp.layers);
  std::size_t width = n_in;
  for (std::size_t l = 0; l < hp.layers; ++l) {
    LayerHyperparams lhp = l == 0 ? hp.first : hp.inter;
    lhp.n_h = units[l];
    lhp.input = l == 0 ? InputKind::kDense : InputKind::kRing;
    layers.push_back(ParalEsnLayer::sample(lhp, width, rng));
    width = units[l];
  }
  return DeepParalEsn(std::move(layers), hp.concat);
}

std::size_t DeepParalEsn::feature_width() const {
  if (!concat_) return layers_.back().units();
  std::size_t w = 0;
  for (const auto& l : layers_) w += l.units();
  return w;
}

std::size_t DeepParalEsn::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

ForwardResult DeepParalEsn::forward(const RealMatrix& inputs, const ForwardOptions& opts,
                                    std::span<const ComplexVector> h0) const {
  if (!h0.empty() && h0.size() != layers_.size()) {
    throw ShapeError("DeepParalEsn::forward: one h0 per layer required");
  }
  const int workers = worker_count(opts);
  ForwardResult result;
  result.mixed.reserve(layers_.size());
  const RealMatrix* current = &inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    std::optional<std::span<const Complex>> init;
    if (!h0.empty()) init = std::span<const Complex>(h0[l]);
    const StateSequence states = layer_states(layers_[l], *current, opts, init);
    result.mixed.push_back(mix(layers_[l], states, workers));
    current = &result.mixed.back();
  }
  if (concat_ && layers_.size() > 1) {
    result.features = hconcat(result.mixed);
  } else {
    result.features = result.mixed.back();
  }
  return result;
}

}  // namespace paralesn

#pragma once

#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "paralesn/rng.hpp"
#include "paralesn/scan.hpp"
#include "paralesn/tensor.hpp"

namespace paralesn {

enum class ScanMode { kSequential, kParallel };

struct ForwardOptions {
  ScanMode mode = ScanMode::kSequential;
  int workers = 0;             // <= 0: all available
  std::size_t chunk_size = 0;  // 0: default_chunk_size(T)
};

enum class InputKind { kDense, kRing };

/// Initialization hyperparameters of one diagonal-recurrence layer.
struct LayerHyperparams {
  std::size_t n_h = 128;
  double rho_min = 0.0;
  double rho_max = 0.9;
  double theta_min = 0.0;
  double theta_max = 2.0 * std::numbers::pi;
  double tau = 1.0;
  double omega_b = 0.0;
  double omega_mix = 1.0;
  double omega_mixb = 0.0;
  std::size_t k = 3;
  InputKind input = InputKind::kDense;

  /// Throws InvalidArgument on out-of-domain values.
  void validate() const;
  bool operator==(const LayerHyperparams&) const = default;
};

/// Dense N_h x N_in input matrix (first layer).
struct DenseInput {
  ComplexMatrix weights;
  bool operator==(const DenseInput&) const = default;
};

/// Ring input: output_i = w_i * input_{(i-1) mod N_in}. Only the N_h
/// scaling coefficients are stored.
struct RingInput {
  ComplexVector weights;
  bool operator==(const RingInput&) const = default;
};

using InputWeights = std::variant<DenseInput, RingInput>;

/// lambda_bar_i = (1 - tau) + tau * rho_i * exp(i theta_i), with all radii
/// drawn first, then all phases.
ComplexVector init_diag_transition(const LayerHyperparams& hp, RngStream& rng);

/// Uniform complex entries, row i scaled by sqrt(1 - |lambda_bar_i|^2).
InputWeights init_input_weights(const LayerHyperparams& hp, std::span<const Complex> lambda_bar,
                                std::size_t n_in, RngStream& rng);

/// Frozen parameters of one ParalESN layer.
class ParalEsnLayer {
 public:
  ParalEsnLayer(ComplexVector lambda_bar, double tau, InputWeights input, std::size_t input_width,
                ComplexVector bias, ComplexVector mix_kernel, Complex mix_bias);

  /// Draws a layer in the documented order: transition, input weights, bias,
  /// mixing kernel, mixing bias.
  static ParalEsnLayer sample(const LayerHyperparams& hp, std::size_t n_in, RngStream& rng);

  std::size_t units() const noexcept { return lambda_bar_.size(); }
  std::size_t input_width() const noexcept { return input_width_; }
  std::size_t kernel_size() const noexcept { return mix_kernel_.size(); }
  const ComplexVector& lambda_bar() const noexcept { return lambda_bar_; }
  double tau() const noexcept { return tau_; }
  const InputWeights& input() const noexcept { return input_; }
  const ComplexVector& bias() const noexcept { return bias_; }
  const ComplexVector& mix_kernel() const noexcept { return mix_kernel_; }
  Complex mix_bias() const noexcept { return mix_bias_; }

  /// Spectral radius of the effective transition.
  double max_modulus() const;

  /// Stored parameters: diagonal + input weights + bias + kernel + mix bias.
  std::size_t parameter_count() const;

  /// W_in x for one input row, written into `out` (length N_h).
  void project_input(std::span<const double> x, std::span<Complex> out) const;

  bool operator==(const ParalEsnLayer&) const = default;

 private:
  ComplexVector lambda_bar_;
  double tau_;
  InputWeights input_;
  std::size_t input_width_;
  ComplexVector bias_;
  ComplexVector mix_kernel_;
  Complex mix_bias_;
};

/// Affine steps whose scan reproduces the layer recurrence:
/// gain = lambda_bar (broadcast), drive_t = tau * (W_in x_t + b).
AffineSequence layer_drive(const ParalEsnLayer& layer, const RealMatrix& inputs, int workers = 1);

/// Complex hidden states of one layer; h0 defaults to zero.
StateSequence layer_states(const ParalEsnLayer& layer, const RealMatrix& inputs,
                           const ForwardOptions& opts = {},
                           std::optional<std::span<const Complex>> h0 = std::nullopt);

/// Largest magnitude the mixing output may take.
inline constexpr double kMixBound = 1.0 - 1e-12;

/// tanh(Re(kernel (*) h + b)) per time step: cross-correlation along the
/// hidden dimension, kernel centred on the output index, zero padding.
RealMatrix mix(const ParalEsnLayer& layer, const StateSequence& states, int workers = 1);

/// Unit allocation across layers. With concat the total is split evenly and
/// the remainder goes to the first layer; otherwise every layer gets `total`.
std::vector<std::size_t> split_units(std::size_t total, std::size_t layers, bool concat);

struct DeepHyperparams {
  std::size_t total_units = 128;
  std::size_t layers = 1;
  bool concat = false;
  LayerHyperparams first;  // n_h and input kind are overwritten
  LayerHyperparams inter;  // used for layers 2..L

  void validate() const;
};

struct ForwardResult {
  std::vector<RealMatrix> mixed;  // one T x N_h matrix per layer
  RealMatrix features;            // last layer, or all layers side by side
};

/// Stack of ParalESN layers. Layer 1 has dense input, later layers ring input
/// fed by the previous layer's mixed states.
class DeepParalEsn {
 public:
  DeepParalEsn(std::vector<ParalEsnLayer> layers, bool concat);

  static DeepParalEsn sample(const DeepHyperparams& hp, std::size_t n_in, RngStream& rng);

  const std::vector<ParalEsnLayer>& layers() const noexcept { return layers_; }
  bool concat() const noexcept { return concat_; }
  std::size_t feature_width() const;
  std::size_t parameter_count() const;

  ForwardResult forward(const RealMatrix& inputs, const ForwardOptions& opts = {},
                        std::span<const ComplexVector> h0 = {}) const;

  bool operator==(const DeepParalEsn&) const = default;

 private:
  std::vector<ParalEsnLayer> layers_;
  bool concat_;
};

}  // namespace paralesn

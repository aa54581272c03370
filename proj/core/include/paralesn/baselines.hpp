#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "paralesn/rng.hpp"
#include "paralesn/tensor.hpp"

namespace paralesn {

/// Dominant-eigenvalue modulus of a square real matrix.
///
/// Power iteration from a random complex start. Each step fits the
/// two-term recurrence y2 ~ a*y1 + b*y0 over consecutive iterates and takes
/// the larger root of mu^2 - a*mu - b, which also resolves a dominant complex
/// conjugate pair. Throws ConvergenceError (carrying the last estimate) if
/// the estimate has not settled to `tol` after `max_iters` steps.
double estimate_spectral_radius(const RealMatrix& matrix, std::size_t max_iters = 20000,
                                double tol = 1e-10, std::uint64_t seed = 0x5eed);

struct EsnHyperparams {
  std::size_t n_h = 128;
  double rho = 0.9;
  double omega_in = 1.0;
  double omega_b = 0.0;
  double tau = 1.0;

  void validate() const;
};

/// Leaky tanh ESN layer: h_t = (1-tau) h_{t-1} + tau tanh(W_h h_{t-1} + W_in x_t + b).
struct EsnLayer {
  RealMatrix w_h;   // N_h x N_h
  RealMatrix w_in;  // N_h x N_in
  RealVector bias;
  double tau = 1.0;

  /// W_h uniform on [-1, 1] rescaled to spectral radius rho, then W_in and
  /// bias uniform on [-omega_in, omega_in] and [-omega_b, omega_b].
  static EsnLayer sample(const EsnHyperparams& hp, std::size_t n_in, RngStream& rng);

  std::size_t units() const noexcept { return w_h.rows(); }
  std::size_t input_width() const noexcept { return w_in.cols(); }
  std::size_t parameter_count() const noexcept { return w_h.size() + w_in.size() + bias.size(); }
  bool operator==(const EsnLayer&) const = default;
};

/// Simple cycle reservoir: the transition is rho times the one-step cyclic
/// shift, shift(v)_i = v_{(i-1) mod N}. The ring itself is not stored.
struct ScrLayer {
  double rho = 0.9;
  RealMatrix w_in;
  RealVector bias;
  double tau = 1.0;

  static ScrLayer sample(const EsnHyperparams& hp, std::size_t n_in, RngStream& rng);

  std::size_t units() const noexcept { return w_in.rows(); }
  std::size_t input_width() const noexcept { return w_in.cols(); }
  std::size_t parameter_count() const noexcept { return w_in.size() + bias.size(); }
  /// Dense rho-scaled ring matrix equivalent to this layer's transition.
  RealMatrix ring_matrix() const;
  bool operator==(const ScrLayer&) const = default;
};

/// One-step cyclic shift used by SCR and the ring input.
void cyclic_shift(std::span<const double> in, std::span<double> out);

RealMatrix esn_forward(const EsnLayer& layer, const RealMatrix& inputs,
                       std::span<const double> h0 = {});
RealMatrix scr_forward(const ScrLayer& layer, const RealMatrix& inputs,
                       std::span<const double> h0 = {});

using BaselineLayer = std::variant<EsnLayer, ScrLayer>;

enum class BaselineKind { kEsn, kScr };

struct DeepBaselineHyperparams {
  BaselineKind kind = BaselineKind::kEsn;
  std::size_t total_units = 128;
  std::size_t layers = 1;
  bool concat = false;
  EsnHyperparams first;  // n_h overwritten
  EsnHyperparams inter;
};

/// Deep ESN / SCR stack wired like DeepParalEsn: layer l consumes the states
/// of layer l-1; features are the last layer or all layers concatenated.
class DeepBaseline {
 public:
  DeepBaseline(std::vector<BaselineLayer> layers, bool concat);

  static DeepBaseline sample(const DeepBaselineHyperparams& hp, std::size_t n_in,
                             RngStream& rng);

  const std::vector<BaselineLayer>& layers() const noexcept { return layers_; }
  bool concat() const noexcept { return concat_; }
  std::size_t parameter_count() const;
  std::size_t feature_width() const;

  /// Returns per-layer states; `features` is filled per the concat flag.
  std::vector<RealMatrix> forward(const RealMatrix& inputs, RealMatrix& features) const;

  bool operator==(const DeepBaseline&) const = default;

 private:
  std::vector<BaselineLayer> layers_;
  bool concat_;
};

}  // namespace paralesn

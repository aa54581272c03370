#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "paralesn/reservoir.hpp"
#include "paralesn/rng.hpp"
#include "paralesn/tensor.hpp"

namespace paralesn::theory {

/// Distances between two state trajectories driven by the same input.
struct ContractionTrace {
  std::vector<double> distances;  // t = 0..T, entry 0 is ||h0 - h0'||
  double max_modulus = 0.0;
  double log_slope = 0.0;         // least-squares slope of log d_t
  std::size_t violations = 0;     // steps with d_t > r d_{t-1} beyond rounding
  double worst_ratio = 0.0;       // max d_t / d_{t-1} while d_{t-1} is clear of rounding
};

struct ContractionSummary {
  std::vector<ContractionTrace> trials;
  double max_modulus = 0.0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  double mean_log_slope = 0.0;
};

/// Linear layer with the given transition, dense unit-scale input weights and
/// no bias. Accepts |lambda_bar| >= 1 for divergence experiments.
ParalEsnLayer linear_layer(ComplexVector lambda_bar, std::size_t n_in, RngStream& rng);

/// Runs the layer recurrence from h0 and h0_prime on the same inputs.
///
/// A step counts as a violation when d_t > r d_{t-1} + slack, where the slack
/// is 8 eps (||h_t|| + ||h'_t||): the rounding floor of subtracting two
/// separately computed states. The slope fit uses steps with d_t above
/// 1e-8 d_0.
ContractionTrace contraction_trace(const ParalEsnLayer& layer, const RealMatrix& inputs,
                                   std::span<const Complex> h0, std::span<const Complex> h0_prime);

/// `trials` runs of length T with random inputs on [-1, 1] and random
/// initial states on the unit complex square.
ContractionSummary esp_contraction_test(const ParalEsnLayer& layer, std::size_t T,
                                        std::size_t trials, RngStream& rng);

/// Dense complex linear system W_h = V diag(lambda) V^{-1} with its
/// diagonalized counterpart.
struct EquivalencePair {
  ComplexMatrix w_h;        // N_h x N_h
  ComplexMatrix w_in;       // N_h x N_in
  ComplexVector lambda;     // N_h
  ComplexMatrix v;          // N_h x N_h
  ComplexMatrix v_inv;      // N_h x N_h
  ComplexMatrix w_in_diag;  // V^{-1} W_in
  double condition = 0.0;   // ||V||_1 ||V^{-1}||_1
  /// ||W_h V - V diag(lambda)||_F / (||W_h||_F ||V||_F)
  double reconstruction_error = 0.0;
};

inline constexpr double kMaxCondition = 1e3;
inline constexpr int kMaxConditionRejections = 20;

/// Inverse by Gaussian elimination with partial pivoting. Throws
/// SingularMatrixError when a pivot magnitude falls below 1e-12 times the
/// largest entry.
ComplexMatrix invert(const ComplexMatrix& a);

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
double norm1(const ComplexMatrix& a);
double frobenius(const ComplexMatrix& a);

/// Builds a pair from a planted eigenbasis. Throws SingularMatrixError if V
/// cannot be inverted.
EquivalencePair make_equivalence_pair(ComplexVector lambda, ComplexMatrix v, ComplexMatrix w_in);

/// Eigenvalues with modulus on [0, 0.95) and uniform phase; V and W_in with
/// entries uniform on the unit complex square. V is redrawn while its
/// condition estimate exceeds kMaxCondition or it is singular; throws Error
/// after kMaxConditionRejections consecutive rejections.
EquivalencePair build_equivalence_pair(std::size_t n_h, std::size_t n_in, RngStream& rng);

struct EquivalenceReport {
  double max_deviation = 0.0;  // max_t ||V h~_t - h_t|| / ||h_t||
  double tolerance = 0.0;      // 1e-8 cond(V)
  std::size_t worst_step = 0;  // 1-based time of max_deviation
  bool passed = true;
};

/// Runs h_t = W_h h_{t-1} + W_in x_t and h~_t = diag(lambda) h~_{t-1} + W~_in x_t
/// from zero states and compares V h~_t against h_t at every step. Steps where
/// h_t is exactly zero are compared absolutely.
EquivalenceReport verify_equivalence(const EquivalencePair& pair, const RealMatrix& inputs);

}  // namespace paralesn::theory

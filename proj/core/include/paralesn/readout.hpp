#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "paralesn/rng.hpp"
#include "paralesn/tensor.hpp"

namespace paralesn {

/// Per-feature affine normalization fitted on training rows only.
class Standardizer {
 public:
  static constexpr double kScaleFloor = 1e-8;

  Standardizer() = default;
  Standardizer(RealVector mean, RealVector scale);

  /// Population mean and std per column; needs at least two rows.
  static Standardizer fit(const RealMatrix& features);

  RealMatrix transform(const RealMatrix& features) const;
  RealMatrix inverse_transform(const RealMatrix& features) const;

  const RealVector& mean() const noexcept { return mean_; }
  const RealVector& scale() const noexcept { return scale_; }
  std::size_t width() const noexcept { return mean_.size(); }
  bool operator==(const Standardizer&) const = default;

 private:
  RealVector mean_;
  RealVector scale_;
};

/// y = W x + b with W of shape N_out x N_feat.
struct RidgeReadout {
  RealMatrix w_out;
  RealVector b_out;
  double lambda_reg = 0.0;

  std::size_t inputs() const noexcept { return w_out.cols(); }
  std::size_t outputs() const noexcept { return w_out.rows(); }
  RealMatrix predict(const RealMatrix& features) const;
  bool operator==(const RidgeReadout&) const = default;
};

/// Solve (A + jitter I) x = B for symmetric positive semi-definite A via
/// Cholesky. If the factorization fails, jitter escalates through
/// 1e-12..1e-8 times the mean diagonal; SingularMatrixError once exhausted.
/// Returns the jitter actually used (0 if none was needed).
double solve_spd(const RealMatrix& a, RealMatrix& rhs_solution, bool allow_jitter);

/// Centered Gram system shared by every regularization strength on the same
/// data, so a lambda sweep factors once per lambda without rebuilding X^T X.
class RidgeProblem {
 public:
  /// Rows [row_begin, row_end) of features/targets form the training set.
  RidgeProblem(const RealMatrix& features, const RealMatrix& targets, std::size_t row_begin = 0,
               std::size_t row_end = SIZE_MAX);

  /// Minimizer of ||X W^T + 1 b^T - Y||^2 + lambda ||W||^2, bias unpenalized.
  RidgeReadout solve(double lambda_reg) const;

  std::size_t samples() const noexcept { return samples_; }

 private:
  RealMatrix gram_;   // Xc^T Xc
  RealMatrix cross_;  // Xc^T Yc
  RealVector x_mean_;
  RealVector y_mean_;
  std::size_t samples_ = 0;
};

RidgeReadout fit_ridge(const RealMatrix& features, const RealMatrix& targets, double lambda_reg);

enum class MlpLoss { kSoftmaxCrossEntropy, kMeanSquaredError };

struct MlpConfig {
  std::size_t hidden = 128;
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  std::size_t batch_size = 64;
  MlpLoss loss = MlpLoss::kMeanSquaredError;
};

/// Parameters of the two-layer head, also used for gradients and moments.
struct MlpParams {
  RealMatrix w1;  // H x N_feat
  RealVector b1;  // H
  RealMatrix w2;  // N_out x H
  RealVector b2;  // N_out

  std::size_t size() const noexcept { return w1.size() + b1.size() + w2.size() + b2.size(); }
  /// Views over the four tensors in a fixed order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  bool operator==(const MlpParams&) const = default;
};

/// Two-layer perceptron readout: tanh hidden layer, linear output.
class MlpReadout {
 public:
  /// Linear-layer style init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
  /// weights and biases.
  MlpReadout(std::size_t n_feat, std::size_t n_out, const MlpConfig& config, RngStream& rng);
  MlpReadout(MlpParams params, MlpLoss loss);

  RealMatrix predict(const RealMatrix& features) const;

  /// Mean loss over the rows and its gradient w.r.t. every parameter.
  /// For cross-entropy the targets are one-hot (or probability) rows.
  double loss_and_gradient(const RealMatrix& features, const RealMatrix& targets,
                           MlpParams* gradient) const;
  double loss(const RealMatrix& features, const RealMatrix& targets) const {
    return loss_and_gradient(features, targets, nullptr);
  }

  const MlpParams& params() const noexcept { return params_; }
  MlpParams& params() noexcept { return params_; }
  MlpLoss loss_kind() const noexcept { return loss_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::size_t adam_steps() const noexcept { return steps_; }

  /// One Adam update from a gradient.
  void adam_step(const MlpParams& gradient, const MlpConfig& config);

 private:
  MlpParams params_;
  MlpLoss loss_;
  MlpParams m_;
  MlpParams v_;
  std::size_t steps_ = 0;
};

struct MlpTrainingLog {
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
  std::size_t best_epoch = 0;
};

/// Mini-batch Adam with early stopping on validation loss (training loss if
/// no validation set is given). Returns the best-loss parameters. Throws
/// TrainingFailure on a non-finite loss.
MlpReadout fit_mlp(const RealMatrix& features, const RealMatrix& targets, const MlpConfig& config,
                   RngStream& rng, const RealMatrix* valid_features = nullptr,
                   const RealMatrix* valid_targets = nullptr, MlpTrainingLog* log = nullptr);

/// One-hot rows from integer labels.
RealMatrix one_hot(std::span<const int> labels, std::size_t classes);
/// Row-wise argmax.
std::vector<int> argmax_rows(const RealMatrix& scores);

}  // namespace paralesn

#include "paralesn/readout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace paralesn {

// ---------------------------------------------------------------- Standardizer

Standardizer::Standardizer(RealVector mean, RealVector scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw ShapeError("Standardizer: mean/scale width mismatch");
}

Standardizer Standardizer::fit(const RealMatrix& features) {
  const std::size_t m = features.rows();
  const std::size_t n = features.cols();
  if (m < 2) throw InvalidArgument("Standardizer::fit: at least two rows required");
  RealVector mean(n, 0.0), scale(n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = features.row(r).data();
    for (std::size_t c = 0; c < n; ++c) mean[c] += x[c];
  }
  for (auto& v : mean) v /= static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = features.row(r).data();
    for (std::size_t c = 0; c < n; ++c) {
      const double d = x[c] - mean[c];
      scale[c] += d * d;
    }
  }
  for (auto& s : scale) s = std::max(std::sqrt(s / static_cast<double>(m)), kScaleFloor);
  return Standardizer(std::move(mean), std::move(scale));
}

RealMatrix Standardizer::transform(const RealMatrix& features) const {
  if (features.cols() != width()) throw ShapeError("Standardizer::transform: width mismatch");
  RealMatrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const double* x = features.row(r).data();
    double* y = out.row(r).data();
    for (std::size_t c = 0; c < width(); ++c) y[c] = (x[c] - mean_[c]) / scale_[c];
  }
  return out;
}

RealMatrix Standardizer::inverse_transform(const RealMatrix& features) const {
  if (features.cols() != width()) throw ShapeError("Standardizer::inverse_transform: width mismatch");
  RealMatrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const double* x = features.row(r).data();
    double* y = out.row(r).data();
    for (std::size_t c = 0; c < width(); ++c) y[c] = x[c] * scale_[c] + mean_[c];
  }
  return out;
}

// ----------------------------------------------------------------------- Ridge

RealMatrix RidgeReadout::predict(const RealMatrix& features) const {
  if (features.cols() != inputs()) {
    throw ShapeError("RidgeReadout::predict: feature width " + std::to_string(features.cols()) +
                     " != " + std::to_string(inputs()));
  }
  RealMatrix out(features.rows(), outputs());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const double* x = features.row(r).data();
    double* y = out.row(r).data();
    for (std::size_t o = 0; o < outputs(); ++o) {
      const double* w = w_out.row(o).data();
      double acc = b_out[o];
      for (std::size_t c = 0; c < inputs(); ++c) acc += w[c] * x[c];
      y[o] = acc;
    }
  }
  return out;
}

namespace {

// In-place lower Cholesky factor; false if a pivot is not clearly positive.
bool cholesky(RealMatrix& a) {
  const std::size_t n = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double threshold = 1e-13 * std::max(max_diag, 1e-300);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > threshold)) return false;
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const double* ri = a.row(i).data();
      const double* rj = a.row(j).data();
      for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
      a(i, j) = s / ljj;
    }
  }
  return true;
}

void cholesky_solve(const RealMatrix& l, RealMatrix& b) {
  const std::size_t n = l.rows();
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* bi = b.row(i).data();
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      const double* bk = b.row(k).data();
      for (std::size_t c = 0; c < m; ++c) bi[c] -= lik * bk[c];
    }
    for (std::size_t c = 0; c < m; ++c) bi[c] /= l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double* bi = b.row(ii).data();
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double lki = l(k, ii);
      const double* bk = b.row(k).data();
      for (std::size_t c = 0; c < m; ++c) bi[c] -= lki * bk[c];
    }
    for (std::size_t c = 0; c < m; ++c) bi[c] /= l(ii, ii);
  }
}

}  // namespace

double solve_spd(const RealMatrix& a, RealMatrix& rhs_solution, bool allow_jitter) {
  const std::size_t n = a.rows();
  if (a.cols() != n || rhs_solution.rows() != n) throw ShapeError("solve_spd: shape mismatch");
  double mean_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_diag += a(i, i);
  mean_diag = n ? mean_diag / static_cast<double>(n) : 0.0;
  if (!(mean_diag > 0.0)) mean_diag = 1.0;

  constexpr double kLadder[] = {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8};
  for (const double step : kLadder) {
    if (step > 0.0 && !allow_jitter) break;
    RealMatrix factor = a;
    const double jitter = step * mean_diag;
    for (std::size_t i = 0; i < n; ++i) factor(i, i) += jitter;
    if (cholesky(factor)) {
      cholesky_solve(factor, rhs_solution);
      return jitter;
    }
  }
  throw SingularMatrixError("solve_spd: matrix is singular even after jitter escalation");
}

RidgeProblem::RidgeProblem(const RealMatrix& features, const RealMatrix& targets,
                           std::size_t row_begin, std::size_t row_end) {
  row_end = std::min(row_end, features.rows());
  if (targets.rows() != features.rows()) throw ShapeError("RidgeProblem: row count mismatch");
  if (row_begin >= row_end) throw InvalidArgument("RidgeProblem: no training rows");
  const std::size_t n = features.cols();
  const std::size_t k = targets.cols();
  samples_ = row_end - row_begin;
  const double inv = 1.0 / static_cast<double>(samples_);

  x_mean_.assign(n, 0.0);
  y_mean_.assign(k, 0.0);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double* x = features.row(r).data();
    const double* y = targets.row(r).data();
    for (std::size_t c = 0; c < n; ++c) x_mean_[c] += x[c];
    for (std::size_t c = 0; c < k; ++c) y_mean_[c] += y[c];
  }
  for (auto& v : x_mean_) v *= inv;
  for (auto& v : y_mean_) v *= inv;

  gram_ = RealMatrix(n, n, 0.0);
  cross_ = RealMatrix(n, k, 0.0);
  RealVector xc(n), yc(k);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double* x = features.row(r).data();
    const double* y = targets.row(r).data();
    for (std::size_t c = 0; c < n; ++c) xc[c] = x[c] - x_mean_[c];
    for (std::size_t c = 0; c < k; ++c) yc[c] = y[c] - y_mean_[c];
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = xc[i];
      double* g = gram_.row(i).data();
      for (std::size_t j = i; j < n; ++j) g[j] += xi * xc[j];
      double* cr = cross_.row(i).data();
      for (std::size_t c = 0; c < k; ++c) cr[c] += xi * yc[c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) gram_(i, j) = gram_(j, i);
  }
}

RidgeReadout RidgeProblem::solve(double lambda_reg) const {
  if (!(lambda_reg >= 0.0)) throw InvalidArgument("ridge: lambda must be >= 0");
  const std::size_t n = gram_.rows();
  const std::size_t k = cross_.cols();
  RealMatrix system = gram_;
  for (std::size_t i = 0; i < n; ++i) system(i, i) += lambda_reg;
  RealMatrix solution = cross_;  // N_feat x N_out
  solve_spd(system, solution, true);

  RidgeReadout out{RealMatrix(k, n), RealVector(k), lambda_reg};
  for (std::size_t o = 0; o < k; ++o) {
    double b = y_mean_[o];
    for (std::size_t c = 0; c < n; ++c) {
      out.w_out(o, c) = solution(c, o);
      b -= solution(c, o) * x_mean_[c];
    }
    out.b_out[o] = b;
  }
  return out;
}

RidgeReadout fit_ridge(const RealMatrix& features, const RealMatrix& targets, double lambda_reg) {
  return RidgeProblem(features, targets).solve(lambda_reg);
}

// ------------------------------------------------------------------------- MLP

std::vector<std::span<double>> MlpParams::tensors() {
  return {w1.flat(), std::span<double>(b1), w2.flat(), std::span<double>(b2)};
}

std::vector<std::span<const double>> MlpParams::tensors() const {
  return {w1.flat(), std::span<const double>(b1), w2.flat(), std::span<const double>(b2)};
}

namespace {

MlpParams zeros_like(const MlpParams& p) {
  return {RealMatrix(p.w1.rows(), p.w1.cols(), 0.0), RealVector(p.b1.size(), 0.0),
          RealMatrix(p.w2.rows(), p.w2.cols(), 0.0), RealVector(p.b2.size(), 0.0)};
}

}  // namespace

MlpReadout::MlpReadout(std::size_t n_feat, std::size_t n_out, const MlpConfig& config,
                       RngStream& rng)
    : loss_(config.loss) {
  if (n_feat == 0 || n_out == 0 || config.hidden == 0) {
    throw InvalidArgument("MlpReadout: widths must be >= 1");
  }
  const std::size_t h = config.hidden;
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(n_feat));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(h));
  params_.w1 = RealMatrix(h, n_feat);
  for (auto& x : params_.w1.flat()) x = rng.uniform(-bound1, bound1);
  params_.b1.resize(h);
  for (auto& x : params_.b1) x = rng.uniform(-bound1, bound1);
  params_.w2 = RealMatrix(n_out, h);
  for (auto& x : params_.w2.flat()) x = rng.uniform(-bound2, bound2);
  params_.b2.resize(n_out);
  for (auto& x : params_.b2) x = rng.uniform(-bound2, bound2);
  m_ = zeros_like(params_);
  v_ = zeros_like(params_);
}

MlpReadout::MlpReadout(MlpParams params, MlpLoss loss)
    : params_(std::move(params)), loss_(loss) {
  const auto& p = params_;
  if (p.b1.size() != p.w1.rows() || p.w2.cols() != p.w1.rows() || p.b2.size() != p.w2.rows()) {
    throw ShapeError("MlpReadout: inconsistent parameter shapes");
  }
  m_ = zeros_like(params_);
  v_ = zeros_like(params_);
}

RealMatrix MlpReadout::predict(const RealMatrix& features) const {
  const auto& p = params_;
  const std::size_t h = p.w1.rows();
  if (features.cols() != p.w1.cols()) throw ShapeError("MlpReadout::predict: feature width");
  RealMatrix out(features.rows(), p.w2.rows());
  RealVector hidden(h);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const double* x = features.row(r).data();
    for (std::size_t j = 0; j < h; ++j) {
      const double* w = p.w1.row(j).data();
      double acc = p.b1[j];
      for (std::size_t c = 0; c < features.cols(); ++c) acc += w[c] * x[c];
      hidden[j] = std::tanh(acc);
    }
    for (std::size_t o = 0; o < p.w2.rows(); ++o) {
      const double* w = p.w2.row(o).data();
      double acc = p.b2[o];
      for (std::size_t j = 0; j < h; ++j) acc += w[j] * hidden[j];
      out(r, o) = acc;
    }
  }
  return out;
}

double MlpReadout::loss_and_gradient(const RealMatrix& features, const RealMatrix& targets,
                                     MlpParams* gradient) const {
  const auto& p = params_;
  const std::size_t m = features.rows();
  const std::size_t h = p.w1.rows();
  const std::size_t n_out = p.w2.rows();
  if (features.cols() != p.w1.cols()) throw ShapeError("MlpReadout: feature width");
  if (targets.rows() != m || targets.cols() != n_out) throw ShapeError("MlpReadout: target shape");
  if (m == 0) throw InvalidArgument("MlpReadout: empty batch");
  if (gradient) *gradient = zeros_like(p);

  RealVector hidden(h), out(n_out), d_out(n_out), d_hidden(h);
  double total = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  const double mse_scale = 1.0 / static_cast<double>(m * n_out);
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = features.row(r).data();
    const double* y = targets.row(r).data();
    for (std::size_t j = 0; j < h; ++j) {
      const double* w = p.w1.row(j).data();
      double acc = p.b1[j];
      for (std::size_t c = 0; c < features.cols(); ++c) acc += w[c] * x[c];
      hidden[j] = std::tanh(acc);
    }
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* w = p.w2.row(o).data();
      double acc = p.b2[o];
      for (std::size_t j = 0; j < h; ++j) acc += w[j] * hidden[j];
      out[o] = acc;
    }
    if (loss_ == MlpLoss::kMeanSquaredError) {
      for (std::size_t o = 0; o < n_out; ++o) {
        const double e = out[o] - y[o];
        total += e * e * mse_scale;
        d_out[o] = 2.0 * e * mse_scale;
      }
    } else {
      const double shift = *std::max_element(out.begin(), out.end());
      double z = 0.0;
      for (std::size_t o = 0; o < n_out; ++o) z += std::exp(out[o] - shift);
      const double log_z = std::log(z) + shift;
      for (std::size_t o = 0; o < n_out; ++o) {
        total -= y[o] * (out[o] - log_z) * inv_m;
        d_out[o] = (std::exp(out[o] - log_z) * std::accumulate(y, y + n_out, 0.0) - y[o]) * inv_m;
      }
    }
    if (!gradient) continue;

    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double g = d_out[o];
      gradient->b2[o] += g;
      double* gw = gradient->w2.row(o).data();
      const double* w = p.w2.row(o).data();
      for (std::size_t j = 0; j < h; ++j) {
        gw[j] += g * hidden[j];
        d_hidden[j] += g * w[j];
      }
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double da = d_hidden[j] * (1.0 - hidden[j] * hidden[j]);
      gradient->b1[j] += da;
      double* gw = gradient->w1.row(j).data();
      for (std::size_t c = 0; c < features.cols(); ++c) gw[c] += da * x[c];
    }
  }
  return total;
}

void MlpReadout::adam_step(const MlpParams& gradient, const MlpConfig& config) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto params = params_.tensors();
  auto first = m_.tensors();
  auto second = v_.tensors();
  const auto grads = gradient.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].size()) throw ShapeError("adam_step: gradient shape");
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double g = grads[k][i];
      first[k][i] = config.beta1 * first[k][i] + (1.0 - config.beta1) * g;
      second[k][i] = config.beta2 * second[k][i] + (1.0 - config.beta2) * g * g;
      const double m_hat = first[k][i] / c1;
      const double v_hat = second[k][i] / c2;
      params[k][i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

MlpReadout fit_mlp(const RealMatrix& features, const RealMatrix& targets, const MlpConfig& config,
                   RngStream& rng, const RealMatrix* valid_features,
                   const RealMatrix* valid_targets, MlpTrainingLog* log) {
  if (features.rows() != targets.rows()) throw ShapeError("fit_mlp: row count mismatch");
  if (features.rows() == 0) throw InvalidArgument("fit_mlp: no training data");
  if ((valid_features == nullptr) != (valid_targets == nullptr)) {
    throw InvalidArgument("fit_mlp: validation features and targets must be given together");
  }
  if (config.batch_size == 0) throw InvalidArgument("fit_mlp: batch size must be >= 1");

  MlpReadout model(features.cols(), targets.cols(), config, rng);
  if (config.epochs == 0) return model;

  const std::size_t m = features.rows();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  MlpReadout best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  MlpParams grad;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = m; i-- > 1;) {
      std::swap(order[i], order[rng.next_u64() % (i + 1)]);
    }
    for (std::size_t begin = 0; begin < m; begin += config.batch_size) {
      const std::size_t end = std::min(m, begin + config.batch_size);
      RealMatrix xb(end - begin, features.cols()), yb(end - begin, targets.cols());
      for (std::size_t r = begin; r < end; ++r) {
        std::copy_n(features.row(order[r]).begin(), features.cols(), xb.row(r - begin).begin());
        std::copy_n(targets.row(order[r]).begin(), targets.cols(), yb.row(r - begin).begin());
      }
      const double batch_loss = model.loss_and_gradient(xb, yb, &grad);
      if (!std::isfinite(batch_loss)) {
        throw TrainingFailure("fit_mlp: non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch starting at row " + std::to_string(begin));
      }
      model.adam_step(grad, config);
    }

    const double train_loss = model.loss(features, targets);
    if (!std::isfinite(train_loss)) {
      throw TrainingFailure("fit_mlp: non-finite training loss at epoch " + std::to_string(epoch));
    }
    const double monitor = valid_features ? model.loss(*valid_features, *valid_targets) : train_loss;
    if (log) {
      log->train_loss.push_back(train_loss);
      if (valid_features) log->valid_loss.push_back(monitor);
    }
    if (monitor < best_loss) {
      best_loss = monitor;
      best = model;
      since_best = 0;
      if (log) log->best_epoch = epoch;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return best;
}

RealMatrix one_hot(std::span<const int> labels, std::size_t classes) {
  RealMatrix out(labels.size(), classes, 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw InvalidArgument("one_hot: label out of range");
    }
    out(r, static_cast<std::size_t>(labels[r])) = 1.0;
  }
  return out;
}

std::vector<int> argmax_rows(const RealMatrix& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace paralesn

#include "paralesn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "paralesn/error.hpp"

namespace paralesn::tasks {

namespace {

void require_same_shape(const RealMatrix& a, const RealMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": prediction and target shapes differ");
  }
  if (a.rows() == 0) throw InvalidArgument(std::string(what) + ": no rows");
}

RealVector column_of(const RealMatrix& m, std::size_t c) {
  RealVector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
  return out;
}

}  // namespace

MetricReport metric_mse(const RealMatrix& pred, const RealMatrix& target) {
  require_same_shape(pred, target, "mse");
  MetricReport rep{"mse", 0.0, RealVector(pred.cols(), 0.0)};
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double e = pred(r, c) - target(r, c);
      rep.per_output[c] += e * e;
    }
  }
  double total = 0.0;
  for (auto& v : rep.per_output) {
    total += v;
    v /= static_cast<double>(pred.rows());
  }
  rep.value = total / static_cast<double>(pred.size());
  return rep;
}

MetricReport metric_nrmse(const RealMatrix& pred, const RealMatrix& target) {
  require_same_shape(pred, target, "nrmse");
  const std::size_t m = pred.rows();
  MetricReport rep{"nrmse", 0.0, RealVector(pred.cols(), 0.0)};
  for (std::size_t c = 0; c < pred.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) mean += target(r, c);
    mean /= static_cast<double>(m);
    double var = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      var += (target(r, c) - mean) * (target(r, c) - mean);
      sq += (pred(r, c) - target(r, c)) * (pred(r, c) - target(r, c));
    }
    if (!(var > 0.0)) {
      throw InvalidArgument("nrmse: target column " + std::to_string(c) + " has zero variance");
    }
    rep.per_output[c] = std::sqrt(sq / var);
    rep.value += rep.per_output[c];
  }
  rep.value /= static_cast<double>(pred.cols());
  return rep;
}

MetricReport metric_accuracy(std::span<const int> pred, std::span<const int> target) {
  if (pred.size() != target.size()) throw ShapeError("accuracy: label counts differ");
  if (pred.empty()) throw InvalidArgument("accuracy: no rows");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == target[i];
  return {"accuracy", static_cast<double>(hits) / static_cast<double>(pred.size()), {}};
}

MetricReport metric_accuracy(const RealMatrix& pred_scores, const RealMatrix& target_scores) {
  require_same_shape(pred_scores, target_scores, "accuracy");
  std::vector<int> p(pred_scores.rows()), t(pred_scores.rows());
  for (std::size_t r = 0; r < pred_scores.rows(); ++r) {
    const auto pr = pred_scores.row(r);
    const auto tr = target_scores.row(r);
    p[r] = static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin());
    t[r] = static_cast<int>(std::max_element(tr.begin(), tr.end()) - tr.begin());
  }
  return metric_accuracy(p, t);
}

double correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("correlation: length mismatch");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  if (*amin == *amax || *bmin == *bmax) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricReport metric_memory_capacity(const RealMatrix& pred, const RealMatrix& target) {
  require_same_shape(pred, target, "memory capacity");
  MetricReport rep{"memory_capacity", 0.0, RealVector(pred.cols(), 0.0)};
  for (std::size_t c = 0; c < pred.cols(); ++c) {
    const double r = correlation(column_of(pred, c), column_of(target, c));
    rep.per_output[c] = r * r;
    rep.value += r * r;
  }
  return rep;
}

}  // namespace paralesn::tasks

#pragma once

#include <span>
#include <string>
#include <vector>

#include "paralesn/tensor.hpp"

namespace paralesn::tasks {

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::vector<double> per_output;
};

/// Mean squared error over every entry.
MetricReport metric_mse(const RealMatrix& pred, const RealMatrix& target);

/// Per column RMSE / population std of the target; value is the column mean.
/// Throws InvalidArgument on a zero-variance target column.
MetricReport metric_nrmse(const RealMatrix& pred, const RealMatrix& target);

/// Fraction of rows whose argmax matches.
MetricReport metric_accuracy(const RealMatrix& pred_scores, const RealMatrix& target_scores);
MetricReport metric_accuracy(std::span<const int> pred, std::span<const int> target);

/// Pearson correlation; 0 when either side has zero variance.
double correlation(std::span<const double> a, std::span<const double> b);

/// Sum over delay columns of the squared correlation between prediction and
/// target.
MetricReport metric_memory_capacity(const RealMatrix& pred, const RealMatrix& target);

}  // namespace paralesn::tasks

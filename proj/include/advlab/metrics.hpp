#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace advlab {

struct EpochMetrics {
  int epoch = 0;
  double learning_rate = 0.0;
  double mean_train_loss = 0.0;
  double natural_test_acc = 0.0;
  /// One entry per configured evaluation attack, in configuration order.
  std::vector<std::pair<std::string, double>> robust_test_acc;
  std::optional<double> robust_acc_pgd;
  std::optional<double> robust_acc_cw;
  double attackable_ratio_original = 0.0;
  std::optional<double> attackable_ratio_interpolated;
  std::size_t attackable_set_size = 0;
  std::size_t originals_examined = 0;  // distinct originals attacked this epoch
  std::size_t interpolated_examined = 0;
  std::size_t interpolated_attackable = 0;
  std::size_t samples_consumed = 0;  // all training rows used, duplicates included
  /// Robust accuracy used for best-checkpoint selection.
  double selection_robust_acc = 0.0;
  bool interpolation_active = false;
  bool interpolation_fallback = false;
};

/// Fixed column order of the metrics CSV.
inline constexpr const char* kMetricsHeader =
    "epoch,lr,train_loss,nat_acc,rob_acc_pgd,rob_acc_cw,att_ratio_orig,att_ratio_interp,att_set_size";

/// One CSV row (no trailing newline). Reals use %.17g; absent values are
/// empty cells.
std::string format_metrics_row(const EpochMetrics& m);

/// Splits a CSV line on commas.
std::vector<std::string> split_csv_row(const std::string& row);

}  // namespace advlab

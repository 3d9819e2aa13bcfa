#include "advlab/metrics.hpp"

#include <cstdio>
#include <sstream>

namespace advlab {

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string optional_real(const std::optional<double>& v) { return v ? real(*v) : std::string(); }

}  // namespace

std::string format_metrics_row(const EpochMetrics& m) {
  std::ostringstream out;
  out << m.epoch << ',' << real(m.learning_rate) << ',' << real(m.mean_train_loss) << ','
      << real(m.natural_test_acc) << ',' << optional_real(m.robust_acc_pgd) << ','
      << optional_real(m.robust_acc_cw) << ',' << real(m.attackable_ratio_original) << ','
      << optional_real(m.attackable_ratio_interpolated) << ',' << m.attackable_set_size;
  return out.str();
}

std::vector<std::string> split_csv_row(const std::string& row) {
  std::vector<std::string> cells;
  std::string cell;
  for (const char ch : row) {
    if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r' && ch != '\n') {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace advlab

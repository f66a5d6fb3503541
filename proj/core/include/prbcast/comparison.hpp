#pragma once

#include <string>
#include <vector>

#include "prbcast/metrics.hpp"

namespace prbcast {

/// Model-comparison table: metrics as rows (MSE, MASE, MAPE, ND, then
/// QL/Coverage at 0.1, 0.5, 0.9), models as columns, with a per-row best
/// marker. Best is the minimum for loss rows and the coverage closest to
/// its level for coverage rows.
struct ComparisonTable {
  std::vector<metrics::EvaluationReport> reports;  ///< column order

  /// Aligned text table; best value per row marked with '*', absent metrics
  /// shown as '-'.
  std::string to_text() const;

  /// Deterministic JSON (rows, columns, values, best markers).
  std::string to_json() const;

  /// Column index of the best value for a row label ("MSE", "QL[0.5]",
  /// "Coverage[0.9]", ...); -1 when no column has the metric.
  int best_column(const std::string& row_label) const;
};

}  // namespace prbcast

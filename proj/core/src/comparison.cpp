#include "prbcast/comparison.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "prbcast/errors.hpp"

namespace prbcast {

namespace {

struct Row {
  std::string label;
  double target_level = -1.0;  // >= 0 for coverage rows
};

const std::vector<Row>& table_rows() {
  static const std::vector<Row> rows = {
      {"MSE"},          {"MASE"},          {"MAPE"},         {"ND"},
      {"QL[0.1]"},      {"Coverage[0.1]", 0.1},
      {"QL[0.5]"},      {"Coverage[0.5]", 0.5},
      {"QL[0.9]"},      {"Coverage[0.9]", 0.9},
  };
  return rows;
}

std::size_t level_index(double level) {
  for (std::size_t i = 0; i < metrics::kQuantileLevels.size(); ++i) {
    if (std::abs(metrics::kQuantileLevels[i] - level) < 1e-9) return i;
  }
  throw ContractError("comparison: level " + std::to_string(level) + " not in the report grid");
}

std::optional<double> row_value(const metrics::EvaluationReport& r, const std::string& label) {
  if (label == "MSE") return r.mse;
  if (label == "MASE") return r.mase_scaled;
  if (label == "MAPE") return r.mape;
  if (label == "ND") return r.nd;
  if (label.rfind("QL[", 0) == 0) {
    if (!r.quantile_loss) return std::nullopt;
    return (*r.quantile_loss)[level_index(std::stod(label.substr(3)))];
  }
  if (label.rfind("Coverage[", 0) == 0) {
    if (!r.coverage) return std::nullopt;
    return (*r.coverage)[level_index(std::stod(label.substr(9)))];
  }
  throw ContractError("comparison: unknown row label '" + label + "'");
}

int best_index(const ComparisonTable& table, const Row& row) {
  int best = -1;
  double best_score = 0.0;
  for (std::size_t c = 0; c < table.reports.size(); ++c) {
    const auto v = row_value(table.reports[c], row.label);
    if (!v) continue;
    const double score = row.target_level >= 0.0 ? std::abs(*v - row.target_level) : *v;
    if (best < 0 || score < best_score) {
      best = static_cast<int>(c);
      best_score = score;
    }
  }
  return best;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

int ComparisonTable::best_column(const std::string& row_label) const {
  for (const Row& row : table_rows()) {
    if (row.label == row_label) return best_index(*this, row);
  }
  throw ContractError("comparison: unknown row label '" + row_label + "'");
}

std::string ComparisonTable::to_text() const {
  std::vector<std::size_t> widths;
  std::vector<std::string> headers = {"Metric"};
  for (const auto& r : reports) headers.push_back(r.model);

  // Collect cell texts first so the columns can be sized.
  std::vector<std::vector<std::string>> cells;
  for (const Row& row : table_rows()) {
    std::vector<std::string> line = {row.label};
    const int best = best_index(*this, row);
    for (std::size_t c = 0; c < reports.size(); ++c) {
      const auto v = row_value(reports[c], row.label);
      if (!v) {
        line.push_back("-");
      } else {
        line.push_back((static_cast<int>(c) == best ? "*" : "") + fmt(*v));
      }
    }
    cells.push_back(std::move(line));
  }

  widths.assign(headers.size(), 0);
  for (std::size_t c = 0; c < headers.size(); ++c) widths[c] = headers[c].size();
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
  }

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      os << line[c];
      if (c + 1 < line.size()) os << std::string(widths[c] - line[c].size() + 2, ' ');
    }
    os << '\n';
  };
  emit(headers);
  for (const auto& line : cells) emit(line);
  os << "\nMASE row: seasonally scaled MAE; the unscaled mean absolute error is the\n"
        "mae_eq2 field of the per-model report JSON. '*' marks the best column per row\n"
        "(minimum loss; coverage closest to its level).\n";
  return os.str();
}

std::string ComparisonTable::to_json() const {
  nlohmann::ordered_json j;
  j["columns"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) j["columns"].push_back(r.model);
  j["rows"] = nlohmann::ordered_json::array();
  for (const Row& row : table_rows()) {
    nlohmann::ordered_json jr;
    jr["metric"] = row.label;
    jr["values"] = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
      const auto v = row_value(r, row.label);
      if (v) {
        jr["values"].push_back(*v);
      } else {
        jr["values"].push_back(nullptr);
      }
    }
    jr["best"] = best_index(*this, row);
    j["rows"].push_back(std::move(jr));
  }
  return j.dump(2);
}

}  // namespace prbcast

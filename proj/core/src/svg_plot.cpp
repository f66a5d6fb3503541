#include "prbcast/svg_plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "prbcast/errors.hpp"

namespace prbcast {

namespace {

constexpr double kWidth = 960.0;
constexpr double kHeight = 540.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 44.0;
constexpr double kMarginBottom = 56.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string color_for(const std::string& name, std::size_t fallback_index) {
  if (name == "actual" || name == "true") return "#111111";
  if (name == "lstm") return "#1f77b4";
  if (name == "sn") return "#d62728";
  if (name == "point") return "#7f7f7f";
  if (name == "median" || name == "deepar") return "#6b8e23";
  if (name == "sff") return "#ff7f0e";
  if (name == "transformer") return "#9467bd";
  static const char* kPalette[] = {"#8c564b", "#e377c2", "#17becf", "#bcbd22"};
  return kPalette[fallback_index % 4];
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

double parse_cell(const std::string& cell, const std::filesystem::path& path, std::size_t lineno) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || p != cell.data() + cell.size()) {
    throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad numeric cell '" + cell +
                     "'");
  }
  return v;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Csv read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  csv.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    csv.rows.push_back(split_csv_line(line));
  }
  if (csv.rows.empty()) throw ParseError(path.string() + ": no data rows");
  return csv;
}

int column_of(const Csv& csv, const std::string& name) {
  for (std::size_t i = 0; i < csv.header.size(); ++i) {
    if (csv.header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

struct Scale {
  double lo, hi, plot_lo, plot_hi;
  double at(double v) const { return plot_lo + (v - lo) / (hi - lo) * (plot_hi - plot_lo); }
};

double nice_step(double range, int target_ticks) {
  const double raw = range / std::max(1, target_ticks);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= mult * mag) return mult * mag;
  }
  return 10.0 * mag;
}

void draw_axes(std::ostringstream& svg, const Scale& x, const Scale& y, std::size_t n_points,
               const std::string& y_label) {
  svg << "<line x1=\"" << fmt(kMarginLeft) << "\" y1=\"" << fmt(kHeight - kMarginBottom)
      << "\" x2=\"" << fmt(kWidth - kMarginRight) << "\" y2=\"" << fmt(kHeight - kMarginBottom)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << fmt(kMarginLeft) << "\" y1=\"" << fmt(kMarginTop) << "\" x2=\""
      << fmt(kMarginLeft) << "\" y2=\"" << fmt(kHeight - kMarginBottom)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  const double ystep = nice_step(y.hi - y.lo, 5);
  for (double tick = std::ceil(y.lo / ystep) * ystep; tick <= y.hi + 1e-9; tick += ystep) {
    const double py = y.at(tick);
    svg << "<line x1=\"" << fmt(kMarginLeft - 4) << "\" y1=\"" << fmt(py) << "\" x2=\""
        << fmt(kMarginLeft) << "\" y2=\"" << fmt(py) << "\" stroke=\"#333333\"/>\n";
    svg << "<text x=\"" << fmt(kMarginLeft - 8) << "\" y=\"" << fmt(py + 4)
        << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">" << fmt(tick)
        << "</text>\n";
  }
  const std::size_t xtick = std::max<std::size_t>(1, n_points / 8);
  for (std::size_t i = 0; i < n_points; i += xtick) {
    const double px = x.at(static_cast<double>(i));
    svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(kHeight - kMarginBottom) << "\" x2=\""
        << fmt(px) << "\" y2=\"" << fmt(kHeight - kMarginBottom + 4) << "\" stroke=\"#333333\"/>\n";
    svg << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(kHeight - kMarginBottom + 18)
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << i
        << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"" << fmt(kHeight - 12)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">step</text>\n";
  svg << "<text x=\"18\" y=\"" << fmt(kHeight / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 18 "
      << fmt(kHeight / 2) << ")\">" << y_label << "</text>\n";
}

void draw_legend(std::ostringstream& svg, const std::vector<std::pair<std::string, std::string>>& entries) {
  double ly = kMarginTop + 6.0;
  const double lx = kWidth - kMarginRight - 150.0;
  for (const auto& [name, color] : entries) {
    svg << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly - 9) << "\" width=\"14\" height=\"4\" fill=\""
        << color << "\"/>\n";
    svg << "<text x=\"" << fmt(lx + 20) << "\" y=\"" << fmt(ly - 2)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << name << "</text>\n";
    ly += 18.0;
  }
}

void draw_polyline(std::ostringstream& svg, const Scale& x, const Scale& y,
                   const std::vector<double>& values, const std::string& color) {
  svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) svg << ' ';
    svg << fmt(x.at(static_cast<double>(i))) << ',' << fmt(y.at(values[i]));
  }
  svg << "\"/>\n";
}

std::string svg_open(const std::string& title) {
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">"
      << title << "</text>\n";
  return svg.str();
}

}  // namespace

ForecastPlotData parse_forecast_csv(const std::filesystem::path& path) {
  const Csv csv = read_csv(path);
  std::vector<std::string> missing;
  const int actual_col = column_of(csv, "actual");
  if (actual_col < 0) missing.push_back("actual");
  const int median_col = column_of(csv, "median");
  const int q10_col = column_of(csv, "q0.1");
  const int q90_col = column_of(csv, "q0.9");
  const bool any_band = median_col >= 0 || q10_col >= 0 || q90_col >= 0;
  if (any_band) {
    if (median_col < 0) missing.push_back("median");
    if (q10_col < 0) missing.push_back("q0.1");
    if (q90_col < 0) missing.push_back("q0.9");
  }
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
    throw ParseError(path.string() + ": missing required columns: " + joined);
  }

  ForecastPlotData data;
  std::vector<std::pair<int, std::string>> line_cols;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    const std::string& name = csv.header[c];
    if (name == "window" || name == "step" || name == "timestamp" || name == "actual" ||
        name == "median" || name == "q0.1" || name == "q0.9") {
      continue;
    }
    line_cols.emplace_back(static_cast<int>(c), name);
    data.lines.emplace_back(name, std::vector<double>{});
  }

  std::size_t lineno = 1;
  for (const auto& row : csv.rows) {
    ++lineno;
    if (row.size() != csv.header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(csv.header.size()) + " cells, got " +
                       std::to_string(row.size()));
    }
    data.actual.push_back(parse_cell(row[static_cast<std::size_t>(actual_col)], path, lineno));
    for (std::size_t li = 0; li < line_cols.size(); ++li) {
      data.lines[li].second.push_back(
          parse_cell(row[static_cast<std::size_t>(line_cols[li].first)], path, lineno));
    }
    if (any_band) {
      data.median.push_back(parse_cell(row[static_cast<std::size_t>(median_col)], path, lineno));
      data.q10.push_back(parse_cell(row[static_cast<std::size_t>(q10_col)], path, lineno));
      data.q90.push_back(parse_cell(row[static_cast<std::size_t>(q90_col)], path, lineno));
    }
  }
  return data;
}

HistogramPlotData parse_histogram_csv(const std::filesystem::path& path) {
  const Csv csv = read_csv(path);
  if (csv.header.empty() || csv.header[0] != "bin_left") {
    throw ParseError(path.string() + ": missing required columns: bin_left");
  }
  HistogramPlotData data;
  std::vector<int> count_cols;
  std::vector<int> marker_cols;
  for (std::size_t c = 1; c < csv.header.size(); ++c) {
    if (csv.header[c].rfind("marker_", 0) == 0) {
      marker_cols.push_back(static_cast<int>(c));
      data.markers.emplace_back(csv.header[c].substr(7), 0.0);
    } else {
      count_cols.push_back(static_cast<int>(c));
      data.counts.emplace_back(csv.header[c], std::vector<int>{});
    }
  }
  std::size_t lineno = 1;
  for (const auto& row : csv.rows) {
    ++lineno;
    data.bin_left.push_back(parse_cell(row.at(0), path, lineno));
    for (std::size_t i = 0; i < count_cols.size(); ++i) {
      data.counts[i].second.push_back(static_cast<int>(
          parse_cell(row.at(static_cast<std::size_t>(count_cols[i])), path, lineno)));
    }
    for (std::size_t i = 0; i < marker_cols.size(); ++i) {
      data.markers[i].second = parse_cell(row.at(static_cast<std::size_t>(marker_cols[i])), path, lineno);
    }
  }
  return data;
}

std::string render_forecast_svg(const ForecastPlotData& data, const std::string& title) {
  const std::size_t n = data.actual.size();
  double lo = data.actual[0];
  double hi = lo;
  auto expand = [&](const std::vector<double>& v) {
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  };
  expand(data.actual);
  for (const auto& [name, line] : data.lines) expand(line);
  expand(data.median);
  expand(data.q10);
  expand(data.q90);
  const double pad = (hi - lo) * 0.05 + 1e-9;
  const Scale x{0.0, static_cast<double>(n > 1 ? n - 1 : 1), kMarginLeft, kWidth - kMarginRight};
  const Scale y{lo - pad, hi + pad, kHeight - kMarginBottom, kMarginTop};

  std::ostringstream svg;
  svg << svg_open(title);
  draw_axes(svg, x, y, n, "PRBs in use");

  std::vector<std::pair<std::string, std::string>> legend;
  if (!data.q10.empty()) {
    // The single shaded band polygon: q0.9 forward, q0.1 back.
    svg << "<polygon fill=\"" << color_for("median", 0) << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      if (i) svg << ' ';
      svg << fmt(x.at(static_cast<double>(i))) << ',' << fmt(y.at(data.q90[i]));
    }
    for (std::size_t i = n; i-- > 0;) {
      svg << ' ' << fmt(x.at(static_cast<double>(i))) << ',' << fmt(y.at(data.q10[i]));
    }
    svg << "\"/>\n";
    legend.emplace_back("q0.1-q0.9", color_for("median", 0));
  }
  draw_polyline(svg, x, y, data.actual, color_for("actual", 0));
  legend.emplace_back("actual", color_for("actual", 0));
  std::size_t palette = 0;
  for (const auto& [name, line] : data.lines) {
    const std::string color = color_for(name, palette++);
    draw_polyline(svg, x, y, line, color);
    legend.emplace_back(name, color);
  }
  if (!data.median.empty()) {
    draw_polyline(svg, x, y, data.median, color_for("median", 0));
    legend.emplace_back("median", color_for("median", 0));
  }
  draw_legend(svg, legend);
  svg << "</svg>\n";
  return svg.str();
}

std::string render_histogram_svg(const HistogramPlotData& data, const std::string& title) {
  const std::size_t bins = data.bin_left.size();
  if (bins < 2) throw ContractError("histogram plot: need at least 2 bins");
  const double bin_width = data.bin_left[1] - data.bin_left[0];
  const double lo = data.bin_left.front();
  double hi = data.bin_left.back() + bin_width;
  double value_lo = lo;
  double value_hi = hi;
  for (const auto& [name, v] : data.markers) {
    value_lo = std::min(value_lo, v);
    value_hi = std::max(value_hi, v);
  }
  int max_count = 1;
  for (const auto& [name, counts] : data.counts) {
    for (int c : counts) max_count = std::max(max_count, c);
  }

  const double pad = (value_hi - value_lo) * 0.04 + 1e-9;
  const Scale x{value_lo - pad, value_hi + pad, kMarginLeft, kWidth - kMarginRight};
  const Scale y{0.0, static_cast<double>(max_count) * 1.08, kHeight - kMarginBottom, kMarginTop};

  std::ostringstream svg;
  svg << svg_open(title);

  // x tick labels in value units
  svg << "<line x1=\"" << fmt(kMarginLeft) << "\" y1=\"" << fmt(kHeight - kMarginBottom)
      << "\" x2=\"" << fmt(kWidth - kMarginRight) << "\" y2=\"" << fmt(kHeight - kMarginBottom)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << fmt(kMarginLeft) << "\" y1=\"" << fmt(kMarginTop) << "\" x2=\""
      << fmt(kMarginLeft) << "\" y2=\"" << fmt(kHeight - kMarginBottom)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  const double xstep = nice_step(x.hi - x.lo, 6);
  for (double tick = std::ceil(x.lo / xstep) * xstep; tick <= x.hi + 1e-9; tick += xstep) {
    svg << "<text x=\"" << fmt(x.at(tick)) << "\" y=\"" << fmt(kHeight - kMarginBottom + 18)
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << fmt(tick)
        << "</text>\n";
  }
  const double cstep = nice_step(y.lo < y.hi ? y.hi - y.lo : 1.0, 5);
  for (double tick = 0.0; tick <= y.hi + 1e-9; tick += cstep) {
    svg << "<text x=\"" << fmt(kMarginLeft - 8) << "\" y=\"" << fmt(y.at(tick) + 4)
        << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">" << fmt(tick)
        << "</text>\n";
  }

  const std::size_t models = data.counts.size();
  std::vector<std::pair<std::string, std::string>> legend;
  for (std::size_t m = 0; m < models; ++m) {
    const auto& [name, counts] = data.counts[m];
    const std::string color = color_for(name, m);
    legend.emplace_back(name, color);
    for (std::size_t b = 0; b < bins; ++b) {
      const double left = data.bin_left[b] + bin_width * static_cast<double>(m) /
                                                 static_cast<double>(models);
      const double right = data.bin_left[b] + bin_width * static_cast<double>(m + 1) /
                                                  static_cast<double>(models);
      const double top = y.at(static_cast<double>(counts[b]));
      const double bottom = y.at(0.0);
      svg << "<rect class=\"bar bar-" << name << "\" x=\"" << fmt(x.at(left)) << "\" y=\""
          << fmt(top) << "\" width=\"" << fmt(std::max(0.5, x.at(right) - x.at(left) - 0.5))
          << "\" height=\"" << fmt(bottom - top) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.7\"/>\n";
    }
  }
  for (std::size_t i = 0; i < data.markers.size(); ++i) {
    const auto& [name, value] = data.markers[i];
    const std::string color = color_for(name, i);
    svg << "<line class=\"marker marker-" << name << "\" x1=\"" << fmt(x.at(value)) << "\" y1=\""
        << fmt(kMarginTop) << "\" x2=\"" << fmt(x.at(value)) << "\" y2=\""
        << fmt(kHeight - kMarginBottom) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n";
    legend.emplace_back(name, color);
  }
  svg << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"" << fmt(kHeight - 12)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">PRBs in use</text>\n";
  svg << "<text x=\"18\" y=\"" << fmt(kHeight / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 18 "
      << fmt(kHeight / 2) << ")\">count</text>\n";
  draw_legend(svg, legend);
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace prbcast

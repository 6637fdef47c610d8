/*
 * Copyright 2026 The kbudget Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kbudget/report.hpp"

#include "kbudget/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace kbudget {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw ArgumentError("cannot format number");
  return std::string(buf, ptr);
}

double parse_number(std::string_view text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "true") return 1.0;
  if (text == "false") return 0.0;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ArgumentError("malformed number '" + std::string(text) + "' in CSV");
  return value;
}

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ArgumentError("CSV has no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::numbers(std::string_view name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(parse_number(row.at(c)));
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size())
        throw FormatError(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                          std::to_string(table.header.size()));
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  const auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  return out;
}

CsvTable ranking_table(const Ranking& ranking) {
  CsvTable table;
  const Index s = ranking.entries.empty() ? 0 : ranking.entries.front().strategy.num_sequences();
  for (Index i = 1; i <= s; ++i) table.header.push_back("lambda_" + std::to_string(i));
  for (Index i = 1; i <= s; ++i) table.header.push_back("n_" + std::to_string(i));
  for (const char* name : {"cost", "feasible", "mean_l1", "psnr", "ssim"}) table.header.emplace_back(name);
  for (Index i = 1; i <= s; ++i) table.header.push_back("psnr_s" + std::to_string(i));
  for (Index i = 1; i <= s; ++i) table.header.push_back("ssim_s" + std::to_string(i));
  table.header.emplace_back("zf_psnr");

  for (const auto& e : ranking.entries) {
    std::vector<std::string> row;
    for (double f : e.strategy.factors) row.push_back(format_number(f));
    for (Index n : e.strategy.line_counts) row.push_back(std::to_string(n));
    row.push_back(format_number(e.cost));
    row.emplace_back(e.feasible ? "true" : "false");
    row.push_back(format_number(e.mean_l1));
    row.push_back(format_number(e.psnr));
    row.push_back(format_number(e.ssim));
    for (double v : e.psnr_per_sequence) row.push_back(format_number(v));
    for (double v : e.ssim_per_sequence) row.push_back(format_number(v));
    row.push_back(format_number(e.zf_psnr));
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable train_report_table(const TrainReport& report) {
  CsvTable table;
  table.header = {"epoch", "train_loss", "val_loss", "seconds"};
  for (std::size_t i = 0; i < report.train_loss.size(); ++i)
    table.rows.push_back({std::to_string(i + 1), format_number(report.train_loss[i]),
                          format_number(report.val_loss[i]), format_number(report.seconds[i])});
  return table;
}

CsvTable evaluation_table(const StrategyScore& score) {
  CsvTable table;
  table.header = {"scope", "mean_l1", "psnr", "ssim"};
  table.rows.push_back({"stack", format_number(score.mean_l1), format_number(score.psnr), format_number(score.ssim)});
  for (std::size_t s = 0; s < score.psnr_per_sequence.size(); ++s)
    table.rows.push_back({"s" + std::to_string(s + 1), format_number(score.l1_per_sequence[s]),
                          format_number(score.psnr_per_sequence[s]), format_number(score.ssim_per_sequence[s])});
  return table;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Axis {
  double lo, hi;

  static Axis fit(const std::vector<double>& values) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi == lo) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
  }

  // Non-finite values are pinned to the nearest edge.
  double unit(double v) const {
    if (std::isnan(v) || v == -std::numeric_limits<double>::infinity()) return 0.0;
    if (v == std::numeric_limits<double>::infinity()) return 1.0;
    return (v - lo) / (hi - lo);
  }
};

}  // namespace

std::string scatter_svg(const CsvTable& ranking, const ScatterOptions& options) {
  if (ranking.rows.empty()) throw ArgumentError("ranking CSV has no rows to plot");
  const std::vector<double> xs = ranking.numbers(options.x_column);
  const std::vector<double> ys = ranking.numbers(options.y_column);

  constexpr double width = 640, height = 480, left = 70, right = 20, top = 30, bottom = 60;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const Axis ax = Axis::fit(xs), ay = Axis::fit(ys);
  const auto px = [&](double v) { return left + ax.unit(v) * plot_w; };
  const auto py = [&](double v) { return top + (1.0 - ay.unit(v)) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<g stroke=\"black\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
      << top + plot_h << "\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h << "\"/>\n";
  svg << "</g>\n";

  constexpr int ticks = 5;
  for (int i = 0; i < ticks; ++i) {
    const double u = static_cast<double>(i) / (ticks - 1);
    const double vx = ax.lo + u * (ax.hi - ax.lo), vy = ay.lo + u * (ay.hi - ay.lo);
    const std::string x = fixed(left + u * plot_w, 2), y = fixed(top + (1.0 - u) * plot_h, 2);
    svg << "<line class=\"tick\" x1=\"" << x << "\" y1=\"" << top + plot_h << "\" x2=\"" << x << "\" y2=\""
        << top + plot_h + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">" << fixed(vx, 2)
        << "</text>\n";
    svg << "<line class=\"tick\" x1=\"" << left - 5 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y << "\" text-anchor=\"end\" dominant-baseline=\"middle\">"
        << fixed(vy, 2) << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">"
      << options.x_column << "</text>\n";
  svg << "<text x=\"15\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << top + plot_h / 2 << ")\">" << options.y_column << "</text>\n";

  // Top-K drawn last so they stay visible.
  const std::size_t k = std::min(options.highlight, xs.size());
  for (std::size_t pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const bool top_entry = i < k;
      if (top_entry != (pass == 1)) continue;
      svg << "<circle class=\"" << (top_entry ? "marker top" : "marker") << "\" cx=\"" << fixed(px(xs[i]), 2)
          << "\" cy=\"" << fixed(py(ys[i]), 2) << "\" r=\"" << (top_entry ? 5 : 3.5) << "\" fill=\""
          << (top_entry ? "#cc3311" : "#4477aa") << "\" fill-opacity=\"0.8\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace kbudget

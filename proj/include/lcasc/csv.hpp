#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lcasc/checkpoint.hpp"
#include "lcasc/error.hpp"
#include "lcasc/metrics.hpp"
#include "lcasc/trainer.hpp"
#include "lcasc/viz.hpp"

namespace lcasc {

// Shortest text that round-trips the double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string format_stats_csv(const TrainStats& stats) {
  std::string out = "epoch,mse,energy,percent_active,dict_delta\n";
  for (const auto& s : stats) {
    out += std::to_string(s.epoch) + "," + format_double(s.mse) + "," + format_double(s.energy) +
           "," + format_double(s.percent_active) + "," + format_double(s.dict_delta) + "\n";
  }
  return out;
}

namespace detail {
inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.emplace_back(line.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline double to_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw FormatError(where + ": invalid number '" + s + "'");
  }
  return v;
}

inline std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  for (auto& l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    out.push_back(std::move(l));
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}
}  // namespace detail

inline TrainStats parse_stats_csv(std::string_view text) {
  const auto lines = detail::lines_of(text);
  if (lines.empty() || lines[0] != "epoch,mse,energy,percent_active,dict_delta") {
    throw FormatError("stats CSV: missing header");
  }
  TrainStats out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "stats CSV line " + std::to_string(i + 1);
    const auto f = detail::split(lines[i], ',');
    if (f.size() != 5) throw FormatError(where + ": expected 5 fields");
    EpochStats s;
    s.epoch = static_cast<std::size_t>(detail::to_double(f[0], where));
    s.mse = detail::to_double(f[1], where);
    s.energy = detail::to_double(f[2], where);
    s.percent_active = detail::to_double(f[3], where);
    s.dict_delta = detail::to_double(f[4], where);
    out.push_back(s);
  }
  return out;
}

inline std::string format_trace_csv(std::span<const double> trace) {
  std::string out = "step,energy\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_double(trace[i]) + "\n";
  }
  return out;
}

// Three blocks separated by blank lines, each introduced by a `# name` line:
// summary (metric,value), per_element (k,usage_frequency) and per_image
// (index,percent_active,intra_mean).
inline std::string format_metrics_csv(const MetricsReport& r, bool include_pooled = false) {
  std::string out = "# summary\nmetric,value\n";
  const auto row = [&out](const std::string& k, const std::string& v) { out += k + "," + v + "\n"; };
  row("model_kind", to_string(r.model_kind));
  row("num_images", std::to_string(r.percent_active_per_image.size()));
  row("num_elements", std::to_string(r.usage_frequency_per_element.size()));
  row("crosscorr_mean", format_double(r.crosscorr_mean));
  row("crosscorr_intra_std", format_double(r.crosscorr_intra_std));
  row("crosscorr_inter_std", format_double(r.crosscorr_inter_std));
  if (include_pooled) row("crosscorr_inter_std_pooled", format_double(r.crosscorr_pooled_std));
  row("median_percent_active", format_double(median(r.percent_active_per_image)));
  row("mean_percent_active", format_double(detail::mean_of(r.percent_active_per_image)));
  row("mean_percent_active_eps", format_double(detail::mean_of(r.percent_active_eps_per_image)));
  row("nonzero_total", std::to_string(r.nonzero_total));
  row("sites_per_image", std::to_string(r.sites_per_image));

  out += "\n# per_element\nk,usage_frequency\n";
  for (std::size_t k = 0; k < r.usage_frequency_per_element.size(); ++k) {
    row(std::to_string(k), format_double(r.usage_frequency_per_element[k]));
  }
  out += "\n# per_image\nindex,percent_active,intra_mean\n";
  for (std::size_t i = 0; i < r.percent_active_per_image.size(); ++i) {
    out += std::to_string(i) + "," + format_double(r.percent_active_per_image[i]) + "," +
           format_double(r.intra_mean_per_image[i]) + "\n";
  }
  return out;
}

// Parsed form of a metrics CSV: summary as key/value text, the two tables as
// numeric columns.
struct MetricsCsv {
  std::vector<std::pair<std::string, std::string>> summary;
  std::vector<double> usage_frequency;
  std::vector<double> percent_active;
  std::vector<double> intra_mean;

  const std::string& get(std::string_view key) const {
    for (const auto& [k, v] : summary) {
      if (k == key) return v;
    }
    throw FormatError("metrics CSV: no summary entry '" + std::string(key) + "'");
  }
};

inline MetricsCsv parse_metrics_csv(std::string_view text) {
  MetricsCsv out;
  enum class Block { none, summary, per_element, per_image } block = Block::none;
  bool expect_header = false;
  const auto lines = detail::lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::string where = "metrics CSV line " + std::to_string(i + 1);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string name = line.substr(line.find_first_not_of("# "));
      if (name == "summary") block = Block::summary;
      else if (name == "per_element") block = Block::per_element;
      else if (name == "per_image") block = Block::per_image;
      else throw FormatError(where + ": unknown block '" + name + "'");
      expect_header = true;
      continue;
    }
    if (expect_header) {
      expect_header = false;
      continue;
    }
    const auto f = detail::split(line, ',');
    switch (block) {
      case Block::summary:
        if (f.size() != 2) throw FormatError(where + ": expected metric,value");
        out.summary.emplace_back(f[0], f[1]);
        break;
      case Block::per_element:
        if (f.size() != 2) throw FormatError(where + ": expected k,usage_frequency");
        out.usage_frequency.push_back(detail::to_double(f[1], where));
        break;
      case Block::per_image:
        if (f.size() != 3) throw FormatError(where + ": expected index,percent_active,intra_mean");
        out.percent_active.push_back(detail::to_double(f[1], where));
        out.intra_mean.push_back(detail::to_double(f[2], where));
        break;
      case Block::none:
        throw FormatError(where + ": data outside of a block");
    }
  }
  return out;
}

inline std::string format_histogram_csv(const Histogram& h) {
  std::string out = "bin,lo,hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out += std::to_string(i) + "," + format_double(h.edges[i]) + "," + format_double(h.edges[i + 1]) +
           "," + std::to_string(h.counts[i]) + "\n";
  }
  return out;
}

// One number per line; blank lines and `#` comments skipped. A CSV column can
// be selected by name when the first line is a header.
inline std::vector<double> parse_value_column(std::string_view text, std::string_view column = {}) {
  const auto lines = detail::lines_of(text);
  std::vector<double> out;
  std::size_t col = 0;
  std::size_t first = 0;
  if (!column.empty()) {
    if (lines.empty()) throw FormatError("values: empty input");
    const auto header = detail::split(lines[0], ',');
    const auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) throw FormatError("values: no column '" + std::string(column) + "'");
    col = static_cast<std::size_t>(it - header.begin());
    first = 1;
  }
  for (std::size_t i = first; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    const auto f = detail::split(lines[i], ',');
    const std::string where = "values line " + std::to_string(i + 1);
    if (col >= f.size()) throw FormatError(where + ": missing column");
    out.push_back(detail::to_double(f[col], where));
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace lcasc

#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "divid/eval/metrics.hpp"

namespace divid::eval {

// Out-domain columns of the second table, in display order.
inline const std::vector<std::pair<std::string, std::string>>& out_domain_columns() {
  static const std::vector<std::pair<std::string, std::string>> cols{{"gen2", "Gen-2"}, {"pika", "Pika"}, {"sora", "SORA"}};
  return cols;
}

struct ReportRow {
  std::string input;         // "RGB", "DIRE", "DIRE + RGB"
  std::string architecture;  // "CNN" or "CNN+LSTM"
  MetricsReport metrics;
};

inline std::string input_label(const std::string& fusion) {
  if (fusion == "rgb") return "RGB";
  if (fusion == "dire") return "DIRE";
  if (fusion == "dire+rgb") return "DIRE + RGB";
  return fusion;
}

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Aligned '|'-separated table; the first row is the header.
inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], r[i].size());
    }
  std::string out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += " | ";
      out += r[i];
      if (i + 1 < r.size()) out.append(width[i] - r[i].size(), ' ');
    }
    out += '\n';
  };
  line(rows.front());
  std::vector<std::string> rule;
  for (auto w : width) rule.emplace_back(w, '-');
  for (std::size_t i = 0; i < rule.size(); ++i) {
    if (i) out += "-+-";
    out += rule[i];
  }
  out += '\n';
  for (std::size_t i = 1; i < rows.size(); ++i) line(rows[i]);
  return out;
}

inline std::string in_domain_table(const std::vector<ReportRow>& rows) {
  std::vector<std::vector<std::string>> t{{"Input", "Architecture", "Acc.", "AP"}};
  for (const auto& r : rows)
    t.push_back({r.input, r.architecture, fmt2(r.metrics.accuracy), fmt2(r.metrics.average_precision)});
  return render_table(t);
}

// Columns without clips of that source show "-"; Total Avg. covers every fake source present.
inline std::string out_domain_table(const std::vector<ReportRow>& rows) {
  std::vector<std::vector<std::string>> t{{"Input", "Model"}};
  for (const auto& [_, title] : out_domain_columns()) t.front().push_back(title);
  t.front().push_back("Total Avg.");
  for (const auto& r : rows) {
    std::vector<std::string> line{r.input, r.architecture};
    for (const auto& [key, _] : out_domain_columns()) {
      auto it = r.metrics.per_source.find(key);
      line.push_back(it == r.metrics.per_source.end() ? "-" : fmt2(it->second));
    }
    line.push_back(r.metrics.per_source.empty() ? "-" : fmt2(r.metrics.total_average));
    t.push_back(std::move(line));
  }
  return render_table(t);
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"accuracy", m.accuracy},         {"average_precision", m.average_precision},
          {"per_source", m.per_source},     {"total_average", m.total_average},
          {"n_frames", m.n_frames},         {"clip_accuracy", m.clip_accuracy},
          {"n_clips", m.n_clips},           {"config_digest", m.config_digest}};
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.accuracy = j.at("accuracy").get<double>();
  m.average_precision = j.at("average_precision").get<double>();
  m.per_source = j.at("per_source").get<std::map<std::string, double>>();
  m.total_average = j.at("total_average").get<double>();
  m.n_frames = j.at("n_frames").get<std::size_t>();
  m.clip_accuracy = j.value("clip_accuracy", 0.0);
  m.n_clips = j.value("n_clips", std::size_t{0});
  m.config_digest = j.value("config_digest", std::string{});
  return m;
}

inline nlohmann::json to_json(const ReportRow& r) {
  return {{"input", r.input}, {"architecture", r.architecture}, {"metrics", to_json(r.metrics)}};
}

}  // namespace divid::eval

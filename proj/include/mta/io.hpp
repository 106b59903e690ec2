#pragma once

// File formats: task data CSV, labeled similarity matrices, point sets, and
// the CSV/JSON risk reports.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mta/errors.hpp"
#include "mta/estimators.hpp"
#include "mta/graph.hpp"
#include "mta/simulate.hpp"

namespace mta {

/// Malformed input file; names the file, 1-based line and the field.
class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& field,
             const std::string& message)
      : InvalidInput(file + ":" + std::to_string(line) + ": field '" + field + "': " + message) {}
};

namespace csv {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(b, e - b + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) fields.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return errno == 0 && end == text.c_str() + text.size() && std::isfinite(out);
}

inline bool is_blank(const std::string& line) { return trim(line).empty(); }

/// Non-blank lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "", "cannot open file");
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
    if (!is_blank(line)) lines.emplace_back(number, line);
  }
  return lines;
}

}  // namespace csv

/// 17 significant digits: parses back to the identical double.
inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// CSV with header `task_id,value`, one sample per row. Tasks keep the order
/// in which they first appear.
inline std::vector<TaskSamples> read_task_data(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError(path, 1, "header", "empty file");
  const auto header = csv::split(lines.front().second);
  if (header.size() != 2 || header[0] != "task_id" || header[1] != "value") {
    throw ParseError(path, lines.front().first, "header", "expected 'task_id,value'");
  }
  std::vector<TaskSamples> tasks;
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& [number, line] = lines[k];
    const auto fields = csv::split(line);
    if (fields.size() != 2) {
      throw ParseError(path, number, "row", "expected 2 fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(path, number, "task_id", "empty task id");
    double v = 0.0;
    if (!csv::parse_double(fields[1], v)) {
      throw ParseError(path, number, "value", "'" + fields[1] + "' is not a finite number");
    }
    auto [it, inserted] = index.try_emplace(fields[0], tasks.size());
    if (inserted) tasks.push_back(TaskSamples{fields[0], {}});
    tasks[it->second].values.push_back(v);
  }
  if (tasks.empty()) throw ParseError(path, lines.front().first + 1, "row", "no data rows");
  return tasks;
}

/// Similarity file: the first row and first column carry task labels.
struct LabeledSimilarity {
  std::vector<std::string> labels;
  SimilarityMatrix matrix{Matrix(0, 0)};
};

inline LabeledSimilarity read_similarity(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ParseError(path, 1, "header", "empty file");
  const auto header = csv::split(lines.front().second);
  if (header.size() < 2) throw ParseError(path, lines.front().first, "header", "no task labels");
  std::vector<std::string> cols(header.begin() + 1, header.end());
  const auto n = static_cast<Index>(cols.size());
  std::set<std::string> unique(cols.begin(), cols.end());
  if (unique.size() != cols.size()) throw ParseError(path, lines.front().first, "header", "duplicate task label");
  if (static_cast<Index>(lines.size()) - 1 != n) {
    throw ParseError(path, lines.back().first, "row",
                     "matrix is not square: " + std::to_string(n) + " columns, " +
                         std::to_string(lines.size() - 1) + " rows");
  }
  std::map<std::string, Index> col_index;
  for (Index c = 0; c < n; ++c) col_index[cols[static_cast<std::size_t>(c)]] = c;

  Matrix a(n, n);
  std::set<std::string> seen_rows;
  for (Index r = 0; r < n; ++r) {
    const auto& [number, line] = lines[static_cast<std::size_t>(r) + 1];
    const auto fields = csv::split(line);
    if (static_cast<Index>(fields.size()) != n + 1) {
      throw ParseError(path, number, "row", "expected " + std::to_string(n + 1) + " fields");
    }
    const auto it = col_index.find(fields[0]);
    if (it == col_index.end()) throw ParseError(path, number, fields[0], "row label not among column labels");
    if (!seen_rows.insert(fields[0]).second) throw ParseError(path, number, fields[0], "duplicate row label");
    for (Index c = 0; c < n; ++c) {
      const std::string& text = fields[static_cast<std::size_t>(c) + 1];
      double v = 0.0;
      if (!csv::parse_double(text, v) || v < 0.0) {
        throw ParseError(path, number, cols[static_cast<std::size_t>(c)],
                         "'" + text + "' is not a finite non-negative number");
      }
      a(it->second, c) = v;
    }
  }
  return LabeledSimilarity{std::move(cols), SimilarityMatrix(std::move(a))};
}

/// Reorders a labeled similarity to the given task order. The label sets
/// must match exactly.
inline SimilarityMatrix align_similarity(const LabeledSimilarity& s, const std::vector<std::string>& task_ids,
                                         const std::string& path = "similarity") {
  const std::set<std::string> have(s.labels.begin(), s.labels.end());
  const std::set<std::string> want(task_ids.begin(), task_ids.end());
  for (const auto& id : want) {
    if (!have.count(id)) throw ParseError(path, 1, id, "task label missing from similarity file");
  }
  for (const auto& id : have) {
    if (!want.count(id)) throw ParseError(path, 1, id, "similarity label has no matching task");
  }
  std::map<std::string, Index> pos;
  for (std::size_t i = 0; i < s.labels.size(); ++i) pos[s.labels[i]] = static_cast<Index>(i);
  const auto n = static_cast<Index>(task_ids.size());
  Matrix a(n, n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      a(r, c) = s.matrix(pos[task_ids[static_cast<std::size_t>(r)]], pos[task_ids[static_cast<std::size_t>(c)]]);
    }
  }
  return SimilarityMatrix(std::move(a));
}

/// One point per row, d numeric columns. A first row that does not parse as
/// numbers is treated as a header.
inline std::vector<Vector> read_points(const std::string& path) {
  const auto lines = csv::read_lines(path);
  std::vector<Vector> points;
  Index d = -1;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& [number, line] = lines[k];
    const auto fields = csv::split(line);
    Vector p(static_cast<Index>(fields.size()));
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0.0;
      if (!csv::parse_double(fields[j], v)) {
        numeric = false;
        bad = j;
        break;
      }
      p(static_cast<Index>(j)) = v;
    }
    if (!numeric) {
      if (k == 0) continue;
      throw ParseError(path, number, "column " + std::to_string(bad + 1),
                       "'" + fields[bad] + "' is not a finite number");
    }
    if (d < 0) d = p.size();
    if (p.size() != d) {
      throw ParseError(path, number, "row", "expected " + std::to_string(d) + " columns, found " +
                                                std::to_string(p.size()));
    }
    points.push_back(std::move(p));
  }
  if (points.empty()) throw ParseError(path, 1, "row", "no points");
  return points;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
  if (!out) throw InvalidInput("failed writing '" + path + "'");
}

inline std::string estimates_csv(const TaskSummary& s, const EstimateVector& est) {
  std::string out = "task_id,n,sample_mean,estimate\n";
  for (Index t = 0; t < s.size(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    out += s.task_ids[i] + "," + std::to_string(s.counts[i]) + "," + format_number(s.means(t)) + "," +
           format_number(est.values(t)) + "\n";
  }
  return out;
}

inline std::string report_csv_header() { return "sigma_mu_sq,estimator,risk,pct_change,stderr,replicates\n"; }

/// One row per estimator; `stderr` is the standard error of pct_change.
inline std::string report_csv_rows(const RiskReport& r) {
  std::string out;
  for (const auto& row : r.rows) {
    out += format_number(r.sigma_mu_sq) + "," + row.estimator + "," + format_number(row.risk) + "," +
           format_number(row.pct_change) + "," + format_number(row.pct_stderr) + "," +
           std::to_string(r.replicates) + "\n";
  }
  return out;
}

inline nlohmann::json report_json(const RiskReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"estimator", row.estimator},
                    {"risk", row.risk},
                    {"risk_stderr", row.risk_stderr},
                    {"pct_change", row.pct_change},
                    {"stderr", row.pct_stderr}});
  }
  nlohmann::json j{{"replicates", r.replicates}, {"estimators", rows}};
  if (std::isfinite(r.sigma_mu_sq)) j["sigma_mu_sq"] = r.sigma_mu_sq;
  return j;
}

}  // namespace mta

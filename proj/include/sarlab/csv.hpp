#pragma once

// Append-only run logs with a fixed, versioned header, plus a small CSV
// reader for plotting and golden-file comparisons. Doubles are written with
// %.17g so reruns are byte-comparable.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sarlab {

inline constexpr int kRunLogVersion = 1;
inline constexpr const char* kRunLogHeader =
    "run_id,seed,delta,algo,controller,decision_steps,micro_steps,physical_time_s,"
    "episode_return_mean,episode_return_ci95_half,mean_hold_duration_s,wallclock_s";

struct RunLogRow {
  std::string run_id;
  std::uint64_t seed = 0;
  double delta = 0.0;
  std::string algo;
  std::string controller;
  long long decision_steps = 0;
  long long micro_steps = 0;
  double physical_time_s = 0.0;
  double episode_return_mean = 0.0;
  double episode_return_ci95_half = 0.0;
  double mean_hold_duration_s = 0.0;
  double wallclock_s = 0.0;
};

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_runlog_row(const RunLogRow& r) {
  std::string out;
  out.reserve(200);
  out += r.run_id;
  out += ',';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%" PRIu64, r.seed);
  out += buf;
  out += ',';
  out += format_double(r.delta);
  out += ',';
  out += r.algo;
  out += ',';
  out += r.controller;
  out += ',';
  out += std::to_string(r.decision_steps);
  out += ',';
  out += std::to_string(r.micro_steps);
  out += ',';
  out += format_double(r.physical_time_s);
  out += ',';
  out += format_double(r.episode_return_mean);
  out += ',';
  out += format_double(r.episode_return_ci95_half);
  out += ',';
  out += format_double(r.mean_hold_duration_s);
  out += ',';
  out += format_double(r.wallclock_s);
  return out;
}

/// Writes the fixed header on creation and one flushed line per row, so a
/// crashed run still leaves a readable prefix on disk.
class RunLogWriter {
 public:
  explicit RunLogWriter(const std::string& path) : f_(path, std::ios::trunc) {
    if (!f_) throw std::runtime_error("runlog: cannot open " + path);
    f_ << kRunLogHeader << '\n';
    f_.flush();
  }

  void write(const RunLogRow& r) {
    f_ << format_runlog_row(r) << '\n';
    f_.flush();
    if (!f_) throw std::runtime_error("runlog: write failed");
  }

 private:
  std::ofstream f_;
};

// ---------------------------------------------------------------------------
// Reader. No quoting: every value this project writes is comma-free.

struct CsvDoc {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    throw std::invalid_argument("csv: no column named '" + name + "'");
  }

  bool has_col(const std::string& name) const {
    for (const std::string& h : header)
      if (h == name) return true;
    return false;
  }

  double num(std::size_t row, int c) const { return std::stod(rows.at(row).at(std::size_t(c))); }
  const std::string& str(std::size_t row, int c) const { return rows.at(row).at(std::size_t(c)); }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1)
    out.push_back(line.substr(start, pos - start));
  out.push_back(line.substr(start));
  return out;
}

inline CsvDoc read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("csv: cannot open " + path);
  CsvDoc doc;
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  doc.header = split_csv_line(line);
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != doc.header.size())
      throw std::runtime_error("csv: ragged row in " + path);
    doc.rows.push_back(std::move(cells));
  }
  return doc;
}

/// Byte-level equality of two CSV files after blanking the named columns
/// (used to compare reruns while ignoring wallclock).
inline bool csv_equal_ignoring(const std::string& path_a, const std::string& path_b,
                               const std::vector<std::string>& ignored) {
  CsvDoc a = read_csv(path_a), b = read_csv(path_b);
  if (a.header != b.header || a.rows.size() != b.rows.size()) return false;
  std::vector<bool> skip(a.header.size(), false);
  for (const std::string& name : ignored)
    if (a.has_col(name)) skip[std::size_t(a.col(name))] = true;
  for (std::size_t r = 0; r < a.rows.size(); ++r)
    for (std::size_t c = 0; c < a.header.size(); ++c)
      if (!skip[c] && a.rows[r][c] != b.rows[r][c]) return false;
  return true;
}

}  // namespace sarlab

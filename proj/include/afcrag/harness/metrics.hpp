#pragma once

// Summary metrics, their CSV form and the consolidated report.
//
// A metric with a lower and/or upper bound is gated: it passes iff
// lower <= value <= upper. A metric without bounds is informational.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace afcrag::harness {

struct Metric {
  std::string experiment;
  std::string name;
  double value = 0.0;
  std::optional<double> reference;  // published target value, if any
  std::optional<double> lower;
  std::optional<double> upper;

  bool gated() const { return lower.has_value() || upper.has_value(); }
  bool pass() const {
    if (std::isnan(value)) return !gated();
    if (lower && value < *lower) return false;
    if (upper && value > *upper) return false;
    return true;
  }
  std::string verdict() const { return gated() ? (pass() ? "PASS" : "FAIL") : "INFO"; }
};

inline const char* summary_header() { return "experiment,metric,value,reference,lower,upper,pass"; }

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string format_optional(const std::optional<double>& x) {
  return x ? format_number(*x) : std::string();
}

inline std::string to_csv_line(const Metric& m) {
  return m.experiment + "," + m.name + "," + format_number(m.value) + "," + format_optional(m.reference) +
         "," + format_optional(m.lower) + "," + format_optional(m.upper) + "," + m.verdict();
}

inline void write_summary_csv(const std::filesystem::path& path, const std::vector<Metric>& metrics) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << summary_header() << '\n';
  for (const auto& m : metrics) out << to_csv_line(m) << '\n';
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}
}  // namespace detail

// Reads a summary CSV back. The stored verdict is ignored; callers
// recompute it from value and bounds.
inline std::vector<Metric> read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != summary_header())
    throw std::runtime_error(path.string() + ": not a summary CSV");
  std::vector<Metric> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 7)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 7 columns");
    Metric m;
    m.experiment = cells[0];
    m.name = cells[1];
    m.value = std::stod(cells[2]);
    m.reference = detail::parse_optional(cells[3]);
    m.lower = detail::parse_optional(cells[4]);
    m.upper = detail::parse_optional(cells[5]);
    out.push_back(std::move(m));
  }
  return out;
}

struct Report {
  std::vector<Metric> metrics;
  std::vector<std::string> inputs;
  std::vector<std::string> warnings;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(metrics.begin(), metrics.end(),
                                                  [](const Metric& m) { return m.gated() && !m.pass(); }));
  }
};

// Merges every summary_*.csv under dir (sorted by file name).
inline Report build_report(const std::filesystem::path& dir) {
  Report report;
  if (!std::filesystem::is_directory(dir)) {
    report.warnings.push_back("output directory " + dir.string() + " does not exist");
    return report;
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("summary_", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) report.warnings.push_back("no summary CSVs found under " + dir.string());
  for (const auto& f : files) {
    try {
      auto rows = read_summary_csv(f);
      report.inputs.push_back(f.string());
      report.metrics.insert(report.metrics.end(), rows.begin(), rows.end());
    } catch (const std::exception& e) {
      report.warnings.push_back(e.what());
    }
  }
  return report;
}

// ---- small statistics helpers ----

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// 95% Wilson score interval for k successes out of n.
inline Interval wilson(std::uint64_t k, std::uint64_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline bool overlap(const Interval& a, const Interval& b) { return a.lo <= b.hi && b.lo <= a.hi; }

inline double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Linear-interpolation quantile, q in [0, 1].
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / n;
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

// Ordinary least squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_slope needs two equal-length series");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace afcrag::harness

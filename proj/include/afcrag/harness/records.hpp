#pragma once

// Trajectory records and their JSON Lines form.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "afcrag/betting.hpp"

namespace afcrag::harness {

struct StepRow {
  std::uint64_t t = 0;
  int m = 0;
  double b = 0.0;
  double lambda = 0.0;
  double log_e = 0.0;
  double s = 0.0;
  double u_t = 0.0;
  int g = 1;
  std::vector<std::string> actions;
  double gamma_cost = 0.0;
};

struct TrajectorySummary {
  bool alarmed = false;
  std::optional<std::uint64_t> alarm_step;
  double sup_log_e = 0.0;
  bool breach = false;
  double total_cost = 0.0;
  std::uint64_t steps = 0;
  std::string stop_reason = "horizon";  // "horizon" | "alarm"
};

struct TrajectoryRecord {
  std::string regime;
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  std::vector<StepRow> rows;  // empty unless step granularity was requested
  TrajectorySummary summary;
  nlohmann::json extra = nlohmann::json::object();
};

// Rebuilds the terminal summary from per-step rows.
inline TrajectorySummary summarize_rows(const std::vector<StepRow>& rows, double delta_e,
                                        const std::string& stop_reason = "horizon") {
  TrajectorySummary s;
  s.stop_reason = stop_reason;
  s.steps = rows.size();
  const double log_alarm = -std::log(delta_e);
  for (const auto& r : rows) {
    s.sup_log_e = std::max(s.sup_log_e, r.log_e);
    if (!s.alarm_step && r.log_e >= log_alarm - 1e-12) s.alarm_step = r.t;
    if (r.s > r.u_t) s.breach = true;
    s.total_cost += r.gamma_cost;
  }
  s.alarmed = s.alarm_step.has_value();
  return s;
}

namespace detail {
// JSON has no infinities; a bankrupt log-wealth is written as null.
inline nlohmann::json finite_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}
}  // namespace detail

inline nlohmann::json to_json(const StepRow& r) {
  return {{"t", r.t},          {"m", r.m},   {"b", r.b},     {"lambda", r.lambda},
          {"log_e", detail::finite_or_null(r.log_e)},        {"s", r.s},
          {"u_t", r.u_t},      {"g", r.g},   {"actions", r.actions},
          {"gamma_cost", r.gamma_cost}};
}

inline nlohmann::json to_json(const TrajectorySummary& s) {
  nlohmann::json j = {{"alarmed", s.alarmed},
                      {"sup_log_e", detail::finite_or_null(s.sup_log_e)},
                      {"breach", s.breach},
                      {"total_cost", s.total_cost},
                      {"steps", s.steps},
                      {"stop_reason", s.stop_reason}};
  j["alarm_step"] = s.alarm_step ? nlohmann::json(*s.alarm_step) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const TrajectoryRecord& rec) {
  nlohmann::json j = {{"regime", rec.regime}, {"index", rec.index}, {"seed", rec.seed}};
  j["summary"] = to_json(rec.summary);
  if (!rec.extra.empty()) j["extra"] = rec.extra;
  if (!rec.rows.empty()) {
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& r : rec.rows) rows.push_back(to_json(r));
  }
  return j;
}

enum class Granularity : std::uint8_t { none, trajectory, step };

inline Granularity parse_granularity(const std::string& s) {
  if (s == "none") return Granularity::none;
  if (s == "trajectory") return Granularity::trajectory;
  if (s == "step") return Granularity::step;
  throw std::invalid_argument("unknown granularity " + s);
}

// One JSON object per line. A writer for Granularity::none discards input.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  JsonlWriter(const std::filesystem::path& path, Granularity g) : granularity_(g) {
    if (g == Granularity::none) return;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }

  void write(const nlohmann::json& j) {
    if (!out_.is_open()) return;
    out_ << j.dump() << '\n';
  }

  // Step rows are only kept at step granularity.
  void write(const TrajectoryRecord& rec) {
    if (granularity_ == Granularity::step || rec.rows.empty()) {
      write(to_json(rec));
      return;
    }
    auto j = to_json(rec);
    j.erase("rows");
    write(j);
  }

  void write_error(const std::string& regime, std::uint64_t index, std::uint64_t seed,
                   const std::string& error) {
    write(nlohmann::json{{"regime", regime}, {"index", index}, {"seed", seed}, {"error", error}});
  }

  Granularity granularity() const { return granularity_; }

 private:
  Granularity granularity_ = Granularity::none;
  std::ofstream out_;
};

}  // namespace afcrag::harness

#pragma once

// Betting e-process E_t = E_{t-1} (1 + lambda_t (M_t - b_t)) with its
// calibration-truncated companion, predictable bettors and alarm status.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string_view>

namespace afcrag {

enum class AlarmStatus : std::uint8_t { quiet = 0, warning = 1, alarmed = 2 };

inline std::string_view to_string(AlarmStatus s) {
  switch (s) {
    case AlarmStatus::quiet: return "quiet";
    case AlarmStatus::warning: return "warning";
    case AlarmStatus::alarmed: return "alarmed";
  }
  return "unknown";
}

struct AlarmPolicy {
  double delta_e = 0.05;
  double warn_factor = 0.5;
  bool sticky = true;

  void validate() const {
    if (!(delta_e > 0.0 && delta_e < 1.0)) throw std::invalid_argument("delta_e must lie in (0,1)");
    if (!(warn_factor > 0.0 && warn_factor <= 1.0))
      throw std::invalid_argument("warn_factor must lie in (0,1]");
  }
};

struct EProcessState {
  double log_wealth = 0.0;  // -inf encodes E_t = 0
  bool alive = true;        // indicator of the calibration-good event so far
  std::uint64_t t = 0;
  double sum_z = 0.0;
  double sum_z2 = 0.0;
  double peak_log_wealth = 0.0;
  AlarmStatus status = AlarmStatus::quiet;
  std::optional<std::uint64_t> first_alarm_step;
  std::optional<std::uint64_t> first_warning_step;
  std::uint32_t epoch = 1;  // reset mode only
  std::uint32_t resets = 0;

  double wealth() const { return std::exp(log_wealth); }
  double truncated_wealth() const { return alive ? wealth() : 0.0; }
};

struct BettorSpec {
  enum class Kind : std::uint8_t { constant, agrapa };

  Kind kind = Kind::agrapa;
  double lambda0 = 0.0;       // constant kind
  double eps_var = 1.0;       // agrapa variance floor
  double kelly_fraction = 1.0;  // agrapa shrinkage toward zero
  double discount = 1.0;        // forgetting factor of the running sums; 1 keeps all history
  double cap = 3.23;

  static BettorSpec constant(double lambda, double cap) {
    BettorSpec s;
    s.kind = Kind::constant;
    s.lambda0 = lambda;
    s.cap = cap;
    return s;
  }
  static BettorSpec agrapa(double cap, double kelly_fraction = 1.0, double eps_var = 1.0,
                           double discount = 1.0) {
    BettorSpec s;
    s.kind = Kind::agrapa;
    s.cap = cap;
    s.kelly_fraction = kelly_fraction;
    s.discount = discount;
    s.eps_var = eps_var;
    return s;
  }

  void validate() const {
    if (!(cap > 0.0)) throw std::invalid_argument("betting cap must be positive");
    if (kind == Kind::constant && lambda0 < 0.0)
      throw std::invalid_argument("constant betting fraction must be nonnegative");
    if (kind == Kind::agrapa) {
      if (!(eps_var > 0.0)) throw std::invalid_argument("eps_var must be positive");
      if (!(kelly_fraction > 0.0 && kelly_fraction <= 1.0))
        throw std::invalid_argument("kelly_fraction must lie in (0,1]");
      if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must lie in (0,1]");
    }
  }
};

// Per-epoch alarm budget in reset mode: 6 delta_e / (pi^2 k^2).
inline double epoch_alarm_budget(std::uint32_t epoch, double delta_e) {
  if (epoch == 0) throw std::invalid_argument("epoch index must be >= 1");
  const double k = epoch;
  return 6.0 * delta_e / (std::numbers::pi * std::numbers::pi * k * k);
}

// Predictable betting fraction for the next step. Only reads statistics of
// steps already fed through step().
inline double lambda_next(const EProcessState& state, const BettorSpec& bettor, double b_t) {
  if (!(b_t > 0.0 && b_t < 1.0)) throw std::invalid_argument("b_t must lie in (0,1)");
  const double upper = std::min(bettor.cap, 1.0 / b_t);
  double raw = 0.0;
  switch (bettor.kind) {
    case BettorSpec::Kind::constant:
      raw = bettor.lambda0;
      break;
    case BettorSpec::Kind::agrapa:
      raw = bettor.kelly_fraction * std::max(0.0, state.sum_z) /
            std::max(bettor.eps_var, state.sum_z2);
      break;
  }
  return std::clamp(raw, 0.0, upper);
}

inline AlarmStatus alarm_check(const EProcessState& state, const AlarmPolicy& policy) {
  const double level =
      policy.sticky ? policy.delta_e : epoch_alarm_budget(state.epoch, policy.delta_e);
  if (policy.sticky && state.status == AlarmStatus::alarmed) return AlarmStatus::alarmed;
  // Compare in log space; boundary values count as crossings.
  const double log_alarm = -std::log(level);
  const double log_warn = std::log(policy.warn_factor) - std::log(level);
  constexpr double tol = 1e-12;
  if (state.log_wealth >= log_alarm - tol) return AlarmStatus::alarmed;
  if (state.log_wealth >= log_warn - tol) {
    // Sticky status never moves backwards.
    return AlarmStatus::warning;
  }
  if (policy.sticky && state.status == AlarmStatus::warning) return AlarmStatus::warning;
  return AlarmStatus::quiet;
}

// One e-process update with miscoverage bit m_t, bound b_t, predictable
// fraction lambda_t and calibration-good bit g_t. `discount` scales the
// bettor's running sums before the new residual is added.
inline EProcessState step(EProcessState state, int m_t, double b_t, double lambda_t, int g_t,
                          const AlarmPolicy& policy, double discount = 1.0) {
  if (m_t != 0 && m_t != 1) throw std::invalid_argument("miscoverage bit must be 0 or 1");
  if (!(b_t > 0.0 && b_t < 1.0)) throw std::invalid_argument("b_t must lie in (0,1)");
  if (lambda_t < 0.0) throw std::invalid_argument("betting fraction must be nonnegative");
  if (lambda_t * b_t > 1.0 + 1e-12)
    throw std::invalid_argument("betting fraction exceeds 1/b_t; wealth could go negative");

  const double z = static_cast<double>(m_t) - b_t;
  const double factor = 1.0 + lambda_t * z;
  if (factor <= 0.0) {
    state.log_wealth = -std::numeric_limits<double>::infinity();
  } else if (state.log_wealth != -std::numeric_limits<double>::infinity()) {
    state.log_wealth += std::log1p(lambda_t * z);
  }
  state.alive = state.alive && (g_t != 0);
  state.t += 1;
  state.sum_z = discount * state.sum_z + z;
  state.sum_z2 = discount * state.sum_z2 + z * z;
  state.peak_log_wealth = std::max(state.peak_log_wealth, state.log_wealth);

  const AlarmStatus next = alarm_check(state, policy);
  if (next != AlarmStatus::quiet && !state.first_warning_step) state.first_warning_step = state.t;
  if (next == AlarmStatus::alarmed && !state.first_alarm_step) state.first_alarm_step = state.t;
  state.status = next;
  return state;
}

// Reset-mode transition after an alarm: wealth restarts at 1 and the next
// epoch uses the next share of the alarm budget.
inline EProcessState reset(EProcessState state) {
  state.log_wealth = 0.0;
  state.peak_log_wealth = 0.0;
  state.status = AlarmStatus::quiet;
  state.epoch += 1;
  state.resets += 1;
  return state;
}

}  // namespace afcrag

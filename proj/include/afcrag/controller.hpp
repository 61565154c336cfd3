#pragma once

// Predictable control policies and uplink cost accounting.
//
// decide() sees a summary of the history through step t and returns the
// actions that take effect at step t+1. The peeking variant in
// afcrag::unsafe exists only for the predictability ablation.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afcrag/betting.hpp"

namespace afcrag {

struct ControllerPolicy {
  enum class Kind : std::uint8_t { static_bits, adaptive_bandwidth, recal_every, refresh_on_alarm };

  Kind kind = Kind::static_bits;
  double warn_factor = 0.5;
  int bits_low = 8;
  int bits_high = 12;
  std::uint64_t period = 100;
  bool unsafe_peek = false;

  void validate() const {
    if (kind == Kind::adaptive_bandwidth) {
      if (!(bits_low < bits_high)) throw std::invalid_argument("bits_low must be below bits_high");
      if (bits_low < 1) throw std::invalid_argument("bits_low must be >= 1");
      if (!(warn_factor > 0.0 && warn_factor <= 1.0))
        throw std::invalid_argument("warn_factor must lie in (0,1]");
    }
    if (kind == Kind::recal_every && period < 1) throw std::invalid_argument("period must be >= 1");
  }
};

struct Action {
  enum class Kind : std::uint8_t { set_bits, recalibrate, refresh_student };
  static constexpr int all_nodes = -1;

  Kind kind = Kind::set_bits;
  int node = all_nodes;
  int bits = 0;

  static Action set_bits(int node, int bits) { return {Kind::set_bits, node, bits}; }
  static Action recalibrate() { return {Kind::recalibrate, all_nodes, 0}; }
  static Action refresh_student() { return {Kind::refresh_student, all_nodes, 0}; }

  friend bool operator==(const Action&, const Action&) = default;
};

inline std::string to_string(const Action& a) {
  switch (a.kind) {
    case Action::Kind::set_bits:
      return "set_bits(" + (a.node == Action::all_nodes ? std::string("*") : std::to_string(a.node)) +
             "," + std::to_string(a.bits) + ")";
    case Action::Kind::recalibrate:
      return "recalibrate";
    case Action::Kind::refresh_student:
      return "refresh_student";
  }
  return "?";
}

// What a controller may read after step t. peeked_miss is the miscoverage
// bit of step t+1 and must stay empty for every predictable policy.
struct Observable {
  std::uint64_t t = 0;
  double log_wealth = 0.0;
  AlarmStatus status = AlarmStatus::quiet;
  std::size_t buffer_size = 0;
  bool escalated = false;
  std::optional<int> peeked_miss;
};

inline std::vector<Action> decide(const ControllerPolicy& policy, const Observable& obs) {
  if (obs.peeked_miss && !policy.unsafe_peek)
    throw std::invalid_argument("observable carries a step t+1 field; predictable policies may not read it");
  std::vector<Action> actions;
  switch (policy.kind) {
    case ControllerPolicy::Kind::static_bits:
      break;
    case ControllerPolicy::Kind::adaptive_bandwidth:
      // Escalate once, at the first warning, and never come back down.
      if (!obs.escalated && obs.status != AlarmStatus::quiet)
        actions.push_back(Action::set_bits(Action::all_nodes, policy.bits_high));
      break;
    case ControllerPolicy::Kind::recal_every:
      if (obs.t > 0 && obs.t % policy.period == 0) actions.push_back(Action::recalibrate());
      break;
    case ControllerPolicy::Kind::refresh_on_alarm:
      if (obs.status == AlarmStatus::alarmed) actions.push_back(Action::refresh_student());
      break;
  }
  return actions;
}

namespace unsafe {

// Non-predictable bandwidth switching: looks at the step t+1 miscoverage
// bit under the current low setting and moves to high bandwidth for that
// step whenever no miss is coming. Breaks the supermartingale property.
inline std::vector<Action> decide_peeking(const ControllerPolicy& policy, const Observable& obs) {
  if (!policy.unsafe_peek) throw std::logic_error("peeking controller requires unsafe_peek");
  if (!obs.peeked_miss) throw std::invalid_argument("peeking controller needs the step t+1 bit");
  const int bits = *obs.peeked_miss == 0 ? policy.bits_high : policy.bits_low;
  return {Action::set_bits(Action::all_nodes, bits)};
}

}  // namespace unsafe

struct CostLedger {
  double total = 0.0;
  std::vector<double> per_step;
};

// Gamma_t = sum_i B_{i,t} + B_cal 1{recalibration at t}.
template <class BitsRange>
CostLedger account(CostLedger ledger, const BitsRange& bits, bool recal, int b_cal_bits) {
  if (std::empty(bits)) throw std::invalid_argument("account needs at least one node");
  double gamma = 0.0;
  for (auto b : bits) gamma += static_cast<double>(b);
  if (recal) gamma += static_cast<double>(b_cal_bits);
  ledger.per_step.push_back(gamma);
  ledger.total += gamma;
  return ledger;
}

}  // namespace afcrag

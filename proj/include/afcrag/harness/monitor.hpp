#pragma once

// Bernoulli-layer monitor: a hand-set miscoverage stream fed through the
// e-process, the envelope and optionally a bandwidth controller.
//
// Exactly one uniform is drawn per step and drawn one step ahead, so every
// regime run from the same seed sees the same uniforms, and the peeking
// controller can look at the next draw without perturbing the stream.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "afcrag/betting.hpp"
#include "afcrag/controller.hpp"
#include "afcrag/envelope.hpp"
#include "afcrag/harness/records.hpp"
#include "afcrag/rng.hpp"
#include "afcrag/simgen.hpp"

namespace afcrag::harness {

struct MonitorSetup {
  StreamSpec stream;
  BettorSpec bettor;
  AlarmPolicy alarm;
  BoundaryParams envelope;
  // Deployment bound under the low and high bandwidth settings. Equal for
  // experiments without a controller.
  double b_low = 0.2;
  double b_high = 0.2;
  int k_nodes = 1;
  int bits_low = 1;
  int bits_high = 1;
  ControllerPolicy controller;  // static_bits or adaptive_bandwidth
  bool start_high = false;
  bool stop_at_alarm = false;
  bool keep_rows = false;
};

struct MonitorResult {
  TrajectoryRecord record;
  double final_log_wealth = 0.0;
  double truncated_wealth = 1.0;
  std::optional<std::uint64_t> first_warning_step;
  std::uint64_t high_steps = 0;
  std::uint64_t clamp_events = 0;
};

inline MonitorResult run_monitor(const MonitorSetup& setup, std::uint64_t seed) {
  const auto& spec = setup.stream;
  spec.validate();
  setup.bettor.validate();
  setup.alarm.validate();
  setup.controller.validate();
  if (setup.controller.kind != ControllerPolicy::Kind::static_bits &&
      setup.controller.kind != ControllerPolicy::Kind::adaptive_bandwidth)
    throw std::invalid_argument("monitor supports static and adaptive bandwidth controllers only");

  Rng rng(seed);
  EProcessState state;
  EnvelopeState env;
  MonitorResult out;
  out.record.seed = seed;

  int bits = setup.start_high ? setup.bits_high : setup.bits_low;
  bool escalated = setup.start_high;
  double u_next = rng.uniform();

  for (std::uint64_t t = 1; t <= spec.horizon; ++t) {
    const double u = u_next;
    u_next = rng.uniform();

    const bool high = bits == setup.bits_high && setup.bits_high != setup.bits_low;
    const double b = high ? setup.b_high : setup.b_low;
    const double lambda = lambda_next(state, setup.bettor, b);
    const auto prob = p_at(spec, t, b);
    const int m = u < prob.p ? 1 : 0;

    state = step(state, m, b, lambda, 1, setup.alarm, setup.bettor.discount);
    env = update(env, m, b, setup.envelope);
    const double gamma = static_cast<double>(setup.k_nodes) * bits;
    out.record.summary.total_cost += gamma;
    out.high_steps += high ? 1 : 0;
    out.clamp_events += prob.clamped ? 1 : 0;

    StepRow* row = nullptr;
    if (setup.keep_rows) {
      out.record.rows.push_back({t, m, b, lambda, state.log_wealth, env.s, boundary(t, setup.envelope), 1,
                                 {}, gamma});
      row = &out.record.rows.back();
    }

    if (setup.stop_at_alarm && state.status == AlarmStatus::alarmed) {
      out.record.summary.stop_reason = "alarm";
      break;
    }
    if (t == spec.horizon) break;

    Observable obs{t, state.log_wealth, state.status, 0, escalated, std::nullopt};
    std::vector<Action> actions;
    if (setup.controller.unsafe_peek) {
      obs.peeked_miss = u_next < p_at(spec, t + 1, setup.b_low).p ? 1 : 0;
      actions = unsafe::decide_peeking(setup.controller, obs);
    } else {
      actions = decide(setup.controller, obs);
    }
    for (const auto& a : actions) {
      if (a.kind != Action::Kind::set_bits) continue;
      bits = a.bits;
      escalated = escalated || bits == setup.bits_high;
      if (row) row->actions.push_back(to_string(a));
    }
  }

  auto& s = out.record.summary;
  s.steps = state.t;
  s.alarm_step = state.first_alarm_step;
  s.alarmed = state.first_alarm_step.has_value();
  s.sup_log_e = state.peak_log_wealth;
  s.breach = env.breached();
  out.final_log_wealth = state.log_wealth;
  out.truncated_wealth = state.truncated_wealth();
  out.first_warning_step = state.first_warning_step;
  return out;
}

}  // namespace afcrag::harness

#pragma once

// End-to-end synthetic deployment: swarm scoring, rolling calibration
// buffer, periodic recalibration, adaptive bandwidth, training schedule,
// e-process and envelope, all wired together on one stream.
//
// Score law at step t: clip(width * U + shift(t), 0, s_max), U ~ Uniform.
// Per-step order: assemble b_t from F_{t-1}, pick lambda_t, audit, serve,
// update e-process and envelope, append to the buffer, then let the
// controllers act for step t+1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afcrag/betting.hpp"
#include "afcrag/controller.hpp"
#include "afcrag/envelope.hpp"
#include "afcrag/federation.hpp"
#include "afcrag/harness/config.hpp"
#include "afcrag/harness/records.hpp"
#include "afcrag/quantize.hpp"
#include "afcrag/rng.hpp"
#include "afcrag/simgen.hpp"
#include "afcrag/slack_model.hpp"
#include "afcrag/training_model.hpp"

namespace afcrag::harness {

inline DriftSchedule end_to_end_drift(const EndToEndBlock& e) {
  const std::uint64_t onset = e.drift_onset != 0 ? e.drift_onset : std::max<std::uint64_t>(1, e.horizon / 4);
  if (e.drift_kind == "none") return {};
  if (e.drift_kind == "sudden") return DriftSchedule::sudden(e.drift_magnitude, onset);
  if (e.drift_kind == "gradual") return DriftSchedule::gradual(e.drift_magnitude, onset, e.ramp_len);
  if (e.drift_kind == "periodic") return DriftSchedule::periodic(e.drift_magnitude, onset, e.period, e.duty);
  throw ConfigError("unknown drift kind " + e.drift_kind);
}

struct ScoreLaw {
  double width = 1.0;
  double s_max = 1.0;

  double draw(double shift, Rng& rng) const { return clip_score(width * rng.uniform() + shift, s_max); }

  // P(score > q) under the law with the given shift.
  double exceed(double q, double shift) const {
    if (q >= s_max) return 0.0;
    return std::clamp((shift + width - q) / width, 0.0, 1.0);
  }
};

struct SwarmRunResult {
  TrajectoryRecord record;
  std::uint64_t onset = 0;
  PredictabilityAudit audit;
  bool pre_onset_alarm = false;
  std::optional<std::uint64_t> delay;
  double truncated_wealth = 1.0;
  std::uint64_t g_failures = 0;
  std::uint64_t recalibrations = 0;
  std::uint64_t high_steps = 0;
  double pre_onset_miscoverage = 0.0;  // realised rate before drift
  double pre_onset_mean_b = 0.0;
  double min_b = 1.0;
  double max_b = 0.0;
};

inline SwarmRunResult run_swarm(const HarnessConfig& cfg, std::uint64_t seed, bool keep_rows) {
  const auto& e = cfg.end_to_end;
  const auto& slack = cfg.slack;
  const DriftSchedule drift = end_to_end_drift(e);
  drift.validate();
  const RefreshSchedule schedule = cfg.training_schedule();
  schedule.validate();
  BettorSpec bettor = cfg.bettor.spec(slack.alpha);
  bettor.discount = e.bettor_discount;
  bettor.validate();
  const AlarmPolicy alarm = cfg.alarm_policy();
  const BoundaryParams envp = cfg.boundary_params();
  const ScoreLaw law{e.score_width, slack.s_max};

  ControllerPolicy adaptive;
  adaptive.kind = ControllerPolicy::Kind::adaptive_bandwidth;
  adaptive.warn_factor = cfg.alarm.warn_factor;
  adaptive.bits_low = e.bits_low;
  adaptive.bits_high = e.bits_high;
  ControllerPolicy recal;
  recal.kind = ControllerPolicy::Kind::recal_every;
  recal.period = e.refresh_period;
  adaptive.validate();
  recal.validate();

  Rng score_rng(substream_seed(seed, 0));
  Rng serve_rng(substream_seed(seed, 1));
  Rng cal_rng(substream_seed(seed, 2));

  SwarmRunResult out;
  out.record.seed = seed;
  out.onset = drift.kind == DriftSchedule::Kind::none ? e.horizon + 1 : drift.onset;

  SwarmState swarm;
  swarm.s_max = slack.s_max;
  for (int i = 0; i < e.k_nodes; ++i) swarm.nodes.push_back({i, e.bits_low, e.noise_sd});
  swarm.buffer.window = e.window;
  swarm.buffer.refresh_period = e.refresh_period;
  swarm.buffer.n_min = e.n_min;
  for (std::size_t i = 0; i < e.initial_cal; ++i)
    swarm.buffer = buffer_update(std::move(swarm.buffer), law.draw(0.0, score_rng), 0);
  swarm = refresh_threshold(std::move(swarm), e.b_cal_bits, slack.alpha, cal_rng);
  std::size_t n_ref = swarm.buffer.size();

  EProcessState state;
  EnvelopeState env;
  CostLedger ledger;
  bool escalated = false;
  const double phi_cal = phi(e.b_cal_bits, slack.s_max);
  auto v_bits = [&](int bits) { return v(bits, slack.s_max); };
  std::uint64_t pre_steps = 0, pre_misses = 0;
  double pre_b_sum = 0.0;

  for (std::uint64_t t = 1; t <= e.horizon; ++t) {
    const auto bits = swarm.bits();
    const double fl = delta_fl_at(t, n_ref, slack.delta_cal, phi_cal, slack.f_max, slack.c_q);
    const double rag = delta_rag(std::span<const int>(bits), slack.f_max, v_bits);
    // A refresh landing at step r affects b from r + 1 on.
    const double train = delta_train_bound(epsilon_train_at(schedule, t - 1), slack.f_max);
    const double b = assemble_b(slack, n_ref, fl, rag, train).b;
    const double lambda = lambda_next(state, bettor, b);
    out.audit.record(t, swarm.threshold_data_step, state.t);

    const double shift = drift.shift_at(t);
    const double score = law.draw(shift, score_rng);
    const auto served = serve_query(swarm, score, serve_rng);
    const double cond_miss = law.exceed(swarm.threshold, shift);
    const int g = !e.oracle_g || std::abs(cond_miss - slack.alpha) <= fl ? 1 : 0;
    out.g_failures += g == 0 ? 1 : 0;

    state = step(state, served.m, b, lambda, g, alarm, bettor.discount);
    env = update(env, served.m, b, envp);
    swarm.buffer = buffer_update(std::move(swarm.buffer), score, t);
    out.min_b = std::min(out.min_b, b);
    out.max_b = std::max(out.max_b, b);
    if (t < out.onset) {
      ++pre_steps;
      pre_misses += served.m;
      pre_b_sum += b;
    }
    out.high_steps += escalated ? 1 : 0;

    std::vector<std::string> action_names;
    bool recalibrated = false;
    if (t < e.horizon) {
      const Observable obs{t, state.log_wealth, state.status, swarm.buffer.size(), escalated, std::nullopt};
      std::vector<Action> actions;
      if (e.adaptive) actions = decide(adaptive, obs);
      for (const auto& a : decide(recal, obs)) actions.push_back(a);
      for (const auto& a : actions) {
        action_names.push_back(to_string(a));
        if (a.kind == Action::Kind::set_bits) {
          for (auto& node : swarm.nodes)
            if (a.node == Action::all_nodes || a.node == node.node_id) node.bits = a.bits;
          escalated = true;
        } else if (a.kind == Action::Kind::recalibrate) {
          swarm = refresh_threshold(std::move(swarm), e.b_cal_bits, slack.alpha, cal_rng);
          n_ref = swarm.buffer.size();
          recalibrated = true;
          ++out.recalibrations;
        }
      }
    }
    ledger = account(std::move(ledger), bits, recalibrated, e.b_cal_bits);

    if (keep_rows)
      out.record.rows.push_back({t, served.m, b, lambda, state.log_wealth, env.s, boundary(t, envp), g,
                                 std::move(action_names), ledger.per_step.back()});
  }

  auto& s = out.record.summary;
  s.steps = state.t;
  s.alarm_step = state.first_alarm_step;
  s.alarmed = s.alarm_step.has_value();
  s.sup_log_e = state.peak_log_wealth;
  s.breach = env.breached();
  s.total_cost = ledger.total;
  out.truncated_wealth = state.truncated_wealth();
  if (s.alarm_step) {
    if (*s.alarm_step < out.onset)
      out.pre_onset_alarm = true;
    else
      out.delay = *s.alarm_step - out.onset;
  }
  if (pre_steps > 0) {
    out.pre_onset_miscoverage = static_cast<double>(pre_misses) / static_cast<double>(pre_steps);
    out.pre_onset_mean_b = pre_b_sum / static_cast<double>(pre_steps);
  }
  return out;
}

}  // namespace afcrag::harness

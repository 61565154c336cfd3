#pragma once

// Harness configuration: one JSON document with a block per component and
// one per experiment. Missing keys take the defaults below; unknown keys
// are rejected.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "afcrag/betting.hpp"
#include "afcrag/envelope.hpp"
#include "afcrag/slack_model.hpp"
#include "afcrag/training_model.hpp"

namespace afcrag {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SlackConfig, alpha, f_max, c_q, delta_cal, delta_e,
                                                delta_train, eta, s_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FpldParams, k_nodes, n_r, m_r, b_r, v_vocab, d_dim,
                                                rho, c1, c2, c3, eps_opt, eps_fit)

namespace harness {

struct BettorBlock {
  std::string kind = "agrapa";  // "agrapa" | "constant"
  double kelly_fraction = 0.5;
  double eps_var = 5.0;
  double lambda0 = 0.0;
  // Cap = cap_factor / (alpha + delta_max); 1 / 0.3096 = 3.23 at alpha 0.10.
  double delta_max = 0.2096;
  double cap_factor = 1.0;
  double discount = 1.0;

  double cap(double alpha) const { return cap_factor / (alpha + delta_max); }

  BettorSpec spec(double alpha) const {
    if (kind == "constant") return BettorSpec::constant(lambda0, cap(alpha));
    return BettorSpec::agrapa(cap(alpha), kelly_fraction, eps_var, discount);
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BettorBlock, kind, kelly_fraction, eps_var, lambda0,
                                                delta_max, cap_factor, discount)

struct AlarmBlock {
  double warn_factor = 0.5;
  bool sticky = true;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AlarmBlock, warn_factor, sticky)

struct EnvelopeBlock {
  double c_h = 1.7;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EnvelopeBlock, c_h)

struct OutputBlock {
  std::string granularity = "trajectory";  // "none" | "trajectory" | "step"
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OutputBlock, granularity)

struct E1Block {
  std::uint64_t seeds = 2000;
  std::uint64_t horizon = 5000;
  double b = 0.30;
  double interior_gap = 0.05;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E1Block, seeds, horizon, b, interior_gap)

struct E2Block {
  std::uint64_t seeds = 500;
  std::uint64_t horizon = 8000;
  std::uint64_t onset = 2000;
  double b = 0.30;
  std::vector<double> drifts{0.02, 0.04, 0.06, 0.08, 0.10, 0.15};
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E2Block, seeds, horizon, onset, b, drifts)

struct E4Block {
  std::uint64_t seeds = 200;
  std::uint64_t horizon = 5000;
  std::uint64_t onset = 2500;
  double drift = 0.20;
  int k_nodes = 13;
  int bits_low = 1;
  int bits_high = 4;
  std::size_t n_cal = 100;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E4Block, seeds, horizon, onset, drift, k_nodes,
                                                bits_low, bits_high, n_cal)

struct E5Block {
  std::vector<double> grid{0.3, 0.4, 0.5, 0.6, 0.7};
  double residual_scale = 0.5;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E5Block, grid, residual_scale)

struct E7Block {
  int bits = 8;
  int k_max = 128;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E7Block, bits, k_max)

struct E8Block {
  std::uint64_t t_max = 10'000'000;
  int points_per_decade = 4;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E8Block, t_max, points_per_decade)

struct E10Block {
  std::uint64_t buffers = 1000;
  std::size_t n_cal = 100;
  std::vector<std::uint64_t> horizons{1, 10, 100, 1000, 10000};
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E10Block, buffers, n_cal, horizons)

struct E11Block {
  std::uint64_t seeds = 1000;
  std::uint64_t horizon = 8000;
  std::uint64_t onset = 2000;
  double b = 0.20;
  double interior_gap = 0.05;
  double small_drift = 0.02;
  double large_drift = 0.40;
  std::vector<double> constant_fractions{0.1, 0.5, 1.0};  // of the cap
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E11Block, seeds, horizon, onset, b, interior_gap,
                                                small_drift, large_drift, constant_fractions)

struct E12Block {
  std::uint64_t seeds = 500;
  std::uint64_t null_horizon = 5000;
  std::uint64_t horizon = 8000;
  std::uint64_t onset = 2000;
  double drift = 0.10;
  double slack_offset = 0.10;  // b = alpha + slack_offset
  std::vector<double> alphas{0.05, 0.10, 0.15, 0.20};
  std::vector<double> delta_es{0.01, 0.025, 0.05, 0.10};
  std::vector<double> cap_factors{0.25, 0.5, 0.75, 1.0};
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(E12Block, seeds, null_horizon, horizon, onset, drift,
                                                slack_offset, alphas, delta_es, cap_factors)

struct EnvelopeStudyBlock {
  std::uint64_t seeds = 4000;
  std::uint64_t horizon = 5000;
  double b = 0.20;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EnvelopeStudyBlock, seeds, horizon, b)

struct SupermartingaleBlock {
  std::uint64_t seeds = 10000;
  std::vector<std::uint64_t> horizons{10, 100, 1000};
  double b = 0.20;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SupermartingaleBlock, seeds, horizons, b)

struct NecessityBlock {
  std::uint64_t seeds = 2000;
  std::uint64_t horizon = 5000;
  int k_nodes = 10;
  int bits_low = 2;
  int bits_high = 3;
  std::size_t n_cal = 100;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NecessityBlock, seeds, horizon, k_nodes, bits_low,
                                                bits_high, n_cal)

struct TrainingEvent {
  std::uint64_t step = 0;
  FpldParams params;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainingEvent, step, params)

inline std::vector<TrainingEvent> default_training_events() {
  FpldParams initial;
  initial.n_r = 10'000;
  initial.rho = 1e-4;
  initial.b_r = 2000;
  FpldParams refreshed = initial;
  refreshed.n_r = 100'000;
  refreshed.m_r = 1'000'000;
  return {{0, initial}, {2500, refreshed}};
}

struct EndToEndBlock {
  std::uint64_t seeds = 20;
  std::uint64_t horizon = 5000;
  int k_nodes = 4;
  int bits_low = 6;
  int bits_high = 10;
  double noise_sd = 0.02;
  std::size_t window = 1000;
  std::uint64_t refresh_period = 100;
  std::size_t n_min = 10;
  int b_cal_bits = 8;
  std::size_t initial_cal = 1000;
  double score_width = 1.0;
  std::string drift_kind = "sudden";  // none | sudden | gradual | periodic
  double drift_magnitude = 0.5;
  std::uint64_t drift_onset = 0;  // 0: a quarter of the horizon
  std::uint64_t ramp_len = 500;
  std::uint64_t period = 500;
  double duty = 0.5;
  bool oracle_g = true;
  bool adaptive = true;
  // Forgetting factor for the bettor here: the pre-drift residuals are far
  // below zero and would otherwise mute the bettor for thousands of steps.
  double bettor_discount = 0.99;
  std::vector<TrainingEvent> training = default_training_events();
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EndToEndBlock, seeds, horizon, k_nodes, bits_low,
                                                bits_high, noise_sd, window, refresh_period, n_min,
                                                b_cal_bits, initial_cal, score_width, drift_kind,
                                                drift_magnitude, drift_onset, ramp_len, period, duty,
                                                oracle_g, adaptive, bettor_discount, training)

struct HarnessConfig {
  SlackConfig slack;
  BettorBlock bettor;
  AlarmBlock alarm;
  EnvelopeBlock envelope;
  OutputBlock output;
  E1Block e1;
  E2Block e2;
  E4Block e4;
  E5Block e5;
  E7Block e7;
  E8Block e8;
  E10Block e10;
  E11Block e11;
  E12Block e12;
  EnvelopeStudyBlock envelope_study;
  SupermartingaleBlock supermartingale;
  NecessityBlock necessity;
  EndToEndBlock end_to_end;

  AlarmPolicy alarm_policy() const { return {slack.delta_e, alarm.warn_factor, alarm.sticky}; }
  BoundaryParams boundary_params() const { return {envelope.c_h, slack.delta_e}; }

  RefreshSchedule training_schedule() const {
    RefreshSchedule s;
    s.budget_total = slack.delta_train;
    for (const auto& e : end_to_end.training) s.events.emplace_back(e.step, e.params);
    return s;
  }

  void validate() const;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(HarnessConfig, slack, bettor, alarm, envelope, output,
                                                e1, e2, e4, e5, e7, e8, e10, e11, e12, envelope_study,
                                                supermartingale, necessity, end_to_end)

inline void HarnessConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  try {
    slack.validate();
    bettor.spec(slack.alpha).validate();
    alarm_policy().validate();
    boundary_params().validate();
    training_schedule().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (bettor.kind != "agrapa" && bettor.kind != "constant") fail("bettor.kind must be agrapa or constant");
  if (output.granularity != "none" && output.granularity != "trajectory" && output.granularity != "step")
    fail("output.granularity must be none, trajectory or step");
  auto seeds_ok = [&](std::uint64_t n, const char* block) {
    if (n < 1) fail(std::string(block) + ".seeds must be >= 1");
  };
  seeds_ok(e1.seeds, "e1");
  seeds_ok(e2.seeds, "e2");
  seeds_ok(e4.seeds, "e4");
  seeds_ok(e11.seeds, "e11");
  seeds_ok(e12.seeds, "e12");
  seeds_ok(envelope_study.seeds, "envelope_study");
  seeds_ok(supermartingale.seeds, "supermartingale");
  seeds_ok(necessity.seeds, "necessity");
  seeds_ok(end_to_end.seeds, "end_to_end");
  auto open_unit = [&](double x, const char* what) {
    if (!(x > 0.0 && x < 1.0)) fail(std::string(what) + " must lie in (0,1)");
  };
  open_unit(e1.b, "e1.b");
  open_unit(e2.b, "e2.b");
  open_unit(e11.b, "e11.b");
  open_unit(envelope_study.b, "envelope_study.b");
  open_unit(supermartingale.b, "supermartingale.b");
  if (e2.onset < 1 || e2.onset > e2.horizon) fail("e2.onset must lie in [1, horizon]");
  if (e4.onset < 1 || e4.onset > e4.horizon) fail("e4.onset must lie in [1, horizon]");
  if (e4.bits_low >= e4.bits_high) fail("e4.bits_low must be below e4.bits_high");
  if (necessity.bits_low >= necessity.bits_high) fail("necessity.bits_low must be below bits_high");
  if (end_to_end.bits_low >= end_to_end.bits_high) fail("end_to_end.bits_low must be below bits_high");
  if (e5.grid.size() < 2) fail("e5.grid needs at least two points");
  for (double p : e5.grid) open_unit(p, "e5.grid entries");
  if (e7.k_max < 1 || e7.bits < 1) fail("e7.k_max and e7.bits must be >= 1");
  if (e10.n_cal < 1 || e10.buffers < 1) fail("e10.n_cal and e10.buffers must be >= 1");
  if (e12.alphas.empty() || e12.delta_es.empty() || e12.cap_factors.empty()) fail("e12 grid must be nonempty");
  if (end_to_end.initial_cal < end_to_end.n_min) fail("end_to_end.initial_cal must be >= n_min");
  const auto& dk = end_to_end.drift_kind;
  if (dk != "none" && dk != "sudden" && dk != "gradual" && dk != "periodic")
    fail("end_to_end.drift_kind must be none, sudden, gradual or periodic");
}

namespace detail {
// Rejects keys of `given` that the defaults do not know about.
inline void check_known_keys(const nlohmann::json& given, const nlohmann::json& known,
                             const std::string& path) {
  if (!given.is_object() || !known.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!known.contains(key)) throw ConfigError("unknown config key: " + where);
    check_known_keys(value, known.at(key), where);
  }
}
}  // namespace detail

inline HarnessConfig config_from_json(const nlohmann::json& j) {
  detail::check_known_keys(j, nlohmann::json(HarnessConfig{}), "");
  HarnessConfig cfg;
  try {
    cfg = j.get<HarnessConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline HarnessConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

// Applies "block.key=value" overrides; value is parsed as JSON, falling
// back to a plain string.
inline HarnessConfig apply_overrides(const HarnessConfig& base, const std::vector<std::string>& overrides) {
  nlohmann::json j = base;
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + item);
    const std::string path = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
      value = raw;
    }
    nlohmann::json::json_pointer ptr("/" + [&] {
      std::string p = path;
      for (auto& c : p)
        if (c == '.') c = '/';
      return p;
    }());
    if (!j.contains(ptr)) throw ConfigError("unknown config key: " + path);
    j[ptr] = value;
  }
  return config_from_json(j);
}

}  // namespace harness
}  // namespace afcrag

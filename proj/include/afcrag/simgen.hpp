#pragma once

// Seeded synthetic miscoverage streams and drift schedules.
//
// A stream consumes exactly one uniform per emitted step, so two regimes
// run from the same seed see common random numbers.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "afcrag/rng.hpp"

namespace afcrag {

struct DriftSchedule {
  enum class Kind : std::uint8_t { none, sudden, gradual, periodic };

  Kind kind = Kind::none;
  double magnitude = 0.0;
  std::uint64_t onset = 1;
  std::uint64_t ramp_len = 1;
  std::uint64_t period = 500;
  double duty = 0.5;

  static DriftSchedule sudden(double magnitude, std::uint64_t onset) {
    return {Kind::sudden, magnitude, onset, 1, 500, 0.5};
  }
  static DriftSchedule gradual(double magnitude, std::uint64_t onset, std::uint64_t ramp_len) {
    return {Kind::gradual, magnitude, onset, ramp_len, 500, 0.5};
  }
  static DriftSchedule periodic(double magnitude, std::uint64_t onset, std::uint64_t period,
                                double duty) {
    return {Kind::periodic, magnitude, onset, 1, period, duty};
  }

  void validate() const {
    if (kind == Kind::none) return;
    if (onset < 1) throw std::invalid_argument("drift onset must be >= 1");
    if (ramp_len < 1) throw std::invalid_argument("ramp length must be >= 1");
    if (period < 2) throw std::invalid_argument("period must be >= 2");
    if (!(duty > 0.0 && duty < 1.0)) throw std::invalid_argument("duty must lie in (0,1)");
  }

  // Fraction of the full shift active at step t, in [0, 1].
  double active_fraction(std::uint64_t t) const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::sudden:
        return t >= onset ? 1.0 : 0.0;
      case Kind::gradual: {
        if (t < onset) return 0.0;
        const double done = static_cast<double>(t - onset) / static_cast<double>(ramp_len);
        return std::min(1.0, done);
      }
      case Kind::periodic: {
        if (t < onset) return 0.0;
        const auto phase = (t - onset) % period;
        return static_cast<double>(phase) < duty * static_cast<double>(period) ? 1.0 : 0.0;
      }
    }
    return 0.0;
  }

  double shift_at(std::uint64_t t) const { return magnitude * active_fraction(t); }
};

struct StreamSpec {
  enum class Kind : std::uint8_t { bernoulli_boundary, bernoulli_interior, bernoulli_drift, swarm };

  Kind kind = Kind::bernoulli_boundary;
  std::uint64_t horizon = 5000;
  std::uint64_t seed = 0;
  double gap = 0.05;
  DriftSchedule drift;
  // When set, the pre-drift miscoverage is this fixed level instead of b_t.
  std::optional<double> anchor;

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("stream horizon must be >= 1");
    if (kind == Kind::bernoulli_interior && !(gap > 0.0))
      throw std::invalid_argument("interior gap must be positive");
    if (kind == Kind::bernoulli_drift || kind == Kind::swarm) {
      drift.validate();
      if (kind == Kind::bernoulli_drift && !(drift.magnitude > 0.0))
        throw std::invalid_argument("drift size must be positive");
      if (drift.kind != DriftSchedule::Kind::none && drift.onset > horizon)
        throw std::invalid_argument("drift onset beyond horizon");
    }
  }
};

struct StreamProbability {
  double p = 0.0;
  bool clamped = false;
};

inline StreamProbability p_at(const StreamSpec& spec, std::uint64_t t, double b_t) {
  if (t < 1 || t > spec.horizon) throw std::invalid_argument("step outside [1, horizon]");
  double p = spec.anchor.value_or(b_t);
  switch (spec.kind) {
    case StreamSpec::Kind::bernoulli_boundary:
      break;
    case StreamSpec::Kind::bernoulli_interior:
      p -= spec.gap;
      break;
    case StreamSpec::Kind::bernoulli_drift:
    case StreamSpec::Kind::swarm:
      p += spec.drift.shift_at(t);
      break;
  }
  StreamProbability out;
  out.p = std::clamp(p, 0.0, 1.0);
  out.clamped = out.p != p;
  return out;
}

struct GeneratedStream {
  std::vector<std::uint8_t> bits;
  std::uint64_t clamp_events = 0;
};

// One draw per step, in step order.
inline GeneratedStream gen(const StreamSpec& spec, std::span<const double> b_series, Rng& rng) {
  if (b_series.size() != spec.horizon)
    throw std::invalid_argument("bound series length " + std::to_string(b_series.size()) +
                                " does not match horizon " + std::to_string(spec.horizon));
  GeneratedStream out;
  out.bits.reserve(spec.horizon);
  for (std::uint64_t t = 1; t <= spec.horizon; ++t) {
    const auto prob = p_at(spec, t, b_series[t - 1]);
    out.clamp_events += prob.clamped ? 1 : 0;
    out.bits.push_back(static_cast<std::uint8_t>(rng.uniform() < prob.p ? 1 : 0));
  }
  return out;
}

}  // namespace afcrag

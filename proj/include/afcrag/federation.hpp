#pragma once

// Score-level swarm: K nodes score each query, quantize with subtractive
// dither and uplink; the hub averages and compares against the current
// conformal threshold. Thresholds are refreshed from a rolling buffer of
// scores from strictly earlier steps.

#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "afcrag/quantize.hpp"
#include "afcrag/rng.hpp"

namespace afcrag {

class InsufficientBuffer : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NodeModel {
  int node_id = 0;
  int bits = 8;
  double score_noise_sd = 0.0;
};

struct CalBuffer {
  std::size_t window = 500;
  std::uint64_t refresh_period = 100;
  std::size_t n_min = 10;
  std::deque<double> entries;
  // Step of the newest entry; 0 for pre-deployment calibration data.
  std::uint64_t newest_step = 0;

  std::size_t size() const { return entries.size(); }
};

// FIFO append with eviction at the window size. `step` is the step whose
// score is being recorded; it must already have been served.
inline CalBuffer buffer_update(CalBuffer buffer, double score, std::uint64_t step) {
  if (buffer.window == 0) throw std::invalid_argument("buffer window must be positive");
  buffer.entries.push_back(score);
  while (buffer.entries.size() > buffer.window) buffer.entries.pop_front();
  buffer.newest_step = step;
  return buffer;
}

struct SwarmState {
  std::vector<NodeModel> nodes;
  double threshold = 1.0;
  CalBuffer buffer;
  double student_rate = 0.0;
  double true_quantile = 0.0;  // diagnostics only
  double s_max = 1.0;
  // Newest step whose data entered the current threshold.
  std::uint64_t threshold_data_step = 0;

  std::vector<int> bits() const {
    std::vector<int> out;
    out.reserve(nodes.size());
    for (const auto& n : nodes) out.push_back(n.bits);
    return out;
  }
};

struct ServeResult {
  int m = 0;
  double swarm_score = 0.0;
  double uplink_bits = 0.0;
};

// Node draws are consumed in ascending node order: noise, then dither.
inline ServeResult serve_query(const SwarmState& state, double true_score, Rng& rng) {
  if (state.nodes.empty()) throw std::invalid_argument("swarm has no nodes");
  ServeResult out;
  double total = 0.0;
  for (const auto& node : state.nodes) {
    const double local = clip_score(rng.normal(true_score, node.score_noise_sd), state.s_max);
    const DitheredQuantizer q(node.bits, state.s_max);
    const double half = 0.5 * q.step();
    const double dither = rng.uniform(-half, half);
    total += quantize(local, q, dither);
    out.uplink_bits += node.bits;
  }
  // Reconstructions can leave [0, s_max] by up to half a step; scores are bounded by clipping.
  out.swarm_score = clip_score(total / static_cast<double>(state.nodes.size()), state.s_max);
  out.m = out.swarm_score > state.threshold ? 1 : 0;
  return out;
}

// Each node re-scores the buffer with its own noise, compresses its
// order-statistic summary to b_cal_bits and the hub averages the summaries.
inline SwarmState refresh_threshold(SwarmState state, int b_cal_bits, double alpha, Rng& rng) {
  if (state.buffer.size() < state.buffer.n_min)
    throw InsufficientBuffer("calibration buffer holds " + std::to_string(state.buffer.size()) +
                             " scores, need " + std::to_string(state.buffer.n_min));
  std::vector<double> rescored(state.buffer.size());
  double sum = 0.0;
  for (const auto& node : state.nodes) {
    std::size_t i = 0;
    for (double s : state.buffer.entries)
      rescored[i++] = clip_score(rng.normal(s, node.score_noise_sd), state.s_max);
    sum += compress_cal_summary(rescored, b_cal_bits, alpha, state.s_max).quantized_quantile;
  }
  state.threshold = sum / static_cast<double>(state.nodes.size());
  state.threshold_data_step = state.buffer.newest_step;
  return state;
}

// Executable predictability contract: everything used to serve and bet at
// step t was computed from steps strictly before t.
struct PredictabilityAudit {
  std::uint64_t checked = 0;
  std::uint64_t violations = 0;

  void record(std::uint64_t t, std::uint64_t threshold_data_step, std::uint64_t bettor_data_step) {
    ++checked;
    if (threshold_data_step >= t || bettor_data_step >= t) ++violations;
  }
  bool clean() const { return violations == 0; }
};

}  // namespace afcrag

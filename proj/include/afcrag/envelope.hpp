#pragma once

// Time-uniform Hoeffding envelope on the cumulative residual
// S_t = sum_{s<=t} (M_s - b_s), using the polynomially stitched boundary
//
//   u_t(delta) = c_H sqrt(t/2 (log(1/delta) + log(1 + log2 t))).
//
// log(1/delta) is natural, the inner log2 t is base 2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>

namespace afcrag {

struct BoundaryParams {
  double c_h = 1.7;
  double delta_e = 0.05;

  void validate() const {
    if (!(c_h > 0.0 && c_h <= 2.0)) throw std::invalid_argument("c_h must lie in (0,2]");
    if (!(delta_e > 0.0 && delta_e < 1.0)) throw std::invalid_argument("delta_e must lie in (0,1)");
  }
};

struct EnvelopeState {
  double s = 0.0;
  std::uint64_t t = 0;
  double max_excess = -std::numeric_limits<double>::infinity();

  bool breached() const { return max_excess > 0.0; }
};

inline double boundary(std::uint64_t t, const BoundaryParams& params) {
  if (t == 0) throw std::invalid_argument("boundary is defined for t >= 1");
  const double td = static_cast<double>(t);
  const double inner = std::log(1.0 / params.delta_e) + std::log1p(std::log2(td));
  return params.c_h * std::sqrt(0.5 * td * inner);
}

inline EnvelopeState update(EnvelopeState state, int m_t, double b_t, const BoundaryParams& params) {
  if (!(b_t > 0.0 && b_t < 1.0)) throw std::invalid_argument("b_t must lie in (0,1)");
  state.s += static_cast<double>(m_t) - b_t;
  state.t += 1;
  state.max_excess = std::max(state.max_excess, state.s - boundary(state.t, params));
  return state;
}

// (1/tau) sum_{s<=tau} b_s + u_tau / tau, an upper bound on the realised
// miscoverage rate at tau on the envelope's high-probability event.
inline double miscoverage_rate_bound(std::span<const std::pair<int, double>> trajectory,
                                     std::uint64_t tau, const BoundaryParams& params) {
  if (tau == 0) throw std::invalid_argument("tau must be >= 1");
  if (tau > trajectory.size()) throw std::invalid_argument("tau exceeds trajectory length");
  double sum_b = 0.0;
  for (std::uint64_t i = 0; i < tau; ++i) sum_b += trajectory[i].second;
  const double td = static_cast<double>(tau);
  return sum_b / td + boundary(tau, params) / td;
}

}  // namespace afcrag

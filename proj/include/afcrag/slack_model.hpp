#pragma once

// Predictable slack terms and the per-step deployment-null bound
//
//   b_t = alpha + 1/(n_cal + 1) + delta_fl + delta_rag + delta_train
//
// together with the summable calibration-deviation budget that makes the
// bound hold conditionally on the calibration-good event.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace afcrag {

// Raised when an assembled bound leaves (0, 1 - eta].
class AdmissibilityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct SlackConfig {
  double alpha = 0.10;
  double f_max = 1.0;
  double c_q = 1.0;
  double delta_cal = 0.05;
  double delta_e = 0.05;
  double delta_train = 0.05;
  double eta = 0.05;
  double s_max = 1.0;

  void validate() const {
    auto open_unit = [](double x) { return x > 0.0 && x < 1.0; };
    if (!open_unit(alpha)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (!open_unit(delta_cal)) throw std::invalid_argument("delta_cal must lie in (0,1)");
    if (!open_unit(delta_e)) throw std::invalid_argument("delta_e must lie in (0,1)");
    if (!open_unit(delta_train)) throw std::invalid_argument("delta_train must lie in (0,1)");
    if (!open_unit(eta)) throw std::invalid_argument("eta must lie in (0,1)");
    if (!(f_max > 0.0)) throw std::invalid_argument("f_max must be positive");
    if (!(c_q > 0.0)) throw std::invalid_argument("c_q must be positive");
    if (!(s_max > 0.0)) throw std::invalid_argument("s_max must be positive");
  }
};

struct BoundComponents {
  double alpha = 0.0;
  double overshoot = 0.0;
  double delta_fl = 0.0;
  double delta_rag = 0.0;
  double delta_train = 0.0;
  double b = 0.0;
};

namespace detail {
inline void require_step(std::uint64_t t) {
  if (t == 0) throw std::invalid_argument("step index must be >= 1");
}
inline void require_open_unit(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument(std::string(what) + " must lie in (0,1)");
}
}  // namespace detail

// delta_t^cal = 6 delta_cal / (pi^2 t^2). Sums to delta_cal over t >= 1.
inline double cal_budget_at(std::uint64_t t, double delta_cal) {
  detail::require_step(t);
  detail::require_open_unit(delta_cal, "delta_cal");
  const double td = static_cast<double>(t);
  return 6.0 * delta_cal / (std::numbers::pi * std::numbers::pi * td * td);
}

// log(2 / delta_t^cal), rearranged so it stays finite long after delta_t^cal
// itself underflows.
inline double log_two_over_cal_budget(std::uint64_t t, double delta_cal) {
  detail::require_step(t);
  detail::require_open_unit(delta_cal, "delta_cal");
  constexpr double log_pi2 = 2.0 * 1.1447298858494002;  // 2 log(pi)
  return std::numbers::ln2 - std::log(6.0) - std::log(delta_cal) + log_pi2 +
         2.0 * std::log(static_cast<double>(t));
}

// Federated-calibration slack from the log-confidence term directly.
inline double delta_fl_from_log(std::size_t n_cal, double log_two_over_delta, double phi_bcal,
                                double f_max, double c_q) {
  if (n_cal == 0) throw std::invalid_argument("n_cal must be >= 1");
  if (!(log_two_over_delta > 0.0)) throw std::invalid_argument("confidence level must be below 2");
  if (phi_bcal < 0.0) throw std::invalid_argument("phi(B_cal) must be nonnegative");
  return f_max * (c_q * std::sqrt(log_two_over_delta / static_cast<double>(n_cal)) + phi_bcal);
}

inline double delta_fl(std::size_t n_cal, double delta_t_cal, double phi_bcal, double f_max,
                       double c_q) {
  if (!(delta_t_cal > 0.0) || delta_t_cal >= 2.0)
    throw std::invalid_argument("delta_t_cal must lie in (0,2)");
  return delta_fl_from_log(n_cal, std::log(2.0 / delta_t_cal), phi_bcal, f_max, c_q);
}

// Delta_FL at step t under the canonical schedule, without forming delta_t^cal.
inline double delta_fl_at(std::uint64_t t, std::size_t n_cal, double delta_cal, double phi_bcal,
                          double f_max, double c_q) {
  return delta_fl_from_log(n_cal, log_two_over_cal_budget(t, delta_cal), phi_bcal, f_max, c_q);
}

// Retrieval-bandwidth slack f_max * sqrt(sum_i v(B_i)) / K.
template <class VarianceFn>
double delta_rag(std::span<const int> budgets, double f_max, VarianceFn&& v) {
  if (budgets.empty()) throw std::invalid_argument("delta_rag needs at least one node budget");
  double total = 0.0;
  for (int bits : budgets) {
    if (bits < 1) throw std::invalid_argument("node bit budgets must be >= 1");
    total += v(bits);
  }
  const double k = static_cast<double>(budgets.size());
  return f_max * std::sqrt(total) / k;
}

// Two-term training slack f_max (R + sqrt(2R)).
inline double delta_train_bound(double rate, double f_max) {
  if (rate < 0.0) throw std::invalid_argument("training rate must be nonnegative");
  return f_max * (rate + std::sqrt(2.0 * rate));
}

inline BoundComponents assemble_b(const SlackConfig& config, std::size_t n_cal, double fl,
                                  double rag, double train) {
  if (fl < 0.0 || rag < 0.0 || train < 0.0)
    throw std::invalid_argument("slack components must be nonnegative");
  BoundComponents out;
  out.alpha = config.alpha;
  out.overshoot = 1.0 / (static_cast<double>(n_cal) + 1.0);
  out.delta_fl = fl;
  out.delta_rag = rag;
  out.delta_train = train;
  out.b = out.alpha + out.overshoot + fl + rag + train;
  if (!(out.b > 0.0) || out.b > 1.0 - config.eta) {
    throw AdmissibilityError("deployment bound b = " + std::to_string(out.b) +
                             " outside (0, 1 - eta]");
  }
  return out;
}

// Cost of the conditional construction relative to a fixed-level deviation
// term: sqrt(log(2/delta_t^cal) / log(2/delta_cal)).
inline double cost_overhead(std::uint64_t t, double delta_cal) {
  const double num = log_two_over_cal_budget(t, delta_cal);
  return std::sqrt(num / std::log(2.0 / delta_cal));
}

}  // namespace afcrag

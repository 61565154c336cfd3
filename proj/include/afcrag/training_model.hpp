#pragma once

// Distillation training-rate model and its propagation into the training
// slack across refresh events under a summable training budget.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace afcrag {

class NoInitialStudent : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct FpldParams {
  double k_nodes = 4;
  double n_r = 1000;
  double m_r = 10000;
  double b_r = 400;
  double v_vocab = 100;
  double d_dim = 10;
  double rho = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double eps_opt = 0.0;
  double eps_fit = 0.0;

  void validate() const {
    if (!(n_r > 0.0)) throw std::invalid_argument("n_r must be positive");
    if (!(m_r > 0.0)) throw std::invalid_argument("m_r must be positive");
    if (!(v_vocab > 0.0)) throw std::invalid_argument("vocabulary size must be positive");
    if (!(k_nodes > 0.0) || !(d_dim > 0.0) || !(b_r > 0.0) || rho < 0.0)
      throw std::invalid_argument("K, d, B must be positive and rho nonnegative");
    if (c1 < 0.0 || c2 < 0.0 || c3 < 0.0) throw std::invalid_argument("rate constants must be >= 0");
    if (eps_opt < 0.0 || eps_fit < 0.0) throw std::invalid_argument("floor terms must be >= 0");
  }
};

// c1 d/(K n) + c2 rho V log(V/delta)/sqrt(m) + c3 2^{-2B/V} + eps_opt + eps_fit
inline double fpld_rate(const FpldParams& p, double delta_r) {
  if (!(delta_r > 0.0 && delta_r < 1.0)) throw std::invalid_argument("delta_r must lie in (0,1)");
  p.validate();
  const double estimation = p.c1 * p.d_dim / (p.k_nodes * p.n_r);
  const double probe = p.c2 * p.rho * p.v_vocab * std::log(p.v_vocab / delta_r) / std::sqrt(p.m_r);
  const double logits = p.c3 * std::exp2(-2.0 * p.b_r / p.v_vocab);
  return estimation + probe + logits + p.eps_opt + p.eps_fit;
}

// delta_r = 6 delta_train / (pi^2 r^2), r >= 1.
inline double training_event_budget(std::uint64_t r, double delta_train) {
  if (r == 0) throw std::invalid_argument("training event index must be >= 1");
  const double rd = static_cast<double>(r);
  return 6.0 * delta_train / (std::numbers::pi * std::numbers::pi * rd * rd);
}

struct RefreshSchedule {
  std::vector<std::pair<std::uint64_t, FpldParams>> events;
  double budget_total = 0.05;

  void validate() const {
    if (!(budget_total > 0.0 && budget_total < 1.0))
      throw std::invalid_argument("training budget must lie in (0,1)");
    if (events.empty() || events.front().first != 0)
      throw NoInitialStudent("refresh schedule needs an initial event at step 0");
    for (std::size_t i = 1; i < events.size(); ++i)
      if (events[i].first <= events[i - 1].first)
        throw std::invalid_argument("refresh event steps must be strictly increasing");
    for (const auto& [step, params] : events) params.validate();
  }

  double event_budget(std::size_t index) const { return training_event_budget(index + 1, budget_total); }

  double total_allocated() const {
    double total = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) total += event_budget(i);
    return total;
  }

  std::vector<double> rates() const {
    std::vector<double> out;
    out.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i)
      out.push_back(fpld_rate(events[i].second, event_budget(i)));
    return out;
  }
};

// Rate of the most recent event with step <= t (step-inclusive lookup).
inline double epsilon_train_at(const RefreshSchedule& schedule, std::uint64_t t) {
  const auto& ev = schedule.events;
  auto it = std::upper_bound(ev.begin(), ev.end(), t,
                             [](std::uint64_t step, const auto& e) { return step < e.first; });
  if (it == ev.begin()) throw NoInitialStudent("no training event at or before step " + std::to_string(t));
  const auto index = static_cast<std::size_t>(std::distance(ev.begin(), it) - 1);
  return fpld_rate(ev[index].second, schedule.event_budget(index));
}

// Weaker rate without the conditional-density clause: f_max R^{1/4}.
inline double delta_train_weak(double rate, double f_max) {
  if (rate < 0.0) throw std::invalid_argument("training rate must be nonnegative");
  return f_max * std::sqrt(std::sqrt(rate));
}

}  // namespace afcrag

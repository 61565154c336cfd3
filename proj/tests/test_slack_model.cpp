#include "afcrag/slack_model.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "afcrag/quantize.hpp"

using namespace afcrag;

namespace {

// Independent long-double evaluation of 6 d / (pi^2 t^2).
long double budget_oracle(long double t, long double d) {
  const long double pi = 3.141592653589793238462643383279502884L;
  return 6.0L * d / (pi * pi * t * t);
}

}  // namespace

TEST(CalBudget, FirstStep) {
  EXPECT_NEAR(cal_budget_at(1, 0.05), 0.0303964, 1e-7);
  EXPECT_NEAR(cal_budget_at(1, 0.05), static_cast<double>(budget_oracle(1, 0.05L)), 1e-15);
}

TEST(CalBudget, DecaysMonotonically) {
  double prev = cal_budget_at(1, 0.05);
  for (std::uint64_t t = 2; t < 5000; t += 7) {
    const double cur = cal_budget_at(t, 0.05);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_LT(cal_budget_at(1'000'000, 0.05), 1e-13);
}

TEST(CalBudget, PartialSumsStayBelowTotal) {
  const double delta = 0.05;
  long double sum = 0.0L;
  for (std::uint64_t t = 1; t <= 10'000'000; ++t) {
    sum += cal_budget_at(t, delta);
    if (t % 1'000'000 == 0) {
      ASSERT_LT(static_cast<double>(sum), delta);
    }
  }
  // Tail beyond T is about 6 delta / (pi^2 T).
  EXPECT_NEAR(static_cast<double>(sum), delta, 1e-6);
}

TEST(CalBudget, RejectsBadInput) {
  EXPECT_THROW(cal_budget_at(0, 0.05), std::invalid_argument);
  EXPECT_THROW(cal_budget_at(1, 0.0), std::invalid_argument);
  EXPECT_THROW(cal_budget_at(1, 1.0), std::invalid_argument);
}

TEST(CalBudget, LogFormMatchesDirectForm) {
  for (std::uint64_t t : {1ULL, 2ULL, 17ULL, 1000ULL, 123456ULL}) {
    const double direct = std::log(2.0 / cal_budget_at(t, 0.05));
    EXPECT_NEAR(log_two_over_cal_budget(t, 0.05), direct, 1e-12 * direct);
  }
  // Still finite where the budget itself has underflowed.
  EXPECT_TRUE(std::isfinite(log_two_over_cal_budget(1ULL << 62, 0.05)));
}

TEST(DeltaFl, ReferenceValue) {
  EXPECT_NEAR(std::log(2.0 / 0.0303964), 4.1866, 1e-4);
  EXPECT_NEAR(delta_fl(100, 0.0303964, 0.0, 1.0, 1.0), 0.20462, 1e-4);
  // Same thing via the schedule.
  EXPECT_NEAR(delta_fl_at(1, 100, 0.05, 0.0, 1.0, 1.0), delta_fl(100, cal_budget_at(1, 0.05), 0.0, 1.0, 1.0),
              1e-12);
}

TEST(DeltaFl, VanishesWithBufferSize) {
  double prev = delta_fl(10, 0.01, 0.0, 1.0, 1.0);
  for (std::size_t n : {100u, 1000u, 100000u, 10000000u}) {
    const double cur = delta_fl(n, 0.01, 0.0, 1.0, 1.0);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(DeltaFl, AddsDistortionAndScales) {
  const double base = delta_fl(100, 0.02, 0.0, 1.0, 1.0);
  EXPECT_NEAR(delta_fl(100, 0.02, phi(8), 1.0, 1.0), base + phi(8), 1e-15);
  EXPECT_NEAR(delta_fl(100, 0.02, 0.0, 2.5, 1.0), 2.5 * base, 1e-15);
}

TEST(DeltaFl, RejectsBadInput) {
  EXPECT_THROW(delta_fl(0, 0.02, 0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(delta_fl(10, 0.0, 0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(delta_fl(10, 0.02, -1.0, 1.0, 1.0), std::invalid_argument);
}

TEST(DeltaRag, ReferenceValue) {
  const std::vector<int> bits(4, 3);
  EXPECT_NEAR(delta_rag(std::span<const int>(bits), 1.0, [](int) { return 0.01; }), 0.05, 1e-15);
}

TEST(DeltaRag, SingleNode) {
  const std::vector<int> bits{6};
  EXPECT_DOUBLE_EQ(delta_rag(std::span<const int>(bits), 2.0, [](int b) { return v(b); }), 2.0 * std::sqrt(v(6)));
}

TEST(DeltaRag, UniformBudgetsScaleAsInverseRootK) {
  const auto at = [](int k) {
    const std::vector<int> bits(static_cast<std::size_t>(k), 8);
    return delta_rag(std::span<const int>(bits), 1.0, [](int b) { return v(b); });
  };
  const double c = at(1);
  for (int k = 2; k <= 128; k *= 2) EXPECT_NEAR(at(k) * std::sqrt(static_cast<double>(k)), c, 1e-15);
}

TEST(DeltaRag, RejectsEmptyAndZeroBits) {
  const std::vector<int> none;
  const std::vector<int> zero{0};
  auto vf = [](int b) { return v(b); };
  EXPECT_THROW(delta_rag(std::span<const int>(none), 1.0, vf), std::invalid_argument);
  EXPECT_THROW(delta_rag(std::span<const int>(zero), 1.0, vf), std::invalid_argument);
}

TEST(DeltaTrain, Values) {
  EXPECT_EQ(delta_train_bound(0.0, 1.0), 0.0);
  EXPECT_NEAR(delta_train_bound(0.02, 1.0), 0.22, 1e-15);
  EXPECT_THROW(delta_train_bound(-1e-9, 1.0), std::invalid_argument);
}

TEST(AssembleB, OvershootOnly) {
  SlackConfig cfg;
  const auto b = assemble_b(cfg, 100, 0.0, 0.0, 0.0);
  EXPECT_NEAR(b.b, 0.1 + 1.0 / 101.0, 1e-15);
  EXPECT_NEAR(b.b, 0.1099, 1e-4);
}

TEST(AssembleB, ExactSumOfComponents) {
  SlackConfig cfg;
  const auto b = assemble_b(cfg, 250, 0.03, 0.012, 0.07);
  EXPECT_DOUBLE_EQ(b.b, b.alpha + b.overshoot + b.delta_fl + b.delta_rag + b.delta_train);
}

TEST(AssembleB, Inadmissible) {
  SlackConfig cfg;
  // 0.1 + 1/101 + 0.85 > 0.95
  EXPECT_THROW(assemble_b(cfg, 100, 0.5, 0.2, 0.15), AdmissibilityError);
  EXPECT_THROW(assemble_b(cfg, 100, -0.01, 0.0, 0.0), std::invalid_argument);
}

TEST(AssembleB, MonotoneInEachSlack) {
  SlackConfig cfg;
  const double base = assemble_b(cfg, 100, 0.05, 0.05, 0.05).b;
  EXPECT_GT(assemble_b(cfg, 100, 0.06, 0.05, 0.05).b, base);
  EXPECT_GT(assemble_b(cfg, 100, 0.05, 0.06, 0.05).b, base);
  EXPECT_GT(assemble_b(cfg, 100, 0.05, 0.05, 0.06).b, base);
  EXPECT_GT(assemble_b(cfg, 50, 0.05, 0.05, 0.05).b, base);
}

TEST(CostOverhead, Values) {
  EXPECT_NEAR(cost_overhead(1, 0.05), 1.065, 1e-3);
  EXPECT_GT(cost_overhead(1, 0.05), 1.0);
  const double oracle = std::sqrt(std::log(2.0 / static_cast<double>(budget_oracle(1e4L, 0.05L))) / std::log(40.0));
  EXPECT_NEAR(cost_overhead(10000, 0.05), oracle, 1e-12);
  EXPECT_NEAR(cost_overhead(10000, 0.05), 2.4756, 1e-3);
  EXPECT_NEAR(cost_overhead(100000, 0.05), 2.7160, 1e-3);
}

TEST(CostOverhead, Increasing) {
  double prev = 0.0;
  for (std::uint64_t t = 1; t < 10'000'000; t *= 3) {
    const double cur = cost_overhead(t, 0.05);
    EXPECT_GT(cur, prev);
    prev = cur;
  }
}

TEST(SlackConfig, Validation) {
  SlackConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.f_max = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

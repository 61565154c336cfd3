#include "afcrag/envelope.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "afcrag/rng.hpp"

using namespace afcrag;

namespace {

// log(1/d) natural, log2 inside.
double boundary_oracle(double t, double d, double c) {
  return c * std::sqrt(0.5 * t * (std::log(1.0 / d) + std::log(1.0 + std::log(t) / std::log(2.0))));
}

}  // namespace

TEST(Boundary, ReferenceValues) {
  const BoundaryParams p;
  EXPECT_NEAR(boundary(1, p), 1.7 * std::sqrt(0.5 * std::log(20.0)), 1e-12);
  EXPECT_NEAR(boundary(1, p), 2.081, 1e-3);
  EXPECT_NEAR(boundary(1000, p), 88.3, 0.1);
  for (double t : {2.0, 16.0, 12345.0, 1e7}) EXPECT_NEAR(boundary(static_cast<std::uint64_t>(t), p), boundary_oracle(t, 0.05, 1.7), 1e-9);
}

TEST(Boundary, IncreasingWithVanishingWidth) {
  const BoundaryParams p;
  double prev = 0.0;
  for (std::uint64_t t = 1; t <= 100000; t += 37) {
    const double u = boundary(t, p);
    ASSERT_GT(u, prev);
    prev = u;
  }
  EXPECT_LT(boundary(1'000'000, p) / 1e6, boundary(1000, p) / 1e3);
}

TEST(Boundary, IteratedLogShape) {
  const BoundaryParams p;
  double lo = 1e9, hi = 0.0;
  for (double t = 16; t <= 1e7; t *= 1.5) {
    const double r = boundary(static_cast<std::uint64_t>(t), p) / std::sqrt(t * std::log(std::log(t)));
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  EXPECT_GT(lo, 0.5);
  EXPECT_LT(hi, 5.0);
}

TEST(Boundary, Rejects) {
  EXPECT_THROW(boundary(0, BoundaryParams{}), std::invalid_argument);
  EXPECT_THROW((BoundaryParams{2.5, 0.05}.validate()), std::invalid_argument);
  EXPECT_THROW((BoundaryParams{1.7, 0.0}.validate()), std::invalid_argument);
}

TEST(Envelope, UpdateArithmetic) {
  const BoundaryParams p;
  EnvelopeState s;
  s = update(s, 0, 0.1, p);
  EXPECT_DOUBLE_EQ(s.s, -0.1);
  EXPECT_EQ(s.t, 1u);
  EXPECT_FALSE(s.breached());
}

TEST(Envelope, AllMissBreaches) {
  const BoundaryParams p;
  EnvelopeState s;
  for (int i = 0; i < 100; ++i) s = update(s, 1, 0.1, p);
  EXPECT_NEAR(s.s, 90.0, 1e-9);
  EXPECT_TRUE(s.breached());
}

TEST(Envelope, SegmentsConcatenate) {
  const BoundaryParams p;
  Rng rng(2);
  std::vector<std::pair<int, double>> data;
  for (int i = 0; i < 300; ++i) data.emplace_back(rng.bernoulli(0.2), 0.1 + 0.2 * rng.uniform());
  EnvelopeState whole, first;
  double second = 0.0;
  for (int i = 0; i < 300; ++i) {
    whole = update(whole, data[i].first, data[i].second, p);
    if (i < 120) first = update(first, data[i].first, data[i].second, p);
    else second += data[i].first - data[i].second;
  }
  EXPECT_NEAR(whole.s, first.s + second, 1e-12);
}

TEST(Envelope, NullBreachesAreRare) {
  const BoundaryParams p;
  int breaches = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    Rng rng(trajectory_seed(1, "envelope-test", static_cast<std::uint64_t>(i)));
    EnvelopeState s;
    for (int t = 0; t < 2000; ++t) s = update(s, rng.bernoulli(0.2), 0.2, p);
    breaches += s.breached() ? 1 : 0;
  }
  EXPECT_LE(breaches, n / 10);
  EXPECT_EQ(breaches, 0);
}

TEST(RateBound, Values) {
  const BoundaryParams p;
  const std::vector<std::pair<int, double>> one{{1, 0.2}};
  EXPECT_NEAR(miscoverage_rate_bound(one, 1, p), 2.281, 1e-3);
  const std::vector<std::pair<int, double>> flat(10000, {0, 0.15});
  const double r = miscoverage_rate_bound(flat, 10000, p);
  EXPECT_NEAR(r, 0.15 + boundary(10000, p) / 1e4, 1e-12);
  EXPECT_NEAR(r - 0.15, 0.030, 2e-3);
  EXPECT_THROW(miscoverage_rate_bound(one, 0, p), std::invalid_argument);
  EXPECT_THROW(miscoverage_rate_bound(one, 2, p), std::invalid_argument);
}

TEST(RateBound, MonotoneInBounds) {
  const BoundaryParams p;
  std::vector<std::pair<int, double>> a(50, {0, 0.1});
  const double base = miscoverage_rate_bound(a, 50, p);
  a[17].second = 0.3;
  EXPECT_GT(miscoverage_rate_bound(a, 50, p), base);
}

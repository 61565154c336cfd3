#include "afcrag/federation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "afcrag/quantize.hpp"
#include "afcrag/rng.hpp"

using namespace afcrag;

namespace {

SwarmState make_swarm(int k, int bits, double noise) {
  SwarmState s;
  for (int i = 0; i < k; ++i) s.nodes.push_back({i, bits, noise});
  return s;
}

}  // namespace

TEST(Serve, DegenerateSwarmIsExact) {
  auto s = make_swarm(1, 52, 0.0);
  s.threshold = 0.6;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double score = rng.uniform();
    Rng node_rng(i);
    ASSERT_EQ(serve_query(s, score, node_rng).m, score > 0.6 ? 1 : 0);
  }
}

TEST(Serve, ThresholdAtMaxCoversEverything) {
  auto s = make_swarm(3, 4, 0.1);
  s.threshold = s.s_max;
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) ASSERT_EQ(serve_query(s, rng.uniform(), rng).m, 0);
}

TEST(Serve, UplinkCost) {
  auto s = make_swarm(3, 4, 0.0);
  s.nodes[1].bits = 9;
  Rng rng(3);
  EXPECT_EQ(serve_query(s, 0.5, rng).uplink_bits, 17.0);
  EXPECT_THROW(serve_query(SwarmState{}, 0.5, rng), std::invalid_argument);
}

TEST(Serve, AggregateVariance) {
  const int k = 4, bits = 4;
  const double sd = 0.02;
  const auto s = make_swarm(k, bits, sd);
  Rng rng(5);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    // Keep scores away from the clip range so clipping cannot shrink noise.
    const double score = 0.2 + 0.6 * rng.uniform();
    const double e = serve_query(s, score, rng).swarm_score - score;
    sum += e;
    sum2 += e * e;
  }
  const double var = sum2 / n - (sum / n) * (sum / n);
  const double bound = (sd * sd + v(bits)) / k;
  EXPECT_LE(var, bound * 1.03);
  EXPECT_GE(var, bound * 0.97);
}

TEST(Buffer, FifoEviction) {
  CalBuffer b;
  b.window = 3;
  for (int i = 1; i <= 4; ++i) b = buffer_update(std::move(b), 0.1 * i, static_cast<std::uint64_t>(i));
  ASSERT_EQ(b.size(), 3u);
  EXPECT_DOUBLE_EQ(b.entries.front(), 0.2);
  EXPECT_DOUBLE_EQ(b.entries.back(), 0.4);
  EXPECT_EQ(b.newest_step, 4u);
  for (int i = 0; i < 100; ++i) {
    b = buffer_update(std::move(b), 0.5, 10);
    ASSERT_LE(b.size(), b.window);
  }
}

TEST(Refresh, BlockedBelowMinimum) {
  auto s = make_swarm(2, 8, 0.0);
  Rng rng(1);
  EXPECT_THROW(refresh_threshold(s, 8, 0.1, rng), InsufficientBuffer);
  for (int i = 0; i < 9; ++i) s.buffer = buffer_update(std::move(s.buffer), 0.5, 0);
  EXPECT_THROW(refresh_threshold(s, 8, 0.1, rng), InsufficientBuffer);
  s.buffer = buffer_update(std::move(s.buffer), 0.5, 0);
  EXPECT_NO_THROW(refresh_threshold(s, 8, 0.1, rng));
}

TEST(Refresh, LosslessPathIsExactOrderStatistic) {
  auto s = make_swarm(1, 8, 0.0);
  Rng rng(6);
  std::vector<double> scores;
  for (int i = 0; i < 199; ++i) {
    scores.push_back(rng.uniform());
    s.buffer = buffer_update(std::move(s.buffer), scores.back(), static_cast<std::uint64_t>(i + 1));
  }
  s = refresh_threshold(std::move(s), 52, 0.1, rng);
  std::sort(scores.begin(), scores.end());
  EXPECT_NEAR(s.threshold, scores[179], 1e-15);  // ceil(0.9 * 200) = 180
  EXPECT_EQ(s.threshold_data_step, 199u);
}

TEST(Refresh, DistortionTriangleBound) {
  Rng data(7);
  for (int rep = 0; rep < 100; ++rep) {
    const double sd = 0.01 * (rep % 4);
    auto s = make_swarm(3, 8, sd);
    s.buffer.window = 400;
    std::vector<double> scores;
    for (int i = 0; i < 300; ++i) {
      scores.push_back(0.1 + 0.8 * data.uniform());
      s.buffer = buffer_update(std::move(s.buffer), scores.back(), 0);
    }
    const int bits = 3 + rep % 8;
    Rng rng(1000 + rep);
    s = refresh_threshold(std::move(s), bits, 0.1, rng);
    const double exact = compress_cal_summary(scores, 52, 0.1).exact_quantile;
    // A perturbation of at most m moves any order statistic by at most m; 6 sd is the noise budget.
    ASSERT_LE(std::abs(s.threshold - exact), phi(bits) + 6.0 * sd + 1e-12) << rep;
  }
}

TEST(Refresh, TakesEffectOnNextServe) {
  auto s = make_swarm(1, 52, 0.0);
  s.threshold = 0.99;
  for (int i = 0; i < 50; ++i) s.buffer = buffer_update(std::move(s.buffer), 0.1, static_cast<std::uint64_t>(i + 1));
  Rng rng(1);
  const int before = serve_query(s, 0.5, rng).m;
  const auto next = refresh_threshold(s, 52, 0.1, rng);
  EXPECT_EQ(before, 0);
  EXPECT_EQ(serve_query(next, 0.5, rng).m, 1);
}

TEST(Audit, FlagsSameStepData) {
  PredictabilityAudit a;
  a.record(5, 4, 4);
  EXPECT_TRUE(a.clean());
  a.record(5, 5, 4);
  a.record(6, 0, 6);
  EXPECT_EQ(a.violations, 2u);
  EXPECT_EQ(a.checked, 3u);
}

TEST(Swarm, StationaryCoverage) {
  // Large bits, large buffer, no drift: long-run miscoverage near alpha.
  auto s = make_swarm(4, 12, 0.0);
  s.buffer.window = 2000;
  Rng data(9), rng(10);
  for (int i = 0; i < 2000; ++i) s.buffer = buffer_update(std::move(s.buffer), data.uniform(), 0);
  s = refresh_threshold(std::move(s), 12, 0.1, rng);
  int misses = 0;
  const int horizon = 10000;
  for (int t = 1; t <= horizon; ++t) {
    const double score = data.uniform();
    misses += serve_query(s, score, rng).m;
    s.buffer = buffer_update(std::move(s.buffer), score, static_cast<std::uint64_t>(t));
    if (t % 100 == 0) s = refresh_threshold(std::move(s), 12, 0.1, rng);
  }
  EXPECT_NEAR(static_cast<double>(misses) / horizon, 0.1, 0.02);
}

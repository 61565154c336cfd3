#include "afcrag/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "afcrag/rng.hpp"

using namespace afcrag;

namespace {

struct ErrorStats {
  double mean = 0.0;
  double var = 0.0;
  double corr = 0.0;
  double max_abs = 0.0;
};

ErrorStats dither_errors(int bits, int n, std::uint64_t seed) {
  const DitheredQuantizer q(bits, 1.0);
  Rng rng(seed);
  double se = 0, se2 = 0, ss = 0, ss2 = 0, sx = 0;
  ErrorStats out;
  for (int i = 0; i < n; ++i) {
    const double s = rng.uniform();
    const double u = rng.uniform(-0.5 * q.step(), 0.5 * q.step());
    const double e = quantize(s, q, u) - s;
    se += e;
    se2 += e * e;
    ss += s;
    ss2 += s * s;
    sx += s * e;
    out.max_abs = std::max(out.max_abs, std::abs(e));
  }
  out.mean = se / n;
  out.var = se2 / n - out.mean * out.mean;
  const double vs = ss2 / n - (ss / n) * (ss / n);
  out.corr = (sx / n - (ss / n) * out.mean) / std::sqrt(vs * out.var);
  return out;
}

}  // namespace

TEST(Quantizer, StepIsPowerOfTwo) {
  EXPECT_EQ(DitheredQuantizer(4, 1.0).step(), 0.0625);
  EXPECT_EQ(DitheredQuantizer(3, 2.0).step(), 0.25);
  EXPECT_THROW(DitheredQuantizer(0, 1.0), std::invalid_argument);
  EXPECT_THROW(DitheredQuantizer(4, 0.0), std::invalid_argument);
}

TEST(Quantizer, RejectsUnclippedScoreAndWideDither) {
  const DitheredQuantizer q(4, 1.0);
  EXPECT_THROW(quantize(1.01, q, 0.0), std::invalid_argument);
  EXPECT_THROW(quantize(-0.01, q, 0.0), std::invalid_argument);
  EXPECT_THROW(quantize(0.5, q, 0.04), std::invalid_argument);
}

TEST(Quantizer, FineGridIsNearlyExact) {
  const DitheredQuantizer q(52, 1.0);
  EXPECT_NEAR(quantize(0.3141592653589793, q, 0.0), 0.3141592653589793, 1e-15);
}

TEST(Quantizer, ErrorWithinHalfStep) {
  const auto st = dither_errors(4, 100000, 1);
  EXPECT_LE(st.max_abs, 0.5 * DitheredQuantizer(4, 1.0).step() + 1e-15);
}

TEST(Quantizer, DitherErrorMoments) {
  const int n = 100000;
  for (int bits : {2, 4, 6}) {
    const auto st = dither_errors(bits, n, 17 + bits);
    EXPECT_LE(std::abs(st.mean), 4.0 * std::sqrt(v(bits) / n)) << bits;
    EXPECT_NEAR(st.var / v(bits), 1.0, 0.03) << bits;
    EXPECT_LE(std::abs(st.corr), 0.02) << bits;
  }
}

TEST(Variance, Values) {
  EXPECT_NEAR(v(4), 3.255e-4, 1e-7);
  EXPECT_DOUBLE_EQ(v(4), std::pow(2.0, -8) / 12.0);
  for (int b = 1; b < 30; ++b) EXPECT_EQ(v(b + 1) / v(b), 0.25);
  EXPECT_DOUBLE_EQ(v(3, 2.0), 4.0 * v(3));
  EXPECT_THROW(v(0), std::invalid_argument);
}

TEST(Distortion, Values) {
  EXPECT_NEAR(phi(8), 0.0039, 1e-4);
  EXPECT_EQ(phi(8), 1.0 / 256.0);
  for (int b = 1; b < 30; ++b) EXPECT_EQ(phi(b + 1) / phi(b), 0.5);
  EXPECT_THROW(phi(0), std::invalid_argument);
}

TEST(ConformalRank, Values) {
  EXPECT_EQ(conformal_rank(9, 0.1), 9u);
  EXPECT_EQ(conformal_rank(100, 0.1), 91u);
  EXPECT_EQ(conformal_rank(99, 0.1), 90u);
  bool clamped = false;
  EXPECT_EQ(conformal_rank(1, 0.1, &clamped), 1u);
  EXPECT_TRUE(clamped);
  EXPECT_EQ(conformal_rank(1000, 0.1, &clamped), 901u);
  EXPECT_FALSE(clamped);
  EXPECT_THROW(conformal_rank(0, 0.1), std::invalid_argument);
}

TEST(CalSummary, OrderStatistic) {
  const std::vector<double> scores{0.5, 0.3, 0.9, 0.1, 0.7, 0.2, 0.8, 0.4, 0.6};
  const auto s = compress_cal_summary(scores, 52, 0.1);
  EXPECT_EQ(s.rank, 9u);
  EXPECT_EQ(s.exact_quantile, 0.9);
  EXPECT_NEAR(s.quantized_quantile, 0.9, 1e-15);
  EXPECT_FALSE(s.rank_clamped);
}

TEST(CalSummary, DegenerateBuffer) {
  const std::vector<double> one{0.42};
  const auto s = compress_cal_summary(one, 8, 0.1);
  EXPECT_EQ(s.rank, 1u);
  EXPECT_TRUE(s.rank_clamped);
  EXPECT_THROW(compress_cal_summary(std::vector<double>{}, 8, 0.1), std::invalid_argument);
  EXPECT_THROW(compress_cal_summary(std::vector<double>{1.5}, 8, 0.1), std::invalid_argument);
}

TEST(CalSummary, DistortionBoundOnRandomSets) {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = static_cast<std::size_t>(20 + rng.uniform() * 500);
    std::vector<double> scores(n);
    for (auto& s : scores) s = rng.uniform();
    const int bits = 1 + rep % 12;
    const auto sum = compress_cal_summary(scores, bits, 0.1);
    // Brute force: sort and index.
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const auto k = static_cast<std::size_t>(std::ceil(0.9 * (n + 1) - 1e-9));
    ASSERT_EQ(sum.exact_quantile, sorted[std::min(k, n) - 1]);
    ASSERT_LE(std::abs(sum.quantized_quantile - sum.exact_quantile), phi(bits));
  }
}

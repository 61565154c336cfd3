#pragma once

// Subtractively dithered scalar quantization of scores in [0, s_max] and
// the quantized order-statistic calibration summary.
//
// Step sizes are exact powers of two times s_max, so v(B) and phi(B) are
// bit-exact reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace afcrag {

struct DitheredQuantizer {
  int bits = 8;
  double s_max = 1.0;

  DitheredQuantizer() = default;
  DitheredQuantizer(int bits_, double s_max_) : bits(bits_), s_max(s_max_) {
    if (bits < 1) throw std::invalid_argument("quantizer needs at least one bit");
    if (!(s_max > 0.0)) throw std::invalid_argument("s_max must be positive");
  }

  double step() const { return std::ldexp(s_max, -bits); }
};

// round((s + u)/step) * step - u. The error is uniform on
// [-step/2, step/2] and independent of s when u is.
inline double quantize(double s, const DitheredQuantizer& q, double dither_draw) {
  if (!(s >= 0.0 && s <= q.s_max)) throw std::invalid_argument("score outside [0, s_max]; clip first");
  const double step = q.step();
  if (std::abs(dither_draw) > 0.5 * step) throw std::invalid_argument("dither outside [-step/2, step/2]");
  return std::nearbyint((s + dither_draw) / step) * step - dither_draw;
}

// Quantization-error variance v(B) = s_max^2 2^{-2B} / 12.
inline double v(int bits, double s_max = 1.0) {
  if (bits < 1) throw std::invalid_argument("bits must be >= 1");
  const double step = std::ldexp(s_max, -bits);
  return step * step / 12.0;
}

// Calibration-summary distortion phi(B) = s_max 2^{-B}.
inline double phi(int bits, double s_max = 1.0) {
  if (bits < 1) throw std::invalid_argument("bits must be >= 1");
  return std::ldexp(s_max, -bits);
}

inline double clip_score(double s, double s_max) { return std::clamp(s, 0.0, s_max); }

// ceil((1 - alpha)(n + 1)), 1-based. Sets `clamped` when it exceeds n.
inline std::size_t conformal_rank(std::size_t n, double alpha, bool* clamped = nullptr) {
  if (n == 0) throw std::invalid_argument("empty calibration buffer");
  const double raw = (1.0 - alpha) * (static_cast<double>(n) + 1.0);
  // Absorb representation error, e.g. 0.9 * 10 = 9.000000000000002.
  auto rank = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  rank = std::max<std::size_t>(rank, 1);
  const bool over = rank > n;
  if (clamped) *clamped = over;
  return over ? n : rank;
}

struct CalSummary {
  double quantized_quantile = 0.0;
  double exact_quantile = 0.0;
  int bits_used = 0;
  std::size_t rank = 0;
  bool rank_clamped = false;
};

inline CalSummary compress_cal_summary(std::span<const double> scores, int bits, double alpha,
                                       double s_max = 1.0) {
  if (scores.empty()) throw std::invalid_argument("empty calibration buffer");
  if (bits < 1) throw std::invalid_argument("bits must be >= 1");
  for (double s : scores)
    if (!(s >= 0.0 && s <= s_max)) throw std::invalid_argument("calibration score outside [0, s_max]");

  CalSummary out;
  out.bits_used = bits;
  out.rank = conformal_rank(scores.size(), alpha, &out.rank_clamped);

  std::vector<double> sorted(scores.begin(), scores.end());
  auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(out.rank - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  out.exact_quantile = *kth;

  const double step = std::ldexp(s_max, -bits);
  out.quantized_quantile = std::clamp(std::nearbyint(out.exact_quantile / step) * step, 0.0, s_max);
  return out;
}

}  // namespace afcrag

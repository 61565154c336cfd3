#pragma once

// Seeded random streams. Every trajectory owns its generators; seeds are
// derived from a master seed with SplitMix64 so no two trajectories share
// state and results do not depend on scheduling.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace afcrag {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to fold experiment labels into seeds.
inline std::uint64_t label_hash(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Seed of trajectory `index` in the ensemble `label` under `master`.
inline std::uint64_t trajectory_seed(std::uint64_t master, std::string_view label,
                                     std::uint64_t index) {
  return splitmix64(splitmix64(master ^ label_hash(label)) + splitmix64(index));
}

// Independent sub-stream of a trajectory (stream draws, dither, noise, ...).
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) from the top 53 bits; identical on every platform.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Fresh distribution per call, so no cached variate leaks between calls.
  double normal(double mean, double sd) {
    if (sd == 0.0) return mean;
    std::normal_distribution<double> dist(mean, sd);
    return dist(engine_);
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Beta(a, b) through two gamma draws.
  double beta(double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(engine_);
    const double y = gb(engine_);
    return x / (x + y);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace afcrag

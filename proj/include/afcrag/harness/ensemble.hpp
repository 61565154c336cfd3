#pragma once

// Seeded trajectory ensembles on a small worker pool. Results come back in
// index order, so aggregates never depend on scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace afcrag::harness {

template <class T>
struct Outcome {
  std::uint64_t index = 0;
  std::optional<T> value;
  std::string error;

  bool ok() const { return value.has_value(); }
};

inline unsigned default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Calls fn(i) for i in [0, n). A throwing trajectory is recorded in its
// slot and the rest of the ensemble keeps going.
template <class Fn>
auto run_ensemble(std::uint64_t n, unsigned workers, Fn&& fn)
    -> std::vector<Outcome<std::invoke_result_t<Fn&, std::uint64_t>>> {
  using T = std::invoke_result_t<Fn&, std::uint64_t>;
  std::vector<Outcome<T>> out(n);
  std::atomic<std::uint64_t> next{0};

  auto work = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= n) return;
      out[i].index = i;
      try {
        out[i].value.emplace(fn(i));
      } catch (const std::exception& e) {
        out[i].error = e.what();
      } catch (...) {
        out[i].error = "unknown error";
      }
    }
  };

  workers = std::max(1u, workers);
  const auto spawn = static_cast<unsigned>(std::min<std::uint64_t>(workers, n));
  if (spawn <= 1) {
    work();
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(spawn);
  for (unsigned w = 0; w < spawn; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  return out;
}

template <class T>
std::uint64_t failed_count(const std::vector<Outcome<T>>& outcomes) {
  return static_cast<std::uint64_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return !o.ok(); }));
}

}  // namespace afcrag::harness

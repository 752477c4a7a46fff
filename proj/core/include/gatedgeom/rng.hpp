#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace gatedgeom {

// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

// Key of an independent random stream: hash(seed, purpose tag, index).
// Streams for different tags or indices never share state.
std::uint64_t stream_key(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

// Counter-based generator: draw n of a stream is splitmix64(key + n * golden).
// All distributions are implemented here so that outputs are identical across
// standard libraries.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
      : key_(stream_key(seed, tag, index)) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; consumes two draws per call.
  double normal();
  // Uniform integer in [0, n), n > 0, by rejection.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, CounterRng& rng);

}  // namespace gatedgeom

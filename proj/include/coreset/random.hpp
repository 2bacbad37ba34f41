#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace coreset {

std::uint64_t splitmix64(std::uint64_t x);

// xoshiro256** seeded through SplitMix64. Every draw below is defined in
// terms of raw 64-bit outputs, so sequences are identical on every platform
// (no std:: distributions are involved).
//
// Stream splitting: `child(key)` returns an independent generator whose seed
// is splitmix64(seed ^ splitmix64(key + 0x9E3779B97F4A7C15)). It depends only
// on the parent seed and the key, never on how many draws the parent made.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] Rng child(std::uint64_t key) const;

  std::uint64_t next();
  // Uniform in [0, bound); bound > 0. Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in (0, 1].
  double uniform_open_zero();
  // Standard normal via Box-Muller (one output per call).
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

// Combine values into one 64-bit stream key.
std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts);

// m distinct elements of `pool`, uniformly at random, returned sorted.
// Partial Fisher-Yates over a copy of the pool, in the pool's order.
std::vector<std::size_t> sample_without_replacement(std::span<const std::size_t> pool,
                                                    std::size_t m, Rng& rng);

// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace coreset

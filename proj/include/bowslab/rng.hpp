#pragma once

// Counter-based pseudo-random numbers.
//
// Every random quantity in the library is a pure function of a 64-bit key and
// an integer counter, so any element of a stream can be produced independently
// of the others. Parallel evaluation and partial recomputation therefore give
// the same bits as a sequential run, on every platform.
//
// Mixing: SplitMix64 finalizer applied twice (key and counter).
// Gaussian: Box-Muller on two consecutive uniforms, cosine branch only.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace bowslab {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Fans one seed out into independent, named sub-seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return mix64(seed ^ mix64(h));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return mix64(mix64(seed ^ mix64(a)) ^ b);
}

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ ^ mix64(counter));
  }

  // Uniform in (0, 1]; never returns zero so log() is safe.
  double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal variate for slot `counter` (consumes counters 2c, 2c+1).
  double gaussian(std::uint64_t counter) const noexcept {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n). Multiply-shift; bias is below 2^-32 for n < 2^32.
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const noexcept {
    __extension__ using u128 = unsigned __int128;
    const u128 product = static_cast<u128>(bits(counter)) * n;
    return static_cast<std::uint64_t>(product >> 64);
  }

  bool coin(std::uint64_t counter) const noexcept { return (bits(counter) >> 63) != 0; }

 private:
  std::uint64_t key_;
};

// Sequential view over a CounterRng for algorithms that draw one value after another.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) noexcept : rng_(key) {}

  std::uint64_t below(std::uint64_t n) noexcept { return rng_.below(next_++, n); }
  double uniform() noexcept { return rng_.uniform(next_++); }
  double gaussian() noexcept { return rng_.gaussian(next_++); }

 private:
  CounterRng rng_;
  std::uint64_t next_ = 0;
};

}  // namespace bowslab

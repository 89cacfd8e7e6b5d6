#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace lces {

// Seeded generator with platform-independent derived distributions.
// std::*_distribution output differs between standard libraries, so the
// reproducibility contract is built directly on mt19937_64's raw stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t UniformInt(std::uint64_t bound);

  // Uniform real in [0, 1) with 53 bits of randomness.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform real in [lo, hi).
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via Box-Muller; caches the second variate.
  double Normal();

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t k = items.size(); k > 1; --k) {
      std::size_t j = static_cast<std::size_t>(UniformInt(k));
      std::swap(items[k - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable 64-bit hash of a byte string (FNV-1a). Used for seed derivation only.
std::uint64_t Fnv1a64(std::string_view bytes);

// Mixes two 64-bit values into a well-distributed seed (splitmix64 finalizer).
std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b);

}  // namespace lces

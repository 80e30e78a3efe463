#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace lesionbench {

// SplitMix64 (Steele, Lea & Flood 2014; reference code by S. Vigna). Every
// seeded decision in the harness draws from this generator so splits and
// training trajectories reproduce across standard libraries and platforms;
// <random> distributions are implementation-defined and are never used.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  // Standard normal via the Box-Muller transform (one value per call).
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

// Fisher-Yates, drawing j uniformly from [0, i] for i = n-1 down to 1.
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace lesionbench

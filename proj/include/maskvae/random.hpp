#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <random>

namespace maskvae {

using Rng = std::mt19937_64;

// Independent, reproducible generator for (seed, stream). Streams let a
// training epoch or an edit draw its own noise without sharing state.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x6d61736bu};
  return Rng(seq);
}

// Box-Muller on the raw engine output, so draws are identical across
// standard library implementations.
class NormalSampler {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform(rng);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  static double uniform(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Uniform double in [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * NormalSampler::uniform(rng);
}

// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(NormalSampler::uniform(rng) * static_cast<double>(n));
}

// Fisher-Yates with the portable index draw above.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace maskvae

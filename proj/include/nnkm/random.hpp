#pragma once

// Portable random streams.
//
// Every draw goes through std::mt19937_64, whose output sequence is fixed by
// the C++ standard. The std:: distributions are not portable across standard
// libraries, so the conversions to uniform reals, bounded integers and normal
// deviates are written out here. A given seed therefore produces the same
// datasets and initializations on every platform.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "nnkm/error.hpp"

namespace nnkm {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, bound). Bitmask rejection, so unbiased.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw usage_error("uniform_below: bound must be positive");
    if (bound == 1) return 0;
    std::uint64_t mask = bound - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      const std::uint64_t candidate = engine_() & mask;
      if (candidate < bound) return candidate;
    }
  }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// `count` distinct indices from [0, population), uniformly without
// replacement, in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                           std::size_t count, Rng& rng) {
  if (count > population) {
    throw usage_error("cannot draw " + std::to_string(count) + " distinct samples from " +
                      std::to_string(population));
  }
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(population - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace nnkm

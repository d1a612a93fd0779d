/// @file rng.hpp
/// @brief Seeded counter-based random number generator.
///
/// A splitmix64 core with Box-Muller normals. Deliberately not std::<random>
/// distributions: their output sequences are implementation-defined, while
/// reproducible seeded streams (permutation tests, randomized sketches,
/// Monte-Carlo noise draws) are part of the library contract. The generator
/// is cheap to fork: fork(k) yields an independent stream for sub-task k,
/// which keeps parallel and serial executions identical.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace morphassim {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Next raw 64-bit word (splitmix64).
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in (0,1).
    double uniform() {
        // 53 random bits; +0.5 keeps the value strictly inside (0,1).
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    /// Fisher-Yates permutation of {0..n-1}.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = index(i);
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

    /// Independent stream for sub-task k of this generator's seed.
    Rng fork(std::uint64_t k) const {
        Rng child(state_ ^ (0xa5a5a5a5a5a5a5a5ULL + k * 0x9e3779b97f4a7c15ULL));
        child.next_u64();
        return child;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace morphassim

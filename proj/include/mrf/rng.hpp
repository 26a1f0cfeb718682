#pragma once

#include <cmath>
#include <cstdint>

// Counter-free splitmix64 generator (Steele, Lea, Vigna). Chosen over the
// <random> engines because std::normal_distribution is implementation
// defined, which would make committed fixtures non-portable. Uniforms come
// from the high 53 bits; Gaussians from the Box-Muller transform.

namespace mrf {

inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return splitmix64_finalize(state_);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1], safe as a log() argument.
    double next_double_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal pair via Box-Muller.
    void next_gaussian_pair(double& z0, double& z1) {
        const double u1 = next_double_open();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        z0 = r * std::cos(t);
        z1 = r * std::sin(t);
    }

  private:
    std::uint64_t state_;
};

/// Per-trial stream derivation: seed_trial = finalize(seed + phi64 * (trial + 1)).
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64_finalize(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

} // namespace mrf

#pragma once

#include <cstdint>
#include <random>

namespace lori {

/// Deterministic random stream. Uniform, normal and Poisson draws are
/// implemented here rather than with std distributions so that results are
/// identical across standard-library versions; mt19937_64 itself is fully
/// specified by the standard.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed, 0x9e3779b97f4a7c15ULL)) {}

    /// Independent stream for one replicate: same (seed, stream) pair always
    /// yields the same draws regardless of scheduling order.
    static Rng for_stream(std::uint64_t seed, std::uint64_t stream) {
        return Rng(mix(seed, mix(stream, 0xbf58476d1ce4e5b9ULL)));
    }

    /// Uniform on [0, 1).
    double uniform();

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal (Box-Muller).
    double normal();

    /// Poisson with the given mean. Knuth's product method below 10,
    /// Hormann's PTRS transformed rejection above.
    long long poisson(double mean);

    bool bernoulli(double prob) { return uniform() < prob; }

  private:
    static std::uint64_t mix(std::uint64_t z, std::uint64_t salt);
    long long poisson_knuth(double mean);
    long long poisson_ptrs(double mean);

    std::mt19937_64 engine_;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace lori

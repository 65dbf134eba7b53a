#pragma once

#include <array>
#include <cstdint>

namespace hazeprior {

/// Counter-based random stream (Philox4x32-10). The (seed, sequence) pair
/// fully determines the draw sequence, independent of platform and standard
/// library. Distributions are implemented here rather than through <random>,
/// whose distribution algorithms are implementation-defined.
///
/// Not thread-safe; concurrent tasks derive child streams with child().
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t sequence = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t sequence() const { return sequence_; }

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer on the closed range [lo, hi], unbiased.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    /// Standard normal via Box-Muller; the spare deviate is cached.
    double normal();
    bool bernoulli(double p);

    /// Independent stream sharing this seed, keyed by (sequence, id).
    RngStream child(std::uint64_t id) const;

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t sequence_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to mix stream identifiers.
std::uint64_t mix64(std::uint64_t x);

}  // namespace hazeprior

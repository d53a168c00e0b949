#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace smcl {

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for the stream identified by (root seed, ids...). Distinct id tuples
/// give statistically independent mt19937_64 streams.
std::uint64_t stream_seed(std::uint64_t root, std::initializer_list<std::uint64_t> ids);

/// Seeded generator with platform-independent uniform/normal draws
/// (std::normal_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform on the open interval (0, 1), 53 random bits.
    double uniform();

    /// Standard normal via Box-Muller; no cached second variate.
    double normal();

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace smcl

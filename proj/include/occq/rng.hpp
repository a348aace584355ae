#pragma once

#include <cstdint>
#include <limits>

namespace occq {

/// Named random streams. Each consumer draws from its own stream so adding
/// draws in one place never shifts another.
enum class Stream : std::uint64_t {
    arrivals = 1,
    services = 2,
    cohort = 3,
    initial_count = 4,
    mcmc = 5,
    prediction = 6,
    synthesis = 7,
    fixture = 8,
};

/// Counter-based generator: output i is splitmix64(key + i * golden), where the key
/// hashes (seed, stream, substream). Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0)
        : key_(mix(seed ^ mix(static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL ^ mix(substream + 1)))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    std::uint64_t counter() const { return counter_; }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Poisson variate; mean 0 yields 0.
long long sample_poisson(CounterRng& rng, double mean);
double sample_normal(CounterRng& rng, double mean, double sd);

}  // namespace occq

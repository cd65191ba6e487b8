#pragma once

// Deterministic per-(seed, index) random streams.  Grid points and replicas
// each take their own stream so results do not depend on evaluation order.

#include <cstdint>
#include <random>

#include "polrouter/errors.hpp"

namespace polrouter {

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// Photon counts for a mean rate over an integration time.
inline std::int64_t poisson_counts(double rate, double duration, Rng& rng) {
    if (!(rate >= 0.0) || !(duration >= 0.0)) throw UsageError("rate and duration must be >= 0");
    const double mean = rate * duration;
    if (mean == 0.0) return 0;
    std::poisson_distribution<std::int64_t> d(mean);
    return d(rng);
}

}  // namespace polrouter

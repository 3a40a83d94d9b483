// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lorasim {

/// Named random streams. Every stochastic draw in a run comes from exactly one
/// of these, seeded from the run seed by stream_seed().
enum class Stream : std::uint64_t {
    kArrivals = 1,
    kAdapters = 2,
    kLengths = 3,
    kMonteCarlo = 16,
};

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for `stream` under run seed `seed`. Streams with distinct ids never share
/// a seed for the same run seed, and the derivation is platform independent.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept;
inline std::uint64_t stream_seed(std::uint64_t seed, Stream stream) noexcept {
    return stream_seed(seed, static_cast<std::uint64_t>(stream));
}

/// Portable generator: mt19937_64 output is fixed by the standard, and all
/// transforms below are written out here instead of using <random>
/// distributions, whose algorithms are implementation defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, Stream stream) : engine_(stream_seed(seed, stream)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Exponential with the given rate, by inversion.
    double exponential(double rate);

    /// Uniform integer on [0, n), unbiased (rejection on the top range).
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

/// Inverse-CDF sampler over a fixed discrete distribution.
class DiscreteSampler {
public:
    explicit DiscreteSampler(std::span<const double> weights);

    std::size_t operator()(Rng& rng) const;
    std::size_t size() const noexcept { return cumulative_.size(); }

private:
    std::vector<double> cumulative_;
};

}  // namespace lorasim

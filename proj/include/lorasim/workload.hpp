// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "lorasim/rng.hpp"

namespace lorasim::workload {

/// The N LoRA adapters served by a deployment. Adapter ids are indices into
/// `probs`, which is kept in canonical popularity order (non-increasing).
struct AdapterCatalog {
    std::vector<double> probs;
    std::uint64_t adapter_bytes = 0;  ///< GPU memory footprint of one adapter
    std::uint32_t layers = 1;
    std::uint32_t experts = 1;
    std::uint32_t rank = 1;

    std::size_t count() const noexcept { return probs.size(); }

    /// Throws ValidationError when any invariant is violated.
    void validate() const;

    static AdapterCatalog zipf(std::size_t n, double s, std::uint64_t adapter_bytes = 0, std::uint32_t layers = 1,
                               std::uint32_t experts = 1, std::uint32_t rank = 1);
};

struct Request {
    std::uint64_t id = 0;
    double arrival_time = 0.0;  ///< seconds
    std::uint32_t adapter_id = 0;
    std::uint32_t input_tokens = 0;
    std::uint32_t output_tokens = 1;

    friend bool operator==(const Request&, const Request&) = default;
};

struct WorkloadTrace {
    std::vector<Request> requests;  ///< sorted by (arrival_time, id)
    double duration = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const WorkloadTrace&, const WorkloadTrace&) = default;
};

/// Input/output length source for generated traces.
class LengthModel {
public:
    static LengthModel constant(std::uint32_t input_tokens, std::uint32_t output_tokens);
    /// Samples (input, output) pairs uniformly from an observed set.
    static LengthModel empirical(std::vector<std::pair<std::uint32_t, std::uint32_t>> samples);
    /// Builds an empirical model from the length columns of a trace CSV.
    static LengthModel from_trace(const std::filesystem::path& path);

    std::pair<std::uint32_t, std::uint32_t> sample(Rng& rng) const;

    bool is_constant() const noexcept { return std::holds_alternative<Constant>(impl_); }

private:
    struct Constant {
        std::uint32_t input_tokens;
        std::uint32_t output_tokens;
    };
    using Empirical = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

    explicit LengthModel(std::variant<Constant, Empirical> impl) : impl_(std::move(impl)) {}

    std::variant<Constant, Empirical> impl_;
};

/// p_i = i^-s / sum_j j^-s over 1-based ranks.
std::vector<double> zipf_probabilities(std::size_t n, double s);

/// Poisson arrivals on [0, duration) with i.i.d. adapter and length draws. Each
/// of the three draw kinds uses its own stream derived from `seed`.
WorkloadTrace generate_trace(double rate, double duration, std::span<const double> probs,
                             const LengthModel& lengths, std::uint64_t seed);

/// Reads the trace CSV (`request_id,arrival_time_s,adapter_id,input_tokens,output_tokens`).
/// When `adapter_count` is given, adapter ids at or beyond it are rejected.
WorkloadTrace load_trace(const std::filesystem::path& path, std::optional<std::size_t> adapter_count = std::nullopt);

/// Writes the trace CSV atomically. Arrival times use shortest round-trip formatting.
void write_trace(const WorkloadTrace& trace, const std::filesystem::path& path);

/// Greedy load balancing: adapters in descending probability go to the set with
/// the smallest mass so far, lowest set index on ties. Each set is sorted.
std::vector<std::vector<std::size_t>> partition_adapters_greedy(std::span<const double> probs, std::size_t sets);

}  // namespace lorasim::workload

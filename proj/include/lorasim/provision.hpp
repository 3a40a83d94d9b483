// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lorasim/piecewise.hpp"
#include "lorasim/workload.hpp"

namespace lorasim::provision {

// ---------------------------------------------------------------------------
// Cache sizing for the tail TTFT target
// ---------------------------------------------------------------------------

/// How the admission threshold is searched.
///  - kContinuous: tau is real; residency uses the incomplete-gamma extension of
///    the Poisson tail, so the capacity equation has an exact root.
///  - kInteger: tau restricted to integers; the smallest tau whose expected
///    resident count does not exceed M. Kept for comparison only.
enum class TauMode { kContinuous, kInteger };

/// Pr[Poisson(lambda) > tau]. Real tau uses P(tau + 1, lambda), which agrees
/// with the Poisson sum at integer tau and decreases monotonically in tau.
double poisson_tail(double lambda, double tau);

struct ThresholdSolution {
    double tau = 0.0;
    /// Even tau = 0 leaves fewer than M expected residents: the cache is larger
    /// than the active set and capacity does not bind.
    bool non_binding = false;
    double expected_residents = 0.0;  ///< sum_i poisson_tail(lambda_i, tau)
};

/// Finds tau with sum_i poisson_tail(lambda_i, tau) = capacity (abs. tol 1e-8) by bisection.
ThresholdSolution solve_threshold(std::span<const double> lambdas, double capacity,
                                  TauMode mode = TauMode::kContinuous);

/// Pr[sum_{j != i} Bernoulli(q_j) <= capacity - 1], by the per-adapter
/// Poisson-binomial dynamic program (dp updated high-to-low, truncated at
/// `capacity` entries since higher counts never feed lower ones).
double free_slot_prob(std::span<const double> q, std::size_t i, std::size_t capacity);

/// free_slot_prob for every i at once. Prefix and suffix Poisson-binomial
/// tables are convolved per adapter, O(N * capacity) overall; only products of
/// non-negative terms are formed, so no division by (1 - q_i) is needed.
std::vector<double> free_slot_probs(std::span<const double> q, std::size_t capacity);

struct IarSolution {
    std::size_t cache_size = 0;
    double tau_star = 0.0;
    bool non_binding = false;
    std::vector<double> residency;  ///< q_i
    std::vector<double> free_slot;  ///< P_free(i)
    double iar_value = 0.0;
};

struct IarOptions {
    TauMode tau_mode = TauMode::kContinuous;
    /// Use the per-adapter reference DP instead of the prefix/suffix tables.
    bool reference_dp = false;
};

/// Immediate Admissibility Rate for cache size M:
/// sum_i p_i [q_i + (1 - q_i) P_free(i)] with lambda_i = LB p_i.
IarSolution iar(std::span<const double> probs, double global_batch, std::size_t cache_size, const IarOptions& options = {});

/// Recomputes the IAR sum from stored residency and free-slot vectors.
double iar_from_parts(std::span<const double> probs, std::span<const double> residency, std::span<const double> free_slot);

struct CacheSizing {
    std::size_t min_cache_size = 0;
    bool attained = true;  ///< false when no M <= N reached alpha (numerical edge at alpha = 1)
    std::map<std::size_t, double> iar_curve;  ///< every probed M -> IAR(M)
    IarSolution at_min;                       ///< full solution at M*
};

/// Smallest M in 1..N with IAR(M) >= alpha, by ascending scan. `extra_probes`
/// are evaluated as well and added to the curve (e.g. capacities of interest).
CacheSizing min_cache_size(std::span<const double> probs, double global_batch, double alpha,
                           std::span<const std::size_t> extra_probes = {}, const IarOptions& options = {});

// ---------------------------------------------------------------------------
// Server sizing for the average TPOT target
// ---------------------------------------------------------------------------

/// Profiled stage latencies (seconds) as functions of per-instance batch size.
struct StageCurves {
    PiecewiseLinear recv;
    PiecewiseLinear comp;
    PiecewiseLinear send;
};

struct TpotLatencyModel {
    std::map<std::uint32_t, StageCurves> by_gpu_count;
    double slo_ffn = 0.0;    ///< seconds
    double slo_layer = 0.0;  ///< seconds
    std::uint32_t instances = 1;

    /// Throws ValidationError if a curve decreases anywhere.
    void validate() const;
};

enum class Binding { kNone, kMemory, kCompute, kFfnLatency, kLayerThroughput, kBoth };

std::string to_string(Binding b);

struct StageTimes {
    double recv = 0.0;
    double comp = 0.0;
    double send = 0.0;
    double sum() const { return recv + comp + send; }
    double max() const;
};

struct GpuCandidateResult {
    std::uint32_t gpus = 0;
    StageTimes stages;
    bool ffn_ok = false;
    bool layer_ok = false;
};

struct GpuSizing {
    bool feasible = false;
    std::uint32_t gpus = 0;
    Binding binding = Binding::kNone;  ///< violated constraint when infeasible
    std::vector<GpuCandidateResult> probes;
};

/// Smallest candidate m with recv + comp + send <= SLO_FFN and
/// max(recv, comp, send) * L <= SLO_Layer, each stage evaluated at batch B
/// under m's calibration. Throws CalibrationDomainError outside the profiled range.
GpuSizing min_server_gpus(const TpotLatencyModel& model, double batch, std::span<const std::uint32_t> candidates);

// ---------------------------------------------------------------------------
// Combined plan
// ---------------------------------------------------------------------------

struct ProvisionRequest {
    workload::AdapterCatalog catalog;
    std::uint32_t instances = 1;       ///< L
    std::uint32_t batch_per_instance = 1;  ///< B
    double alpha = 0.95;
    std::uint64_t gpu_lora_bytes = 0;  ///< memory per server GPU available to adapters
    TpotLatencyModel latency;
    std::vector<std::uint32_t> candidate_gpus;
    std::vector<std::size_t> probe_capacities;
    IarOptions iar_options;
};

struct ProvisioningPlan {
    CacheSizing cache;
    std::uint64_t memory_bytes = 0;        ///< M* * Mem_LoRA
    std::uint64_t adapters_per_gpu = 0;
    std::uint32_t memory_gpus = 0;
    GpuSizing compute;
    std::uint32_t total_gpus = 0;
    Binding binding = Binding::kNone;
    bool feasible = false;
};

/// Adapters that fit on one server GPU, floor(gpu_lora_bytes / adapter_bytes).
std::uint64_t adapters_per_gpu(std::uint64_t gpu_lora_bytes, std::uint64_t adapter_bytes);

/// GPUs needed to hold `cache_size` adapters, at least one.
std::uint32_t memory_gpus_for(std::size_t cache_size, std::uint64_t adapters_per_gpu);

ProvisioningPlan provision(const ProvisionRequest& request);

}  // namespace lorasim::provision

// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lorasim/metrics.hpp"
#include "lorasim/network.hpp"
#include "lorasim/parcost.hpp"
#include "lorasim/workload.hpp"

namespace lorasim::sim {

enum class Mode { kDisaggregated, kCoupled };
enum class Policy { kFcfs, kSjf };

/// What a scan of the waiting queue does at a request it cannot admit.
enum class AdmissionScan {
    kSkip,  ///< leave it queued and keep scanning
    kStop,  ///< leave it and everything behind it queued
};

std::string to_string(Mode m);
std::string to_string(Policy p);
std::string to_string(AdmissionScan s);

/// Base-model timing. Attention is affine in the per-instance batch; these
/// constants are configuration inputs, not measurements.
struct ModelSpec {
    std::uint32_t top_k = 2;
    std::uint32_t hidden = 4096;
    double attention_base = 60e-6;         ///< seconds per layer
    double attention_per_request = 0.5e-6;  ///< seconds per layer per batched request
    /// Coupled mode only: multiplier on the calibrated comp latency for LoRA
    /// computed inside the instance.
    double coupled_lora_scale = 1.0;

    double attention_time(std::size_t batch) const {
        return attention_base + attention_per_request * static_cast<double>(batch);
    }
};

struct ClusterSpec {
    std::uint32_t instances = 1;          ///< L
    std::uint32_t gpus_per_instance = 1;  ///< p
    std::uint32_t batch_cap = 1;          ///< B
    parcost::ParallelStrategy server = parcost::ParallelStrategy::hybrid(1, 1);
    NetworkParams net;
    double pcie_bandwidth = 50e9;          ///< bytes per second per server GPU
    std::uint32_t cache_capacity = 1;      ///< M, total adapters across the deployment

    std::uint32_t server_gpus() const { return server.gpus(); }
};

struct AblationFlags {
    bool prefetch = true;
    bool overlap = true;
    bool layerwise_loading = true;
    /// Start with the most popular adapters resident instead of an empty cache.
    bool preload = false;
};

struct SimScenario {
    workload::AdapterCatalog catalog;
    workload::WorkloadTrace trace;
    ModelSpec model;
    ClusterSpec cluster;
    parcost::CalibrationTable calibration;
    parcost::Extrapolation extrapolation = parcost::Extrapolation::kStrict;
    metrics::SloTargets slos;
    metrics::Window window;
    std::uint64_t seed = 0;
    Mode mode = Mode::kDisaggregated;
    Policy policy = Policy::kFcfs;
    AdmissionScan scan = AdmissionScan::kSkip;
    AblationFlags flags;
    /// Owning instance per adapter; empty means the greedy partition over the catalog.
    std::vector<std::uint32_t> instance_of_adapter;

    /// Throws ValidationError / ConfigError on inconsistent settings.
    void validate() const;

    /// Resolved adapter-to-instance map (greedy partition when unset).
    std::vector<std::uint32_t> routing() const;

    /// Private cache size of instance i in coupled mode: M split evenly, the
    /// remainder going to the lowest indices.
    std::uint32_t coupled_capacity(std::uint32_t instance) const;
};

/// Parses a scenario document. Relative paths resolve against `base_dir`.
/// Unknown keys are errors. `default_calibration` is used when the document
/// names no calibration file.
SimScenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                           const std::filesystem::path& default_calibration);

SimScenario load_scenario(const std::filesystem::path& path, const std::filesystem::path& default_calibration);

/// Calibration path from LORASIM_CALIBRATION, else the shipped table.
std::filesystem::path default_calibration_path();

}  // namespace lorasim::sim

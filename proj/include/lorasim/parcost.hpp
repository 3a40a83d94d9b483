// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lorasim/piecewise.hpp"

namespace lorasim::parcost {

/// Exact non-negative rational; always stored in lowest terms with den > 0.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1);

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }
    double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    friend bool operator==(const Rational&, const Rational&) = default;
    friend bool operator<(const Rational& a, const Rational& b);

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

std::ostream& operator<<(std::ostream& os, const Rational& r);
Rational max(const Rational& a, const Rational& b);

enum class StrategyKind { kDataParallel, kPipeline, kExpert, kHybrid };

/// LoRA server parallelism. For every kind the GPU count is ep_degree * pp_stages:
/// DP(m) and EP(m) are (m, 1), PP(m) is (1, m), EP_x-PP_y is (x, y).
struct ParallelStrategy {
    StrategyKind kind = StrategyKind::kHybrid;
    std::uint32_t ep_degree = 1;  ///< x
    std::uint32_t pp_stages = 1;  ///< y

    std::uint32_t gpus() const noexcept { return ep_degree * pp_stages; }

    static ParallelStrategy data_parallel(std::uint32_t m);
    static ParallelStrategy pipeline(std::uint32_t m);
    static ParallelStrategy expert(std::uint32_t m);
    static ParallelStrategy hybrid(std::uint32_t x, std::uint32_t y);

    /// "DP", "PP", "EP" (GPU count from `m`) or "EP<x>-PP<y>".
    static ParallelStrategy parse(std::string_view name, std::uint32_t m = 0);

    /// Calibration key: "DP<m>" for data parallel, "EP<x>-PP<y>" otherwise, so
    /// EP(8), PP(8) and their hybrid spellings share table rows.
    std::string key() const;
    std::string name() const;

    friend bool operator==(const ParallelStrategy&, const ParallelStrategy&) = default;
};

struct StrategyMetrics {
    Rational peer_volume;     ///< activations per client-server GPU pair per layer
    Rational peer_count;      ///< client GPUs talking to one server GPU
    Rational compute_volume;  ///< activations per server GPU per layer
    Rational sync_scope;      ///< server GPUs synchronised per step
};

/// Per-strategy communication and compute metrics for per-instance batch b,
/// top-k routing, p client GPUs and m server GPUs:
///
///   DP        b*k/(p*m)     m            b*k/m   m
///   PP        b*k/p         1            b*k     1
///   EP        b*k/max(p,m)  max(m/p,1)   b*k/m   m
///   EPx-PPy   b*k/max(p,x)  max(x/p,1)   b*k/x   x
StrategyMetrics strategy_metrics(const ParallelStrategy& strategy, std::int64_t b, std::int64_t k, std::int64_t p,
                                 std::int64_t m);

/// Total map from (adapter, layer, expert) to server GPU.
class Placement {
public:
    Placement(std::uint32_t adapters, std::uint32_t layers, std::uint32_t experts, std::uint32_t gpus);

    std::uint32_t gpu_of(std::uint32_t adapter, std::uint32_t layer, std::uint32_t expert) const;
    void assign(std::uint32_t adapter, std::uint32_t layer, std::uint32_t expert, std::uint32_t gpu);

    std::uint32_t adapters() const noexcept { return adapters_; }
    std::uint32_t layers() const noexcept { return layers_; }
    std::uint32_t experts() const noexcept { return experts_; }
    std::uint32_t gpus() const noexcept { return gpus_; }

    /// Number of units placed on each GPU.
    std::vector<std::uint64_t> load_per_gpu() const;

private:
    std::size_t index(std::uint32_t adapter, std::uint32_t layer, std::uint32_t expert) const;

    std::uint32_t adapters_;
    std::uint32_t layers_;
    std::uint32_t experts_;
    std::uint32_t gpus_;
    std::vector<std::uint32_t> gpu_;
};

/// Expert e of `experts` split contiguously over `groups`; the first
/// experts % groups groups take one extra expert.
std::uint32_t expert_group(std::uint32_t expert, std::uint32_t experts, std::uint32_t groups);

/// DP stripes adapters (a mod m); PP maps layer l to GPU (l mod m); EP splits
/// experts evenly; EPx-PPy sends layer l to stage (l mod y) and splits experts
/// across that stage's x GPUs (GPU = stage * x + group).
Placement place_adapters(const ParallelStrategy& strategy, std::uint32_t adapters, std::uint32_t layers,
                         std::uint32_t experts, std::uint32_t gpus);

// ---------------------------------------------------------------------------
// Calibrated stage latencies
// ---------------------------------------------------------------------------

enum class Stage { kRecv, kComp, kSend, kMoe };

std::string to_string(Stage s);

struct CalibrationPoint {
    double batch_tokens = 0.0;
    double recv_us = 0.0;
    double comp_us = 0.0;
    double send_us = 0.0;
    double moe_us = 0.0;
};

/// Rows of `strategy,m,batch_tokens,recv_us,comp_us,send_us,moe_us`, grouped by strategy key.
class CalibrationTable {
public:
    void add(const ParallelStrategy& strategy, const CalibrationPoint& point);

    /// Points for `strategy`, ascending in batch_tokens. Throws ConfigError when absent.
    const std::vector<CalibrationPoint>& points(const ParallelStrategy& strategy) const;
    bool contains(const ParallelStrategy& strategy) const;

    const std::map<std::string, std::vector<CalibrationPoint>>& entries() const noexcept { return entries_; }
    std::size_t size() const;

private:
    std::map<std::string, std::vector<CalibrationPoint>> entries_;
};

CalibrationTable load_calibration(const std::filesystem::path& path);
CalibrationTable parse_calibration(std::string_view csv, const std::string& source = "<calibration>");

/// Expected number of distinct adapters among `tokens` independent draws from
/// `probs`: sum_i 1 - (1 - p_i)^tokens.
double expected_distinct(std::span<const double> probs, double tokens);

enum class Extrapolation {
    kStrict,  ///< probing outside the calibrated range throws
    kLinear,  ///< comm stages continue linearly in tokens, comp linearly in distinct adapters
};

/// Stage latency model for one strategy. recv/send interpolate linearly in
/// tokens; comp interpolates linearly in the expected distinct-adapter count of
/// the batch, which makes it sub-linear in tokens under skewed popularity.
/// The base-model MoE column is interpolated in tokens like the comm stages.
class StageLatencyModel {
public:
    StageLatencyModel(const CalibrationTable& table, const ParallelStrategy& strategy, std::span<const double> probs,
                      Extrapolation extrapolation = Extrapolation::kStrict);

    /// Seconds for `stage` at `tokens` activations.
    double latency(Stage stage, double tokens) const;

    double distinct_adapters(double tokens) const { return expected_distinct(probs_, tokens); }
    const ParallelStrategy& strategy() const noexcept { return strategy_; }
    Extrapolation extrapolation() const noexcept { return extrapolation_; }
    /// True when the catalog is so small that calibrated batches all reach the
    /// same distinct-adapter count, so comp is interpolated in tokens instead.
    bool comp_by_tokens() const noexcept { return comp_by_tokens_; }

private:
    double eval(const PiecewiseLinear& curve, double x, Stage stage, double tokens) const;

    ParallelStrategy strategy_;
    std::vector<double> probs_;
    Extrapolation extrapolation_;
    PiecewiseLinear recv_;
    PiecewiseLinear send_;
    PiecewiseLinear comp_;  // keyed by expected distinct adapters, or tokens when those coincide
    bool comp_by_tokens_ = false;
    PiecewiseLinear moe_;
};

/// Convenience wrapper around StageLatencyModel for a single probe.
double stage_latency(const CalibrationTable& table, Stage stage, double tokens, const ParallelStrategy& strategy,
                     std::span<const double> probs, Extrapolation extrapolation = Extrapolation::kStrict);

}  // namespace lorasim::parcost

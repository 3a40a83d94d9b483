// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lorasim::metrics {

struct RequestRecord {
    std::uint64_t id = 0;
    std::uint32_t adapter_id = 0;
    std::uint32_t instance = 0;
    double arrival = 0.0;
    double admission = 0.0;
    double first_token = 0.0;
    double completion = 0.0;
    std::uint32_t output_tokens = 1;

    /// Throws ValidationError unless arrival <= admission <= first_token <= completion
    /// and output_tokens >= 1.
    void validate() const;
};

/// Queueing delay plus first decode token: first_token - arrival.
double ttft(const RequestRecord& r);

/// (completion - admission) / output_tokens. Throws ValidationError for zero tokens.
double tpot(const RequestRecord& r);

/// Nearest-rank percentile: the ceil(q/100 * n)-th smallest value (the minimum for q = 0).
double percentile(std::span<const double> values, double q);

struct SloTargets {
    double ttft = 0.25;  ///< seconds
    double tpot = 0.1;   ///< seconds
    double threshold = 0.9;
};

/// Fraction of adapters (among those with at least one record) whose share of
/// requests meeting both SLOs is strictly above `threshold`.
double slo_attainment(std::span<const RequestRecord> records, double ttft_slo, double tpot_slo,
                      double threshold = 0.9);

/// One sample of a step function: `value` holds from `time` until the next
/// sample of the same series.
struct SeriesPoint {
    double time = 0.0;
    std::uint32_t series = 0;  ///< instance index for batch sizes, 0 for global series
    double value = 0.0;
};

/// Time-weighted mean of series `series` over [start, end]. The value before
/// the first sample is 0.
double time_weighted_mean(std::span<const SeriesPoint> points, std::uint32_t series, double start, double end);

struct Window {
    double warmup = 0.1;    ///< fraction of the run duration skipped at the start
    double cooldown = 0.1;  ///< fraction skipped at the end

    void validate() const;
};

struct MetricsReport {
    double duration = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    std::size_t requests_total = 0;
    std::size_t requests_in_window = 0;  ///< arrivals within the window
    std::size_t completed_in_window = 0;
    double p95_ttft = 0.0;
    double avg_tpot = 0.0;
    double throughput = 0.0;  ///< completed requests per second within the window
    double attainment = 0.0;
    double mean_batch = 0.0;  ///< time-weighted, averaged over instances
    double mean_active_adapters = 0.0;
    std::uint32_t instances = 0;
    std::vector<SeriesPoint> batch_series;
    std::vector<SeriesPoint> active_adapter_series;
    std::vector<RequestRecord> per_request;
};

/// Aggregates records over the steady-state window [warmup*D, (1-cooldown)*D].
/// Latency metrics use requests arriving in the window; throughput counts
/// completions in it. Metrics over an empty set are reported as 0.
MetricsReport build_report(std::vector<RequestRecord> records, std::vector<SeriesPoint> batch_series,
                           std::vector<SeriesPoint> active_series, double duration, std::uint32_t instances,
                           const Window& window, const SloTargets& slos);

std::string summary_json(const MetricsReport& report, const SloTargets& slos);
std::string requests_csv(const MetricsReport& report);
std::string batch_series_csv(const MetricsReport& report);
std::string active_adapters_csv(const MetricsReport& report);

/// Writes summary.json, requests.csv, batch_series.csv and active_adapters.csv
/// into `dir` (created if missing), each atomically.
void write_report(const MetricsReport& report, const SloTargets& slos, const std::filesystem::path& dir);

/// "p95_ttft=... avg_tpot=... attainment=... throughput=..." for terminals.
std::string one_line_summary(const MetricsReport& report);

}  // namespace lorasim::metrics

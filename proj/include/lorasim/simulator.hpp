// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lorasim/metrics.hpp"
#include "lorasim/parcost.hpp"
#include "lorasim/scenario.hpp"

namespace lorasim::sim {

enum class EventKind { kArrival, kAdmissionCheck, kDecodeStepDone, kLayerLoadDone, kStageDone, kRequestDone };

std::string to_string(EventKind k);

/// Outcome of considering one queued request during an admission scan.
enum class Decision {
    kResident,  ///< adapter already cached: admitted
    kLoaded,    ///< free or evictable slot: admitted, adapter load issued
    kQueued,    ///< left waiting
};

std::string to_string(Decision d);

struct DecisionLogEntry {
    double time = 0.0;
    std::uint64_t request_id = 0;
    std::uint32_t instance = 0;
    Decision decision = Decision::kQueued;
    std::int64_t evicted = -1;  ///< adapter evicted to make room, -1 if none
};

/// One reservation of a server stage resource (disaggregated mode).
struct StageRecord {
    std::uint32_t instance = 0;
    std::uint32_t layer = 0;
    std::uint32_t projection = 0;
    parcost::Stage stage = parcost::Stage::kRecv;
    std::uint32_t tokens = 0;
    double start = 0.0;
    double end = 0.0;
};

struct IterationRecord {
    std::uint32_t instance = 0;
    std::uint32_t batch = 0;
    double start = 0.0;
    double end = 0.0;
};

struct SimOptions {
    bool record_decisions = false;
    bool record_stages = false;
    bool record_iterations = false;
    /// Re-check cache bounds after every event; throws std::logic_error on violation.
    bool check_invariants = false;
};

struct SimCounters {
    std::uint64_t events = 0;
    std::uint64_t iterations = 0;
    std::uint64_t adapter_loads = 0;
    std::uint64_t evictions = 0;
    std::uint64_t max_resident = 0;
};

struct SimResult {
    std::vector<metrics::RequestRecord> records;  ///< ordered by request id
    std::vector<metrics::SeriesPoint> batch_series;
    std::vector<metrics::SeriesPoint> active_adapter_series;
    std::vector<DecisionLogEntry> decisions;
    std::vector<StageRecord> stages;
    std::vector<IterationRecord> iterations;
    SimCounters counters;
    double end_time = 0.0;
};

/// Runs the scenario to completion. Throws CalibrationDomainError naming the
/// (stage, tokens) probe when strict calibration is exceeded.
SimResult simulate(const SimScenario& scenario, const SimOptions& options = {});

/// simulate() followed by metrics::build_report over the trace duration.
metrics::MetricsReport run(const SimScenario& scenario);

}  // namespace lorasim::sim

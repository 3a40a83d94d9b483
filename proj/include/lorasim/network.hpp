// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace lorasim::sim {

enum class CommMode { kPush, kPull };

std::string to_string(CommMode mode);
CommMode parse_comm_mode(std::string_view name);

/// One-sided client/server transfer parameters. All values in seconds except
/// link_bandwidth (bytes per second).
struct NetworkParams {
    double link_bandwidth = 50e9;
    double base_latency = 3e-6;
    double poll_detect = 1e-6;
    double broadcast = 2e-6;
    double sync_local = 71.76e-6;
    CommMode mode = CommMode::kPush;

    /// Throws ValidationError on negative values or zero bandwidth.
    void validate() const;
};

/// Latency of one activation hand-off between client and server.
///   push: base + payload/bw + poll_detect + broadcast
///   pull: sync_local + base (notify) + sync_local + 2*base (remote read) + payload/bw
/// `server_load` is stage queueing already accrued on the server and is added as is.
double lora_roundtrip(const NetworkParams& net, double payload_bytes, double server_load = 0.0);

/// lora_roundtrip(pull) - lora_roundtrip(push) for the same payload.
double pull_overhead(const NetworkParams& net, double payload_bytes);

}  // namespace lorasim::sim

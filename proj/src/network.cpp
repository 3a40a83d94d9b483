// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/network.hpp"

#include <stdexcept>

#include "lorasim/errors.hpp"

namespace lorasim::sim {

std::string to_string(CommMode mode) { return mode == CommMode::kPush ? "push" : "pull"; }

CommMode parse_comm_mode(std::string_view name) {
    if (name == "push") return CommMode::kPush;
    if (name == "pull") return CommMode::kPull;
    throw ValidationError("unknown communication mode '" + std::string(name) + "' (expected push or pull)");
}

void NetworkParams::validate() const {
    if (!(link_bandwidth > 0.0)) throw ValidationError("net.link_bandwidth must be positive");
    if (!(base_latency >= 0.0) || !(poll_detect >= 0.0) || !(broadcast >= 0.0) || !(sync_local >= 0.0))
        throw ValidationError("network latencies must be non-negative");
}

double lora_roundtrip(const NetworkParams& net, double payload_bytes, double server_load) {
    if (!(payload_bytes >= 0.0)) throw std::invalid_argument("payload must be non-negative");
    if (!(server_load >= 0.0)) throw std::invalid_argument("server load must be non-negative");
    const double transfer = payload_bytes / net.link_bandwidth;
    double t = 0.0;
    if (net.mode == CommMode::kPush) {
        t = net.base_latency + transfer + net.poll_detect + net.broadcast;
    } else {
        t = net.sync_local + net.base_latency + net.sync_local + 2.0 * net.base_latency + transfer;
    }
    return t + server_load;
}

double pull_overhead(const NetworkParams& net, double payload_bytes) {
    NetworkParams push = net;
    push.mode = CommMode::kPush;
    NetworkParams pull = net;
    pull.mode = CommMode::kPull;
    return lora_roundtrip(pull, payload_bytes) - lora_roundtrip(push, payload_bytes);
}

}  // namespace lorasim::sim

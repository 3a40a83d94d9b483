// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace lorasim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitInfeasible = 2;

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Sweep axes and the scenario field each one rewrites.
///   cache_capacity -> cluster.cache_capacity   cache_ratio  -> cluster.cache_ratio
///   request_rate   -> workload.rate            batch_cap    -> cluster.batch_cap
///   instance_count -> cluster.instances        strategy     -> cluster.server_strategy
/// With `scale_rate`, instance_count also scales workload.rate by n / base instances.
/// Throws ConfigError for unknown axes or mistyped values.
nlohmann::json apply_axis(const nlohmann::json& base, const std::string& axis, const nlohmann::json& value,
                          bool scale_rate);

}  // namespace lorasim::cli

// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include <json.hpp>

#include "lorasim/provision.hpp"

namespace lorasim::provision {

/// Reads a planning config: catalog, instance count, per-instance batch, alpha,
/// adapter memory per GPU, probe capacities and (optionally) server latency
/// candidates, either inline curves or derived from a calibration table.
/// Unknown keys are errors.
ProvisionRequest parse_plan_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                   const std::filesystem::path& default_calibration);

ProvisionRequest load_plan_config(const std::filesystem::path& path, const std::filesystem::path& default_calibration);

nlohmann::ordered_json plan_to_json(const ProvisioningPlan& plan, const ProvisionRequest& request);

}  // namespace lorasim::provision

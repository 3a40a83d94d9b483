// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/plan_io.hpp"

#include <cmath>

#include "lorasim/config_reader.hpp"
#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"
#include "lorasim/parcost.hpp"

namespace lorasim::provision {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

PiecewiseLinear read_curve(const nlohmann::json& v, const std::string& field) {
    if (!v.is_array() || v.empty()) throw ConfigError(field + ": expected a non-empty list of [batch, us] pairs");
    std::vector<std::pair<double, double>> pts;
    for (const auto& pair : v) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
            throw ConfigError(field + ": expected [batch, us] pairs");
        pts.emplace_back(pair[0].get<double>(), pair[1].get<double>() * 1e-6);
    }
    try {
        return PiecewiseLinear(std::move(pts));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(field + ": " + e.what());
    }
}

// Stage curves over integer per-instance batch sizes covered by the calibration.
StageCurves curves_from_calibration(const parcost::CalibrationTable& table, const parcost::ParallelStrategy& strategy,
                                    std::span<const double> probs, std::uint32_t top_k) {
    const auto& pts = table.points(strategy);
    const double lo = std::ceil(pts.front().batch_tokens / top_k);
    const double hi = std::floor(pts.back().batch_tokens / top_k);
    if (hi < lo) throw ConfigError("calibration for " + strategy.key() + " covers no whole batch size");
    parcost::StageLatencyModel model(table, strategy, probs);
    std::vector<std::pair<double, double>> recv, comp, send;
    for (double b = lo; b <= hi; b += 1.0) {
        const double tokens = b * top_k;
        recv.emplace_back(b, model.latency(parcost::Stage::kRecv, tokens));
        comp.emplace_back(b, model.latency(parcost::Stage::kComp, tokens));
        send.emplace_back(b, model.latency(parcost::Stage::kSend, tokens));
    }
    return {PiecewiseLinear(std::move(recv)), PiecewiseLinear(std::move(comp)), PiecewiseLinear(std::move(send))};
}

}  // namespace

ProvisionRequest parse_plan_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                   const std::filesystem::path& default_calibration) {
    io::ConfigReader root(doc, "");
    ProvisionRequest req;

    io::ConfigReader cat = root.object("catalog");
    const auto n = cat.u32("adapters", 0);
    if (n == 0) cat.fail("adapters", "required positive integer");
    const double s = cat.number("zipf_s", 1.2);
    if (!(s >= 0.0)) cat.fail("zipf_s", "must be non-negative");
    const auto bytes = cat.u64("adapter_bytes", 0);
    if (bytes == 0) cat.fail("adapter_bytes", "required positive integer");
    req.catalog = workload::AdapterCatalog::zipf(n, s, bytes, cat.u32("layers", 32), cat.u32("experts", 8),
                                                 cat.u32("rank", 64));
    cat.finish();

    req.instances = root.u32("instances", 0);
    if (req.instances == 0) root.fail("instances", "required positive integer");
    req.batch_per_instance = root.u32("batch_per_instance", 0);
    if (req.batch_per_instance == 0) root.fail("batch_per_instance", "required positive integer");
    req.alpha = root.number("alpha", 0.95);
    if (!(req.alpha > 0.0 && req.alpha <= 1.0)) root.fail("alpha", "must lie in (0, 1]");
    req.gpu_lora_bytes = root.u64("gpu_lora_bytes", 0);
    if (req.gpu_lora_bytes == 0) root.fail("gpu_lora_bytes", "required positive integer");
    if (root.has("probe_capacities")) {
        const auto& v = root.raw("probe_capacities");
        if (!v.is_array()) root.fail("probe_capacities", "expected a list of integers");
        for (const auto& m : v) {
            if (!m.is_number_unsigned() || m.get<std::uint64_t>() == 0)
                root.fail("probe_capacities", "expected positive integers");
            req.probe_capacities.push_back(m.get<std::size_t>());
        }
    }
    const std::string tau = root.str("tau_mode", "continuous");
    if (tau == "continuous") req.iar_options.tau_mode = TauMode::kContinuous;
    else if (tau == "integer") req.iar_options.tau_mode = TauMode::kInteger;
    else root.fail("tau_mode", "expected 'continuous' or 'integer'");

    if (root.has("server")) {
        io::ConfigReader srv = root.object("server");
        req.latency.instances = req.instances;
        req.latency.slo_ffn = srv.number("slo_ffn_us", 0.0) * 1e-6;
        req.latency.slo_layer = srv.number("slo_layer_us", 0.0) * 1e-6;
        if (!(req.latency.slo_ffn > 0.0)) srv.fail("slo_ffn_us", "required positive number");
        if (!(req.latency.slo_layer > 0.0)) srv.fail("slo_layer_us", "required positive number");
        const auto top_k = srv.u32("top_k", 2);
        if (top_k == 0) srv.fail("top_k", "must be >= 1");
        if (srv.has("curves")) {
            const auto& curves = srv.raw("curves");
            if (!curves.is_object()) srv.fail("curves", "expected an object keyed by GPU count");
            for (auto it = curves.begin(); it != curves.end(); ++it) {
                const auto gpus = io::parse_u64(it.key());
                if (!gpus || *gpus == 0) srv.fail("curves", "keys must be positive GPU counts");
                io::ConfigReader c(it.value(), srv.field("curves." + it.key()));
                StageCurves sc{read_curve(c.raw("recv"), c.field("recv")), read_curve(c.raw("comp"), c.field("comp")),
                               read_curve(c.raw("send"), c.field("send"))};
                c.finish();
                req.latency.by_gpu_count[static_cast<std::uint32_t>(*gpus)] = std::move(sc);
            }
        } else {
            std::filesystem::path calib = default_calibration;
            if (srv.has("calibration")) calib = resolve(base_dir, srv.str("calibration", ""));
            const parcost::CalibrationTable table = parcost::load_calibration(calib);
            if (!srv.has("candidates")) srv.fail("candidates", "required when no inline curves are given");
            const auto& cands = srv.raw("candidates");
            if (!cands.is_array()) srv.fail("candidates", "expected a list of {gpus, strategy}");
            for (std::size_t k = 0; k < cands.size(); ++k) {
                io::ConfigReader c(cands[k], srv.field("candidates[" + std::to_string(k) + "]"));
                const auto gpus = c.u32("gpus", 0);
                if (gpus == 0) c.fail("gpus", "required positive integer");
                parcost::ParallelStrategy strategy;
                try {
                    strategy = parcost::ParallelStrategy::parse(c.str("strategy", ""), gpus);
                } catch (const std::invalid_argument& e) {
                    c.fail("strategy", e.what());
                }
                c.finish();
                req.latency.by_gpu_count[gpus] = curves_from_calibration(table, strategy, req.catalog.probs, top_k);
            }
        }
        srv.finish();
        for (const auto& [gpus, curves] : req.latency.by_gpu_count) req.candidate_gpus.push_back(gpus);
    }
    root.finish();
    return req;
}

ProvisionRequest load_plan_config(const std::filesystem::path& path, const std::filesystem::path& default_calibration) {
    if (!std::filesystem::exists(path)) throw ConfigError("plan config not found: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return parse_plan_config(doc, path.parent_path(), default_calibration);
}

nlohmann::ordered_json plan_to_json(const ProvisioningPlan& plan, const ProvisionRequest& req) {
    nlohmann::ordered_json j;
    j["feasible"] = plan.feasible;
    j["binding"] = to_string(plan.binding);
    j["total_gpus"] = plan.total_gpus;

    nlohmann::ordered_json cache;
    cache["alpha"] = req.alpha;
    cache["global_batch"] = static_cast<double>(req.instances) * req.batch_per_instance;
    cache["min_cache_size"] = plan.cache.min_cache_size;
    cache["attained"] = plan.cache.attained;
    cache["tau_star"] = plan.cache.at_min.tau_star;
    cache["non_binding"] = plan.cache.at_min.non_binding;
    cache["iar_at_min"] = plan.cache.at_min.iar_value;
    nlohmann::ordered_json curve = nlohmann::ordered_json::array();
    for (const auto& [m, v] : plan.cache.iar_curve) curve.push_back({{"cache_size", m}, {"iar", v}});
    cache["iar_curve"] = std::move(curve);
    cache["residency"] = plan.cache.at_min.residency;
    j["cache"] = std::move(cache);

    j["memory"] = {{"bytes", plan.memory_bytes},
                   {"adapters_per_gpu", plan.adapters_per_gpu},
                   {"gpus", plan.memory_gpus}};

    nlohmann::ordered_json compute;
    compute["feasible"] = plan.compute.feasible;
    compute["gpus"] = plan.compute.gpus;
    compute["binding"] = to_string(plan.compute.binding);
    nlohmann::ordered_json probes = nlohmann::ordered_json::array();
    for (const GpuCandidateResult& p : plan.compute.probes) {
        probes.push_back({{"gpus", p.gpus},
                          {"recv_us", p.stages.recv * 1e6},
                          {"comp_us", p.stages.comp * 1e6},
                          {"send_us", p.stages.send * 1e6},
                          {"ffn_ok", p.ffn_ok},
                          {"layer_ok", p.layer_ok}});
    }
    compute["probes"] = std::move(probes);
    j["compute"] = std::move(compute);
    return j;
}

}  // namespace lorasim::provision

// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include "lorasim/config_reader.hpp"
#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"

namespace lorasim::sim {

std::string to_string(Mode m) { return m == Mode::kDisaggregated ? "disaggregated" : "coupled"; }
std::string to_string(Policy p) { return p == Policy::kFcfs ? "fcfs" : "sjf"; }
std::string to_string(AdmissionScan s) { return s == AdmissionScan::kSkip ? "skip" : "stop"; }

void SimScenario::validate() const {
    catalog.validate();
    if (cluster.instances == 0) throw ValidationError("cluster.instances must be >= 1");
    if (cluster.batch_cap == 0) throw ValidationError("cluster.batch_cap must be >= 1");
    if (cluster.cache_capacity == 0) throw ValidationError("cluster.cache_capacity must be >= 1");
    if (cluster.gpus_per_instance == 0) throw ValidationError("cluster.gpus_per_instance must be >= 1");
    if (!(cluster.pcie_bandwidth > 0.0)) throw ValidationError("cluster.pcie_bandwidth must be positive");
    cluster.net.validate();
    if (model.top_k == 0) throw ValidationError("model.top_k must be >= 1");
    if (!(model.attention_base >= 0.0) || !(model.attention_per_request >= 0.0))
        throw ValidationError("attention timing must be non-negative");
    if (!(model.coupled_lora_scale >= 0.0)) throw ValidationError("model.coupled_lora_scale must be non-negative");
    if (mode == Mode::kCoupled && cluster.cache_capacity < cluster.instances)
        throw ValidationError("coupled mode needs cache_capacity >= instances (one slot per instance)");
    if (!calibration.contains(cluster.server))
        throw ConfigError("no calibration entry for strategy " + cluster.server.key());
    window.validate();
    for (const workload::Request& r : trace.requests) {
        if (r.adapter_id >= catalog.count())
            throw ValidationError("request " + std::to_string(r.id) + " names adapter " + std::to_string(r.adapter_id) +
                                  " outside the catalog");
        if (r.output_tokens == 0) throw ValidationError("request " + std::to_string(r.id) + " has zero output tokens");
    }
    if (!instance_of_adapter.empty()) {
        if (instance_of_adapter.size() != catalog.count())
            throw ValidationError("instance_of_adapter must list every adapter");
        for (std::uint32_t i : instance_of_adapter)
            if (i >= cluster.instances) throw ValidationError("instance_of_adapter names an unknown instance");
    }
}

std::vector<std::uint32_t> SimScenario::routing() const {
    if (!instance_of_adapter.empty()) return instance_of_adapter;
    std::vector<std::uint32_t> out(catalog.count(), 0);
    const auto sets = workload::partition_adapters_greedy(catalog.probs, cluster.instances);
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t a : sets[i]) out[a] = static_cast<std::uint32_t>(i);
    return out;
}

std::uint32_t SimScenario::coupled_capacity(std::uint32_t instance) const {
    const std::uint32_t base = cluster.cache_capacity / cluster.instances;
    const std::uint32_t extra = cluster.cache_capacity % cluster.instances;
    return base + (instance < extra ? 1 : 0);
}

std::filesystem::path default_calibration_path() {
    if (const char* env = std::getenv("LORASIM_CALIBRATION"); env && *env) return env;
    return std::filesystem::path(LORASIM_DATA_DIR) / "calibration" / "server_8gpu.csv";
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

SimScenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                           const std::filesystem::path& default_calibration) {
    using io::ConfigReader;
    ConfigReader root(doc, "");
    SimScenario s;
    s.seed = root.u64("seed", 0);
    const std::string mode = root.str("mode", "disaggregated");
    if (mode == "disaggregated") s.mode = Mode::kDisaggregated;
    else if (mode == "coupled") s.mode = Mode::kCoupled;
    else root.fail("mode", "expected 'disaggregated' or 'coupled'");
    const std::string policy = root.str("policy", "fcfs");
    if (policy == "fcfs") s.policy = Policy::kFcfs;
    else if (policy == "sjf") s.policy = Policy::kSjf;
    else root.fail("policy", "expected 'fcfs' or 'sjf'");
    const std::string scan = root.str("admission_scan", "skip");
    if (scan == "skip") s.scan = AdmissionScan::kSkip;
    else if (scan == "stop") s.scan = AdmissionScan::kStop;
    else root.fail("admission_scan", "expected 'skip' or 'stop'");

    // model
    ConfigReader model = root.object("model");
    const auto layers = model.u32("layers", 32);
    const auto experts = model.u32("experts", 8);
    const auto rank = model.u32("rank", 64);
    const auto adapter_bytes = model.u64("adapter_bytes", 0);
    s.model.top_k = model.u32("top_k", 2);
    s.model.hidden = model.u32("hidden", 4096);
    s.model.attention_base = model.number("attention_base_us", 60.0) * 1e-6;
    s.model.attention_per_request = model.number("attention_per_request_us", 0.5) * 1e-6;
    s.model.coupled_lora_scale = model.number("coupled_lora_scale", 1.0);
    model.finish();

    // workload
    ConfigReader wl = root.object("workload");
    const auto n = wl.u32("adapters", 0);
    if (n == 0) wl.fail("adapters", "required positive integer");
    const double zipf_s = wl.number("zipf_s", 1.2);
    if (!(zipf_s >= 0.0)) wl.fail("zipf_s", "must be non-negative");
    s.catalog = workload::AdapterCatalog::zipf(n, zipf_s, adapter_bytes, layers, experts, rank);
    if (wl.has("trace")) {
        s.trace = workload::load_trace(resolve(base_dir, wl.str("trace", "")), n);
        if (wl.has("duration")) s.trace.duration = wl.number("duration", 0.0);
        s.trace.seed = s.seed;
        for (const char* k : {"rate", "input_tokens", "output_tokens", "length_trace"})
            if (wl.has(k)) wl.fail(k, "not allowed together with 'trace'");
    } else {
        const double rate = wl.number("rate", 0.0);
        const double duration = wl.number("duration", 0.0);
        if (!(rate > 0.0)) wl.fail("rate", "required positive number");
        if (!(duration >= 0.0)) wl.fail("duration", "must be non-negative");
        workload::LengthModel lengths = workload::LengthModel::constant(128, 128);
        if (wl.has("length_trace")) {
            lengths = workload::LengthModel::from_trace(resolve(base_dir, wl.str("length_trace", "")));
            if (wl.has("input_tokens") || wl.has("output_tokens"))
                wl.fail("length_trace", "not allowed together with constant lengths");
        } else {
            const auto in_tok = wl.u32("input_tokens", 128);
            const auto out_tok = wl.u32("output_tokens", 128);
            if (out_tok == 0) wl.fail("output_tokens", "must be >= 1");
            lengths = workload::LengthModel::constant(in_tok, out_tok);
        }
        s.trace = workload::generate_trace(rate, duration, s.catalog.probs, lengths, s.seed);
    }
    wl.finish();

    // cluster
    ConfigReader cl = root.object("cluster");
    s.cluster.instances = cl.u32("instances", 1);
    s.cluster.gpus_per_instance = cl.u32("gpus_per_instance", 2);
    s.cluster.batch_cap = cl.u32("batch_cap", 64);
    const auto server_gpus = cl.u32("server_gpus", 0);
    const std::string strategy = cl.str("server_strategy", "EP4-PP2");
    try {
        s.cluster.server = parcost::ParallelStrategy::parse(strategy, server_gpus);
    } catch (const std::invalid_argument& e) {
        cl.fail("server_strategy", e.what());
    }
    s.cluster.pcie_bandwidth = cl.number("pcie_bandwidth", 50e9);
    if (cl.has("cache_capacity") && cl.has("cache_ratio"))
        cl.fail("cache_ratio", "give either cache_capacity or cache_ratio");
    if (cl.has("cache_ratio")) {
        const double ratio = cl.number("cache_ratio", 0.0);
        if (!(ratio > 0.0 && ratio <= 1.0)) cl.fail("cache_ratio", "must lie in (0, 1]");
        s.cluster.cache_capacity =
            static_cast<std::uint32_t>(std::max<long long>(1, std::llround(ratio * static_cast<double>(n))));
    } else {
        s.cluster.cache_capacity = cl.u32("cache_capacity", n);
    }
    cl.finish();

    // network
    ConfigReader net = root.object("network");
    s.cluster.net.mode = parse_comm_mode(net.str("mode", "push"));
    s.cluster.net.link_bandwidth = net.number("link_bandwidth", s.cluster.net.link_bandwidth);
    s.cluster.net.base_latency = net.number("base_latency_us", s.cluster.net.base_latency * 1e6) * 1e-6;
    s.cluster.net.poll_detect = net.number("poll_detect_us", s.cluster.net.poll_detect * 1e6) * 1e-6;
    s.cluster.net.broadcast = net.number("broadcast_us", s.cluster.net.broadcast * 1e6) * 1e-6;
    s.cluster.net.sync_local = net.number("sync_local_us", s.cluster.net.sync_local * 1e6) * 1e-6;
    net.finish();

    // calibration: a path string or {path, extrapolate}
    std::filesystem::path calib = default_calibration;
    bool extrapolate = false;
    if (root.has("calibration") && root.raw("calibration").is_string()) {
        calib = resolve(base_dir, root.str("calibration", ""));
    } else {
        ConfigReader cal = root.object("calibration");
        if (cal.has("path")) calib = resolve(base_dir, cal.str("path", ""));
        extrapolate = cal.boolean("extrapolate", false);
        cal.finish();
    }
    s.calibration = parcost::load_calibration(calib);
    s.extrapolation = extrapolate ? parcost::Extrapolation::kLinear : parcost::Extrapolation::kStrict;

    ConfigReader slo = root.object("slos");
    s.slos.ttft = slo.number("ttft", 0.25);
    s.slos.tpot = slo.number("tpot", 0.1);
    s.slos.threshold = slo.number("attainment_threshold", 0.9);
    slo.finish();

    ConfigReader ab = root.object("ablation");
    s.flags.prefetch = ab.boolean("prefetch", true);
    s.flags.overlap = ab.boolean("overlap", true);
    s.flags.layerwise_loading = ab.boolean("layerwise_loading", true);
    s.flags.preload = ab.boolean("preload", false);
    ab.finish();

    ConfigReader win = root.object("metrics");
    s.window.warmup = win.number("warmup", 0.1);
    s.window.cooldown = win.number("cooldown", 0.1);
    win.finish();

    root.finish();
    try {
        s.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError(std::string("scenario: ") + e.what());
    }
    return s;
}

SimScenario load_scenario(const std::filesystem::path& path, const std::filesystem::path& default_calibration) {
    if (!std::filesystem::exists(path)) throw ConfigError("scenario file not found: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return parse_scenario(doc, path.parent_path(), default_calibration);
}

}  // namespace lorasim::sim

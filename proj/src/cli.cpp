// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lorasim/config_reader.hpp"
#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"
#include "lorasim/metrics.hpp"
#include "lorasim/parcost.hpp"
#include "lorasim/plan_io.hpp"
#include "lorasim/scenario.hpp"
#include "lorasim/simulator.hpp"
#include "lorasim/workload.hpp"

namespace lorasim::cli {

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string output;
    bool quiet = false;
};

nlohmann::json read_json(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("file not found: " + path.string());
    try {
        return nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
}

std::string axis_label(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return io::format_double(v.get<double>());
    return v.dump();
}

int cmd_plan(const std::string& config, const Globals& g, std::ostream& out, std::ostream& err) {
    const provision::ProvisionRequest req = provision::load_plan_config(config, sim::default_calibration_path());
    const provision::ProvisioningPlan plan = provision::provision(req);
    const std::string text = provision::plan_to_json(plan, req).dump(2) + "\n";
    if (g.output.empty())
        out << text;
    else
        io::write_file_atomic(g.output, text);
    if (!g.quiet && !g.output.empty()) {
        out << "M*=" << plan.cache.min_cache_size << " memory_gpus=" << plan.memory_gpus
            << " compute_gpus=" << plan.compute.gpus << " total_gpus=" << plan.total_gpus
            << " binding=" << provision::to_string(plan.binding) << "\n";
    }
    if (!plan.feasible) {
        err << "infeasible: binding constraint " << provision::to_string(plan.binding) << "\n";
        return kExitInfeasible;
    }
    return kExitOk;
}

sim::SimScenario scenario_from(nlohmann::json doc, const std::filesystem::path& path, const Globals& g,
                               const std::string& mode, const std::string& policy) {
    if (g.seed) doc["seed"] = *g.seed;
    if (!mode.empty()) doc["mode"] = mode;
    if (!policy.empty()) doc["policy"] = policy;
    return sim::parse_scenario(doc, path.parent_path(), sim::default_calibration_path());
}

int cmd_simulate(const std::string& path, const std::string& mode, const std::string& policy, const Globals& g,
                 std::ostream& out) {
    const sim::SimScenario s = scenario_from(read_json(path), path, g, mode, policy);
    const metrics::MetricsReport rep = sim::run(s);
    const std::filesystem::path dir = g.output.empty() ? std::filesystem::path("lorasim_out") : std::filesystem::path(g.output);
    metrics::write_report(rep, s.slos, dir);
    if (!g.quiet) out << metrics::one_line_summary(rep) << "\n";
    return kExitOk;
}

int cmd_sweep(const std::string& spec_path, const Globals& g, std::ostream& out) {
    const std::filesystem::path spec_file(spec_path);
    io::ConfigReader spec(read_json(spec_file), "");
    const std::filesystem::path base = [&] {
        std::filesystem::path p = spec.str("base", "");
        if (p.empty()) spec.fail("base", "required scenario path");
        return p.is_absolute() ? p : spec_file.parent_path() / p;
    }();
    const std::string axis = spec.str("axis", "");
    if (axis.empty()) spec.fail("axis", "required");
    if (!spec.has("values") || !spec.raw("values").is_array() || spec.raw("values").empty())
        spec.fail("values", "expected a non-empty list");
    const nlohmann::json values = spec.raw("values");
    const bool scale = spec.boolean("scale_rate_with_instances", false);
    std::filesystem::path dir = spec.str("output", "");
    if (!g.output.empty()) dir = g.output;
    if (dir.empty()) dir = "lorasim_sweep";
    else if (dir.is_relative() && g.output.empty()) dir = spec_file.parent_path() / dir;
    const auto threads = spec.u32("threads", 0);
    spec.finish();

    const nlohmann::json base_doc = read_json(base);
    // Validate every point before running any.
    std::vector<sim::SimScenario> points;
    for (const auto& v : values) {
        try {
            points.push_back(scenario_from(apply_axis(base_doc, axis, v, scale), base, g, "", ""));
        } catch (const std::exception& e) {
            throw ConfigError("sweep point " + axis + "=" + axis_label(v) + ": " + e.what());
        }
    }

    std::vector<metrics::MetricsReport> reports(points.size());
    std::vector<std::exception_ptr> errors(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < points.size(); k = next++) {
            try {
                reports[k] = sim::run(points[k]);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_threads = std::min<std::size_t>(threads ? threads : hw, points.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::ostringstream csv;
    csv << "axis_value,p95_ttft,avg_tpot,attainment,throughput\n";
    for (std::size_t k = 0; k < points.size(); ++k) {
        const std::string label = axis_label(values[k]);
        metrics::write_report(reports[k], points[k].slos, dir / ("point_" + std::to_string(k) + "_" + label));
        csv << label << ',' << io::format_double(reports[k].p95_ttft) << ',' << io::format_double(reports[k].avg_tpot)
            << ',' << io::format_double(reports[k].attainment) << ',' << io::format_double(reports[k].throughput)
            << '\n';
        if (!g.quiet) out << axis << '=' << label << ' ' << metrics::one_line_summary(reports[k]) << "\n";
    }
    io::write_file_atomic(dir / "sweep.csv", csv.str());
    return kExitOk;
}

struct TraceArgs {
    double rate = 0.0;
    double duration = 0.0;
    std::uint32_t adapters = 0;
    double zipf_s = 1.2;
    std::uint32_t input_tokens = 128;
    std::uint32_t output_tokens = 128;
    std::string length_trace;
};

int cmd_gen_trace(const TraceArgs& a, const Globals& g, std::ostream& out) {
    if (g.output.empty()) throw ConfigError("gen-trace: --output is required");
    if (!(a.rate > 0.0)) throw ConfigError("gen-trace: --rate must be positive");
    if (a.adapters == 0) throw ConfigError("gen-trace: --adapters must be positive");
    if (a.output_tokens == 0) throw ConfigError("gen-trace: --output-tokens must be positive");
    const auto probs = workload::zipf_probabilities(a.adapters, a.zipf_s);
    const workload::LengthModel lengths = a.length_trace.empty()
                                              ? workload::LengthModel::constant(a.input_tokens, a.output_tokens)
                                              : workload::LengthModel::from_trace(a.length_trace);
    const workload::WorkloadTrace trace = workload::generate_trace(a.rate, a.duration, probs, lengths, g.seed.value_or(0));
    workload::write_trace(trace, g.output);
    if (!g.quiet) out << "wrote " << trace.requests.size() << " requests to " << g.output << "\n";
    return kExitOk;
}

struct CostArgs {
    std::string strategy;
    std::int64_t b = 0;
    std::int64_t k = 2;
    std::int64_t p = 1;
    std::int64_t m = 0;
    std::uint32_t adapters = 0;
    std::uint32_t layers = 0;
    std::uint32_t experts = 0;
    double tokens = -1.0;
    double zipf_s = 1.2;
    std::string calibration;
    bool extrapolate = false;
};

std::string rational(const parcost::Rational& r) {
    std::ostringstream s;
    s << r;
    return s.str();
}

int cmd_cost_model(const CostArgs& a, const Globals& g, std::ostream& out) {
    if (a.m <= 0) throw ConfigError("cost-model: --m must be positive");
    parcost::ParallelStrategy strategy;
    try {
        strategy = parcost::ParallelStrategy::parse(a.strategy, static_cast<std::uint32_t>(a.m));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("cost-model: ") + e.what());
    }
    nlohmann::ordered_json j;
    j["strategy"] = strategy.key();
    if (a.b > 0) {
        const parcost::StrategyMetrics sm = parcost::strategy_metrics(strategy, a.b, a.k, a.p, a.m);
        j["peer_volume"] = rational(sm.peer_volume);
        j["peer_count"] = rational(sm.peer_count);
        j["compute_volume"] = rational(sm.compute_volume);
        j["sync_scope"] = rational(sm.sync_scope);
    }
    if (a.adapters > 0 && a.layers > 0 && a.experts > 0) {
        const parcost::Placement pl =
            parcost::place_adapters(strategy, a.adapters, a.layers, a.experts, static_cast<std::uint32_t>(a.m));
        j["placement_units_per_gpu"] = pl.load_per_gpu();
    }
    if (a.tokens >= 0.0) {
        if (a.adapters == 0) throw ConfigError("cost-model: --tokens needs --adapters for the popularity model");
        const std::filesystem::path calib = a.calibration.empty() ? sim::default_calibration_path()
                                                                  : std::filesystem::path(a.calibration);
        const auto table = parcost::load_calibration(calib);
        const auto probs = workload::zipf_probabilities(a.adapters, a.zipf_s);
        const parcost::StageLatencyModel model(table, strategy, probs,
                                               a.extrapolate ? parcost::Extrapolation::kLinear
                                                             : parcost::Extrapolation::kStrict);
        nlohmann::ordered_json st;
        for (parcost::Stage s : {parcost::Stage::kRecv, parcost::Stage::kComp, parcost::Stage::kSend, parcost::Stage::kMoe})
            st[parcost::to_string(s) + "_us"] = model.latency(s, a.tokens) * 1e6;
        st["distinct_adapters"] = model.distinct_adapters(a.tokens);
        j["stage_latency"] = std::move(st);
    }
    const std::string text = j.dump(2) + "\n";
    if (g.output.empty())
        out << text;
    else
        io::write_file_atomic(g.output, text);
    return kExitOk;
}

}  // namespace

nlohmann::json apply_axis(const nlohmann::json& base, const std::string& axis, const nlohmann::json& value,
                          bool scale_rate) {
    nlohmann::json doc = base;
    auto& cluster = doc["cluster"];
    auto& workload = doc["workload"];
    auto need_number = [&] {
        if (!value.is_number() || !(value.get<double>() > 0.0))
            throw ConfigError("axis " + axis + " expects positive numbers, got " + value.dump());
    };
    auto need_integer = [&] {
        if (!value.is_number_integer() || value.get<std::int64_t>() <= 0)
            throw ConfigError("axis " + axis + " expects positive integers, got " + value.dump());
    };
    if (axis == "cache_capacity") {
        need_integer();
        cluster.erase("cache_ratio");
        cluster["cache_capacity"] = value;
    } else if (axis == "cache_ratio") {
        need_number();
        cluster.erase("cache_capacity");
        cluster["cache_ratio"] = value;
    } else if (axis == "request_rate") {
        need_number();
        workload["rate"] = value;
    } else if (axis == "batch_cap") {
        need_integer();
        cluster["batch_cap"] = value;
    } else if (axis == "instance_count") {
        need_integer();
        if (scale_rate) {
            const double base_n = cluster.contains("instances") ? cluster["instances"].get<double>() : 1.0;
            if (!workload.contains("rate")) throw ConfigError("scale_rate_with_instances needs workload.rate");
            workload["rate"] = workload["rate"].get<double>() * value.get<double>() / base_n;
        }
        cluster["instances"] = value;
    } else if (axis == "strategy") {
        if (!value.is_string()) throw ConfigError("axis strategy expects strategy names, got " + value.dump());
        cluster["server_strategy"] = value;
    } else {
        throw ConfigError("unknown sweep axis '" + axis +
                          "' (expected cache_capacity, cache_ratio, request_rate, batch_cap, instance_count or strategy)");
    }
    return doc;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"lorasim: disaggregated multi-LoRA serving simulator and capacity planner", "lorasim"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides the scenario seed)");
    app.add_option("--output,-o", g.output, "Output file or directory");
    app.add_flag("--quiet,-q", g.quiet, "Suppress progress output");

    std::string plan_config;
    auto* plan = app.add_subcommand("plan", "Compute the minimum cache size and server GPU count");
    plan->add_option("config", plan_config, "Planning config (JSON)")->required();

    std::string scenario_path, mode, policy;
    auto* simulate = app.add_subcommand("simulate", "Run one scenario");
    simulate->add_option("scenario", scenario_path, "Scenario file (JSON)")->required();
    simulate->add_option("--mode", mode, "disaggregated | coupled")->check(CLI::IsMember({"disaggregated", "coupled"}));
    simulate->add_option("--policy", policy, "fcfs | sjf")->check(CLI::IsMember({"fcfs", "sjf"}));

    std::string sweep_spec;
    auto* sweep = app.add_subcommand("sweep", "Run a one-axis parameter sweep");
    sweep->add_option("spec", sweep_spec, "Sweep definition (JSON)")->required();

    TraceArgs ta;
    auto* gen = app.add_subcommand("gen-trace", "Generate a Poisson/Zipf request trace CSV");
    gen->add_option("--rate", ta.rate, "Requests per second")->required();
    gen->add_option("--duration", ta.duration, "Seconds")->required();
    gen->add_option("--adapters", ta.adapters, "Number of adapters")->required();
    gen->add_option("--zipf-s", ta.zipf_s, "Zipf exponent");
    gen->add_option("--input-tokens", ta.input_tokens, "Constant input length");
    gen->add_option("--output-tokens", ta.output_tokens, "Constant output length");
    gen->add_option("--length-trace", ta.length_trace, "Trace CSV to sample lengths from");

    CostArgs ca;
    auto* cost = app.add_subcommand("cost-model", "Print per-strategy cost metrics and stage latencies");
    cost->add_option("--strategy", ca.strategy, "DP | PP | EP | EP<x>-PP<y>")->required();
    cost->add_option("--m", ca.m, "Server GPUs")->required();
    cost->add_option("--b", ca.b, "Per-instance batch");
    cost->add_option("--k", ca.k, "Top-k experts per token");
    cost->add_option("--p", ca.p, "Client GPUs");
    cost->add_option("--adapters", ca.adapters, "Adapter count (placement, popularity)");
    cost->add_option("--layers", ca.layers, "Layers (placement)");
    cost->add_option("--experts", ca.experts, "Experts (placement)");
    cost->add_option("--tokens", ca.tokens, "Tokens per invocation for stage latencies");
    cost->add_option("--zipf-s", ca.zipf_s, "Zipf exponent of the popularity model");
    cost->add_option("--calibration", ca.calibration, "Calibration CSV");
    cost->add_flag("--extrapolate", ca.extrapolate, "Allow linear extrapolation beyond the calibration");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInputError;
    }
    if (seed_opt->count() > 0) g.seed = seed;

    try {
        if (plan->parsed()) return cmd_plan(plan_config, g, out, err);
        if (simulate->parsed()) return cmd_simulate(scenario_path, mode, policy, g, out);
        if (sweep->parsed()) return cmd_sweep(sweep_spec, g, out);
        if (gen->parsed()) return cmd_gen_trace(ta, g, out);
        if (cost->parsed()) return cmd_cost_model(ca, g, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}

}  // namespace lorasim::cli

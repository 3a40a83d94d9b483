// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lorasim/cli.hpp"
#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"
#include "lorasim/plan_io.hpp"
#include "lorasim/provision.hpp"
#include "scenario_builder.hpp"

using namespace lorasim;
using testing_support::data_dir;
using testing_support::temp_dir;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string scenario(const char* name) { return (data_dir() / "scenarios" / name).string(); }

/// Writes `doc` next to the shipped scenarios' calibration so relative paths resolve.
std::string write_json(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& doc) {
    const auto p = dir / name;
    io::write_file_atomic(p, doc.dump(2));
    return p.string();
}

nlohmann::json example_doc() {
    auto doc = nlohmann::json::parse(io::read_file(scenario("example.json")));
    doc["calibration"]["path"] = (data_dir() / "calibration" / "server_8gpu.csv").string();
    return doc;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(io::read_file(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        for (auto f : io::split(line, ',')) row.emplace_back(f);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("simulate writes all four artifacts and is byte-deterministic") {
        const auto dir = temp_dir("cli_sim");
        for (const char* sub : {"a", "b"}) {
            const auto r = run({"simulate", scenario("example.json"), "--output", (dir / sub).string()});
            REQUIRE(r.code == cli::kExitOk);
            CHECK(r.out.find("p95_ttft=") != std::string::npos);
        }
        for (const char* f : {"summary.json", "requests.csv", "batch_series.csv", "active_adapters.csv"}) {
            REQUIRE(std::filesystem::exists(dir / "a" / f));
            CHECK(io::read_file(dir / "a" / f) == io::read_file(dir / "b" / f));
        }
    }

    TEST_CASE("global flags may come before or after the subcommand") {
        const auto dir = temp_dir("cli_flags");
        CHECK(run({"--seed", "5", "-q", "simulate", scenario("example.json"), "-o", (dir / "x").string()}).code == 0);
        const auto r = run({"simulate", scenario("example.json"), "--seed", "5", "--quiet", "-o", (dir / "y").string()});
        CHECK(r.code == 0);
        CHECK(r.out.empty());
        CHECK(io::read_file(dir / "x" / "requests.csv") == io::read_file(dir / "y" / "requests.csv"));
        run({"simulate", scenario("example.json"), "--seed", "6", "-q", "-o", (dir / "z").string()});
        CHECK(io::read_file(dir / "x" / "requests.csv") != io::read_file(dir / "z" / "requests.csv"));
    }

    TEST_CASE("mode and policy overrides") {
        const auto dir = temp_dir("cli_modes");
        CHECK(run({"simulate", scenario("example.json"), "--mode", "coupled", "-q", "-o", (dir / "c").string()}).code == 0);
        CHECK(run({"simulate", scenario("example.json"), "--policy", "sjf", "-q", "-o", (dir / "s").string()}).code == 0);
        CHECK(std::filesystem::exists(dir / "c" / "summary.json"));
        CHECK(run({"simulate", scenario("example.json"), "--mode", "bogus"}).code == cli::kExitInputError);
    }

    TEST_CASE("input errors exit 1 and name the problem") {
        const auto dir = temp_dir("cli_errors");
        auto doc = example_doc();
        doc["cluster"]["cahce_capacity"] = 3;
        auto r = run({"simulate", write_json(dir, "typo.json", doc)});
        CHECK(r.code == cli::kExitInputError);
        CHECK(r.err.find("cahce_capacity") != std::string::npos);

        doc = example_doc();
        doc["calibration"]["path"] = "/nonexistent/table.csv";
        r = run({"simulate", write_json(dir, "nocal.json", doc)});
        CHECK(r.code == cli::kExitInputError);
        CHECK(r.err.find("/nonexistent/table.csv") != std::string::npos);

        doc = example_doc();
        doc["cluster"]["batch_cap"] = "many";
        r = run({"simulate", write_json(dir, "type.json", doc)});
        CHECK(r.code == cli::kExitInputError);
        CHECK(r.err.find("batch_cap") != std::string::npos);

        CHECK(run({"simulate", (dir / "missing.json").string()}).code == cli::kExitInputError);
        CHECK(run({}).code == cli::kExitInputError);
        CHECK(run({"frobnicate"}).code == cli::kExitInputError);
    }

    TEST_CASE("plan reproduces the provisioning module and lists the probed capacities") {
        const auto path = data_dir() / "plans" / "mixtral_512.json";
        const auto r = run({"plan", path.string()});
        REQUIRE(r.code == cli::kExitOk);
        const auto doc = nlohmann::json::parse(r.out);
        const auto req = provision::load_plan_config(path, data_dir() / "calibration" / "server_8gpu.csv");
        const auto plan = provision::provision(req);
        CHECK(doc["cache"]["min_cache_size"] == plan.cache.min_cache_size);
        CHECK(doc["total_gpus"] == plan.total_gpus);
        std::set<std::size_t> caps;
        for (const auto& pt : doc["cache"]["iar_curve"]) caps.insert(pt["cache_size"].get<std::size_t>());
        for (std::size_t m : {128u, 192u, 256u}) CHECK(caps.count(m) == 1);
    }

    TEST_CASE("plan with a tiny target needs one slot") {
        const auto dir = temp_dir("cli_plan");
        auto doc = nlohmann::json::parse(io::read_file(data_dir() / "plans" / "mixtral_512.json"));
        doc["alpha"] = 0.0001;
        doc["server"]["calibration"] = (data_dir() / "calibration" / "server_8gpu.csv").string();
        const auto r = run({"plan", write_json(dir, "tiny.json", doc), "-o", (dir / "plan.json").string()});
        REQUIRE(r.code == cli::kExitOk);
        CHECK(nlohmann::json::parse(io::read_file(dir / "plan.json"))["cache"]["min_cache_size"] == 1);
    }

    TEST_CASE("infeasible plan exits 2 naming the binding constraint") {
        const auto dir = temp_dir("cli_infeasible");
        auto doc = nlohmann::json::parse(io::read_file(data_dir() / "plans" / "mixtral_512.json"));
        doc["server"]["slo_ffn_us"] = 100;
        doc["server"]["calibration"] = (data_dir() / "calibration" / "server_8gpu.csv").string();
        const auto r = run({"plan", write_json(dir, "bad.json", doc)});
        CHECK(r.code == cli::kExitInfeasible);
        CHECK(r.err.find("ffn_latency") != std::string::npos);

        doc["server"]["calibration"] = "/nonexistent/cal.csv";
        const auto missing = run({"plan", write_json(dir, "missing.json", doc)});
        CHECK(missing.code == cli::kExitInputError);
        CHECK(missing.err.find("/nonexistent/cal.csv") != std::string::npos);
    }

    TEST_CASE("cache sweep writes per-point reports and a combined csv") {
        const auto dir = temp_dir("cli_sweep");
        auto base = example_doc();
        const auto base_path = write_json(dir, "base.json", base);
        nlohmann::json spec{{"base", base_path}, {"axis", "cache_capacity"}, {"values", {4, 8, 16, 32, 64}},
                            {"output", (dir / "out").string()}};
        const auto r = run({"sweep", write_json(dir, "sweep.json", spec), "-q"});
        REQUIRE(r.code == cli::kExitOk);
        const auto rows = read_csv(dir / "out" / "sweep.csv");
        REQUIRE(rows.size() == 6);
        CHECK(rows[0] == std::vector<std::string>{"axis_value", "p95_ttft", "avg_tpot", "attainment", "throughput"});
        double prev = 1e300;
        for (std::size_t k = 1; k < rows.size(); ++k) {
            const double p95 = *io::parse_double(rows[k][1]);
            CHECK(p95 <= prev);
            prev = p95;
        }
        CHECK(std::filesystem::exists(dir / "out" / "point_0_4" / "summary.json"));
    }

    TEST_CASE("single-value sweep matches simulate") {
        const auto dir = temp_dir("cli_single");
        const auto base_path = write_json(dir, "base.json", example_doc());
        nlohmann::json spec{{"base", base_path}, {"axis", "cache_capacity"}, {"values", {16}}};
        REQUIRE(run({"sweep", write_json(dir, "s.json", spec), "-q", "-o", (dir / "sw").string()}).code == 0);
        REQUIRE(run({"simulate", base_path, "-q", "-o", (dir / "sim").string()}).code == 0);
        for (const char* f : {"summary.json", "requests.csv", "batch_series.csv", "active_adapters.csv"})
            CHECK(io::read_file(dir / "sw" / "point_0_16" / f) == io::read_file(dir / "sim" / f));
    }

    TEST_CASE("a bad sweep point aborts before any point runs") {
        const auto dir = temp_dir("cli_badsweep");
        const auto base_path = write_json(dir, "base.json", example_doc());
        nlohmann::json spec{{"base", base_path}, {"axis", "batch_cap"}, {"values", {8, 0}},
                            {"output", (dir / "out").string()}};
        const auto r = run({"sweep", write_json(dir, "s.json", spec)});
        CHECK(r.code == cli::kExitInputError);
        CHECK_FALSE(std::filesystem::exists(dir / "out"));
        spec["axis"] = "colour";
        CHECK(run({"sweep", write_json(dir, "s2.json", spec)}).code == cli::kExitInputError);
    }

    TEST_CASE("instance sweep saturates the active-adapter count at the cache size") {
        const auto dir = temp_dir("cli_instances");
        const auto r = run({"sweep", scenario("sweep_instances.json"), "-q", "-o", (dir / "out").string()});
        REQUIRE(r.code == cli::kExitOk);
        double peak_largest = 0;
        for (const auto& row : read_csv(dir / "out" / "point_5_6" / "active_adapters.csv")) {
            if (row[0] == "time") continue;
            peak_largest = std::max(peak_largest, *io::parse_double(row[1]));
        }
        CHECK(peak_largest == 16.0);
    }

    TEST_CASE("apply_axis rewrites the documented fields") {
        const auto base = example_doc();
        CHECK(cli::apply_axis(base, "request_rate", 3.5, false)["workload"]["rate"] == 3.5);
        const auto ratio = cli::apply_axis(base, "cache_ratio", 0.25, false);
        CHECK(ratio["cluster"]["cache_ratio"] == 0.25);
        CHECK_FALSE(ratio["cluster"].contains("cache_capacity"));
        const auto scaled = cli::apply_axis(base, "instance_count", 4, true);
        CHECK(scaled["cluster"]["instances"] == 4);
        CHECK(scaled["workload"]["rate"].get<double>() == doctest::Approx(16.0));
        CHECK(cli::apply_axis(base, "strategy", "EP8-PP1", false)["cluster"]["server_strategy"] == "EP8-PP1");
        CHECK_THROWS_AS(cli::apply_axis(base, "batch_cap", 1.5, false), ConfigError);
        CHECK_THROWS_AS(cli::apply_axis(base, "strategy", 3, false), ConfigError);
    }

    TEST_CASE("gen-trace output loads back") {
        const auto dir = temp_dir("cli_trace");
        const auto path = dir / "t.csv";
        const auto r = run({"gen-trace", "--rate", "5", "--duration", "20", "--adapters", "10", "--seed", "3", "-o",
                            path.string()});
        REQUIRE(r.code == cli::kExitOk);
        const auto t = workload::load_trace(path, 10);
        CHECK_FALSE(t.requests.empty());
        CHECK(run({"gen-trace", "--rate", "5", "--duration", "20", "--adapters", "10"}).code == cli::kExitInputError);

        auto doc = example_doc();
        doc["workload"] = {{"adapters", 10}, {"trace", path.string()}, {"duration", 20.0}};
        CHECK(run({"simulate", write_json(dir, "traced.json", doc), "-q", "-o", (dir / "o").string()}).code == 0);
    }

    TEST_CASE("cost-model prints exact metrics and stage latencies") {
        auto r = run({"cost-model", "--strategy", "EP", "--m", "8", "--b", "256", "--k", "2", "--p", "2"});
        REQUIRE(r.code == cli::kExitOk);
        auto doc = nlohmann::json::parse(r.out);
        CHECK(doc["peer_volume"] == "64");
        CHECK(doc["peer_count"] == "4");
        CHECK(doc["sync_scope"] == "8");
        r = run({"cost-model", "--strategy", "EP4-PP2", "--m", "8", "--tokens", "256", "--adapters", "512"});
        REQUIRE(r.code == cli::kExitOk);
        doc = nlohmann::json::parse(r.out);
        CHECK(doc["stage_latency"]["recv_us"].get<double>() == doctest::Approx(145.0));
        CHECK(run({"cost-model", "--strategy", "EP4-PP2", "--m", "6"}).code == cli::kExitInputError);
        r = run({"cost-model", "--strategy", "EP4-PP2", "--m", "8", "--tokens", "2048", "--adapters", "512"});
        CHECK(r.code == cli::kExitInputError);
        CHECK(r.err.find("2048") != std::string::npos);
    }

    TEST_CASE("the installed binary reports exit codes") {
        const std::string bin = LORASIM_CLI_PATH;
        CHECK(std::system((bin + " cost-model --strategy EP --m 8 --b 4 > /dev/null").c_str()) == 0);
        const int bad = std::system((bin + " simulate /nonexistent.json 2> /dev/null").c_str());
        CHECK(WEXITSTATUS(bad) == cli::kExitInputError);
    }
}

// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"
#include "lorasim/metrics.hpp"
#include "lorasim/rng.hpp"
#include "scenario_builder.hpp"

using namespace lorasim;
using namespace lorasim::metrics;

namespace {

RequestRecord rec(std::uint32_t adapter, double arrival, double admission, double first, double done,
                  std::uint32_t tokens = 1) {
    RequestRecord r;
    r.adapter_id = adapter;
    r.arrival = arrival;
    r.admission = admission;
    r.first_token = first;
    r.completion = done;
    r.output_tokens = tokens;
    return r;
}

std::vector<RequestRecord> random_records(Rng& rng, std::size_t n) {
    std::vector<RequestRecord> out;
    for (std::size_t k = 0; k < n; ++k) {
        const double a = 10.0 * rng.uniform();
        const double ad = a + 0.3 * rng.uniform();
        const double ft = ad + 0.05 * rng.uniform();
        const auto tokens = static_cast<std::uint32_t>(1 + rng.below(20));
        const double done = ft + tokens * 0.12 * rng.uniform();
        auto r = rec(static_cast<std::uint32_t>(rng.below(6)), a, ad, ft, done, tokens);
        r.id = k;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("ttft and tpot definitions") {
        const auto r = rec(0, 0.0, 0.0, 0.30, 1.0, 10);
        CHECK(ttft(r) == doctest::Approx(0.30));
        CHECK(ttft(r) > SloTargets{}.ttft);
        CHECK(tpot(rec(0, 0.0, 0.0, 0.1, 1.0, 10)) == doctest::Approx(0.1));
        const auto single = rec(0, 1.0, 1.0, 1.07, 1.07, 1);
        CHECK(tpot(single) == doctest::Approx(0.07));
        CHECK(ttft(single) == doctest::Approx(0.07));
        auto bad = r;
        bad.output_tokens = 0;
        CHECK_THROWS_AS(tpot(bad), ValidationError);
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        CHECK_THROWS_AS(rec(0, 2.0, 1.0, 3.0, 4.0).validate(), ValidationError);
    }

    TEST_CASE("ttft and tpot are translation invariant") {
        Rng rng(1);
        for (const auto& r : random_records(rng, 200)) {
            auto s = r;
            const double c = 1000.0 * rng.uniform();
            s.arrival += c;
            s.admission += c;
            s.first_token += c;
            s.completion += c;
            CHECK(ttft(s) == doctest::Approx(ttft(r)).epsilon(1e-9));
            CHECK(tpot(s) == doctest::Approx(tpot(r)).epsilon(1e-9));
        }
    }

    TEST_CASE("nearest-rank percentile") {
        CHECK(percentile(std::vector<double>{1, 2, 3, 4, 5}, 100) == 5);
        std::vector<double> hundred(100);
        for (int k = 0; k < 100; ++k) hundred[k] = k + 1;
        CHECK(percentile(hundred, 95) == 95);
        CHECK(percentile(std::vector<double>{7.5}, 0) == 7.5);
        CHECK(percentile(std::vector<double>{7.5}, 63) == 7.5);
        CHECK(percentile(std::vector<double>{3, 1, 2}, 0) == 1);
        CHECK_THROWS_AS(percentile(std::vector<double>{}, 50), std::invalid_argument);
        CHECK_THROWS_AS(percentile(std::vector<double>{1}, 101), std::invalid_argument);
    }

    TEST_CASE("percentile is monotone in q and returns an input element") {
        Rng rng(2);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> v(1 + rng.below(40));
            for (double& x : v) x = rng.uniform();
            double prev = -1.0;
            for (double q = 0; q <= 100; q += 2.5) {
                const double p = percentile(v, q);
                CHECK(std::find(v.begin(), v.end(), p) != v.end());
                CHECK(p >= prev);
                prev = p;
            }
        }
    }

    TEST_CASE("slo attainment boundary semantics") {
        std::vector<RequestRecord> rs;
        for (int k = 0; k < 10; ++k) rs.push_back(rec(0, 0.0, 0.0, k < 9 ? 0.1 : 0.5, k < 9 ? 0.1 : 0.5));
        CHECK(slo_attainment(rs, 0.25, 0.1) == 0.0);
        rs.push_back(rec(0, 0.0, 0.0, 0.1, 0.1));
        CHECK(slo_attainment(rs, 0.25, 0.1) == 1.0);  // 10 of 11 > 0.9
        rs.push_back(rec(3, 0.0, 0.0, 0.1, 0.1));
        CHECK(slo_attainment(rs, 0.25, 0.1) == 1.0);  // adapters 1 and 2 have no requests
        rs.push_back(rec(4, 0.0, 0.0, 1.0, 2.0));
        CHECK(slo_attainment(rs, 0.25, 0.1) == doctest::Approx(2.0 / 3.0));
    }

    TEST_CASE("slo attainment is monotone in the targets") {
        Rng rng(3);
        const auto rs = random_records(rng, 400);
        for (double t = 0.01; t < 0.5; t += 0.03) {
            for (double p = 0.01; p < 0.15; p += 0.01) {
                const double base = slo_attainment(rs, t, p);
                CHECK(base >= 0.0);
                CHECK(base <= 1.0);
                CHECK(slo_attainment(rs, t + 0.03, p) >= base);
                CHECK(slo_attainment(rs, t, p + 0.01) >= base);
            }
        }
    }

    TEST_CASE("time-weighted mean of a step function") {
        const std::vector<SeriesPoint> pts{{0.0, 0, 2.0}, {1.0, 0, 4.0}, {3.0, 0, 0.0}, {0.5, 1, 100.0}};
        CHECK(time_weighted_mean(pts, 0, 0.0, 4.0) == doctest::Approx((2.0 + 8.0) / 4.0));
        CHECK(time_weighted_mean(pts, 0, 0.5, 2.0) == doctest::Approx((1.0 + 4.0) / 1.5));
        CHECK(time_weighted_mean(pts, 2, 0.0, 4.0) == 0.0);
    }

    TEST_CASE("report windows, throughput and empty inputs") {
        std::vector<RequestRecord> rs;
        for (int k = 0; k < 100; ++k) {
            auto r = rec(static_cast<std::uint32_t>(k % 3), k * 1.0, k * 1.0, k + 0.05, k + 0.5, 5);
            r.id = static_cast<std::uint64_t>(k);
            rs.push_back(r);
        }
        const std::vector<SeriesPoint> batch{{0.0, 0, 3.0}, {0.0, 1, 1.0}};
        const auto rep = build_report(rs, batch, {}, 100.0, 2, Window{}, SloTargets{});
        CHECK(rep.window_start == doctest::Approx(10.0));
        CHECK(rep.window_end == doctest::Approx(90.0));
        CHECK(rep.requests_in_window == 81);  // arrivals 10..90, both ends inclusive
        CHECK(std::abs(rep.throughput * (rep.window_end - rep.window_start) -
                       static_cast<double>(rep.completed_in_window)) <= 1.0);
        CHECK(rep.p95_ttft == doctest::Approx(0.05));
        CHECK(rep.avg_tpot == doctest::Approx(0.1));
        CHECK(rep.mean_batch == doctest::Approx(2.0));
        CHECK(rep.attainment == 1.0);

        const auto empty = build_report({}, {}, {}, 0.0, 1, Window{}, SloTargets{});
        CHECK(empty.requests_total == 0);
        CHECK(empty.batch_series.empty());
        const auto doc = nlohmann::json::parse(summary_json(empty, SloTargets{}));
        CHECK(doc["p95_ttft_s"].is_null());
        CHECK_THROWS_AS(build_report({}, {}, {}, 1.0, 1, Window{0.6, 0.5}, SloTargets{}), ValidationError);
    }

    TEST_CASE("report files have the documented layout") {
        Rng rng(4);
        auto rs = random_records(rng, 30);
        const std::vector<SeriesPoint> batch{{0.0, 0, 1.0}, {2.0, 0, 2.0}};
        const std::vector<SeriesPoint> active{{0.0, 0, 1.0}, {3.0, 0, 2.0}};
        const auto rep = build_report(rs, batch, active, 10.0, 1, Window{0.0, 0.0}, SloTargets{});
        const auto dir = testing_support::temp_dir("report");
        write_report(rep, SloTargets{}, dir);
        for (const char* f : {"summary.json", "requests.csv", "batch_series.csv", "active_adapters.csv"})
            CHECK(std::filesystem::exists(dir / f));
        const std::string req = io::read_file(dir / "requests.csv");
        CHECK(req.rfind("request_id,adapter_id,arrival,admission,first_token,completion,output_tokens,ttft,tpot\n", 0) == 0);
        CHECK(std::count(req.begin(), req.end(), '\n') == 31);
        CHECK(io::read_file(dir / "batch_series.csv") == "time,instance,batch_size\n0,0,1\n2,0,2\n");
        CHECK(io::read_file(dir / "active_adapters.csv") == "time,active_adapters\n0,1\n3,2\n");
        const auto doc = nlohmann::json::parse(io::read_file(dir / "summary.json"));
        for (const char* k : {"p95_ttft_s", "avg_tpot_s", "throughput_rps", "attainment", "mean_batch"})
            CHECK(doc.contains(k));
        CHECK(one_line_summary(rep).find("p95_ttft=") == 0);
    }
}

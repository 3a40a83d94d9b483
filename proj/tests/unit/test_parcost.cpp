// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lorasim/errors.hpp"
#include "lorasim/parcost.hpp"
#include "lorasim/workload.hpp"
#include "oracles.hpp"
#include "scenario_builder.hpp"

using namespace lorasim;
using namespace lorasim::parcost;

namespace {

bool same(const Rational& r, oracle::Frac f) { return r.num() == f.num && r.den() == f.den; }

bool same(const StrategyMetrics& a, const StrategyMetrics& b) {
    return a.peer_volume == b.peer_volume && a.peer_count == b.peer_count && a.compute_volume == b.compute_volume &&
           a.sync_scope == b.sync_scope;
}

}  // namespace

TEST_SUITE("parcost") {
    TEST_CASE("rationals reduce and compare exactly") {
        CHECK(Rational(6, 4) == Rational(3, 2));
        CHECK(Rational(6, 4).den() == 2);
        CHECK(Rational(0, 5) == Rational(0));
        CHECK(Rational(1, 3) < Rational(1, 2));
        CHECK(Rational(2, 3) * Rational(3, 4) == Rational(1, 2));
        CHECK(Rational(2, 3) / Rational(4, 3) == Rational(1, 2));
        CHECK(max(Rational(5, 2), Rational(2)) == Rational(5, 2));
        CHECK_THROWS_AS(Rational(1, 0), std::invalid_argument);
    }

    TEST_CASE("strategy parsing and keys") {
        CHECK(ParallelStrategy::parse("EP4-PP2", 8) == ParallelStrategy::hybrid(4, 2));
        CHECK(ParallelStrategy::parse("EP4-PP2") == ParallelStrategy::hybrid(4, 2));
        CHECK(ParallelStrategy::parse("DP", 8) == ParallelStrategy::data_parallel(8));
        CHECK(ParallelStrategy::parse("PP", 8).pp_stages == 8);
        CHECK(ParallelStrategy::parse("EP", 8).ep_degree == 8);
        CHECK(ParallelStrategy::expert(8).key() == "EP8-PP1");
        CHECK(ParallelStrategy::pipeline(8).key() == "EP1-PP8");
        CHECK(ParallelStrategy::data_parallel(4).key() == "DP4");
        CHECK_THROWS_AS(ParallelStrategy::parse("EP4-PP2", 6), std::invalid_argument);
        CHECK_THROWS_AS(ParallelStrategy::parse("XX", 8), std::invalid_argument);
        CHECK_THROWS_AS(ParallelStrategy::parse("EP", 0), std::invalid_argument);
    }

    TEST_CASE("strategy metrics examples") {
        const auto ep = strategy_metrics(ParallelStrategy::expert(8), 256, 2, 2, 8);
        CHECK(ep.peer_volume == Rational(64));
        CHECK(ep.peer_count == Rational(4));
        CHECK(ep.compute_volume == Rational(64));
        CHECK(ep.sync_scope == Rational(8));
        const auto pp = strategy_metrics(ParallelStrategy::pipeline(4), 128, 2, 2, 4);
        CHECK(pp.peer_volume == Rational(128));
        CHECK(pp.peer_count == Rational(1));
        CHECK(pp.compute_volume == Rational(256));
        CHECK(pp.sync_scope == Rational(1));
        CHECK_THROWS_AS(strategy_metrics(ParallelStrategy::hybrid(4, 2), 1, 1, 1, 6), std::invalid_argument);
    }

    TEST_CASE("strategy metrics against hand-written formulas over a grid") {
        for (std::int64_t b : {1, 3, 64, 128, 256}) {
            for (std::int64_t k : {1, 2}) {
                for (std::int64_t p : {1, 2, 4, 8}) {
                    for (std::int64_t m : {1, 2, 4, 8, 16}) {
                        const auto dp = strategy_metrics(ParallelStrategy::data_parallel(m), b, k, p, m);
                        CHECK(same(dp.peer_volume, oracle::frac(b * k, p * m)));
                        CHECK(same(dp.peer_count, oracle::frac(m, 1)));
                        CHECK(same(dp.compute_volume, oracle::frac(b * k, m)));
                        CHECK(same(dp.sync_scope, oracle::frac(m, 1)));
                        const auto ep = strategy_metrics(ParallelStrategy::expert(m), b, k, p, m);
                        CHECK(same(ep.peer_volume, oracle::frac(b * k, std::max(p, m))));
                        CHECK(same(ep.peer_count, m >= p ? oracle::frac(m, p) : oracle::frac(1, 1)));
                        for (std::int64_t x = 1; x <= m; ++x) {
                            if (m % x) continue;
                            const auto hy = strategy_metrics(ParallelStrategy::hybrid(static_cast<std::uint32_t>(x),
                                                                                       static_cast<std::uint32_t>(m / x)),
                                                             b, k, p, m);
                            CHECK(same(hy.peer_volume, oracle::frac(b * k, std::max(p, x))));
                            CHECK(same(hy.peer_count, x >= p ? oracle::frac(x, p) : oracle::frac(1, 1)));
                            CHECK(same(hy.compute_volume, oracle::frac(b * k, x)));
                            CHECK(same(hy.sync_scope, oracle::frac(x, 1)));
                            // Total work over the sync scope is b*k.
                            CHECK(hy.compute_volume * hy.sync_scope == Rational(b * k));
                            CHECK(Rational(0) < hy.peer_volume);
                            CHECK(!(Rational(m) < hy.sync_scope));
                        }
                        // Hybrid degenerate cases reproduce the EP row and the PP compute/sync columns.
                        CHECK(same(strategy_metrics(ParallelStrategy::hybrid(static_cast<std::uint32_t>(m), 1), b, k, p, m), ep));
                        const auto pp = strategy_metrics(ParallelStrategy::pipeline(static_cast<std::uint32_t>(m)), b, k, p, m);
                        const auto h1 = strategy_metrics(ParallelStrategy::hybrid(1, static_cast<std::uint32_t>(m)), b, k, p, m);
                        CHECK(pp.compute_volume == h1.compute_volume);
                        CHECK(pp.sync_scope == h1.sync_scope);
                        CHECK(dp.compute_volume * dp.sync_scope == Rational(b * k));
                        CHECK(pp.compute_volume * pp.sync_scope == Rational(b * k));
                    }
                }
            }
        }
    }

    TEST_CASE("interleaved hybrid placement") {
        const auto pl = place_adapters(ParallelStrategy::hybrid(2, 2), 3, 4, 4, 4);
        for (std::uint32_t a = 0; a < 3; ++a) {
            for (std::uint32_t e = 0; e < 4; ++e) {
                // Layers 0 and 2 live on GPUs {0, 1}; layers 1 and 3 on GPUs {2, 3}.
                CHECK(pl.gpu_of(a, 0, e) <= 1);
                CHECK(pl.gpu_of(a, 2, e) <= 1);
                CHECK(pl.gpu_of(a, 1, e) >= 2);
                CHECK(pl.gpu_of(a, 3, e) >= 2);
                CHECK(pl.gpu_of(a, 0, e) == (e < 2 ? 0u : 1u));
            }
        }
    }

    TEST_CASE("placement examples") {
        const auto pp = place_adapters(ParallelStrategy::pipeline(1), 5, 3, 4, 1);
        const auto load = pp.load_per_gpu();
        REQUIRE(load.size() == 1);
        CHECK(load[0] == 60);
        const auto ep = place_adapters(ParallelStrategy::expert(4), 2, 1, 8, 4);
        for (std::uint32_t e = 0; e < 8; ++e) CHECK(ep.gpu_of(1, 0, e) == e / 2);
        const auto dp = place_adapters(ParallelStrategy::data_parallel(3), 7, 2, 2, 3);
        for (std::uint32_t a = 0; a < 7; ++a) CHECK(dp.gpu_of(a, 1, 1) == a % 3);
        const auto ppm = place_adapters(ParallelStrategy::pipeline(4), 2, 8, 2, 4);
        for (std::uint32_t l = 0; l < 8; ++l) CHECK(ppm.gpu_of(0, l, 0) == l % 4);
    }

    TEST_CASE("uneven expert split gives the lowest groups the extras") {
        CHECK(expert_group(0, 7, 3) == 0);
        CHECK(expert_group(2, 7, 3) == 0);
        CHECK(expert_group(3, 7, 3) == 1);
        CHECK(expert_group(4, 7, 3) == 1);
        CHECK(expert_group(5, 7, 3) == 2);
        CHECK(expert_group(6, 7, 3) == 2);
        const auto pl = place_adapters(ParallelStrategy::expert(3), 1, 1, 7, 3);
        const auto load = pl.load_per_gpu();
        CHECK(*std::max_element(load.begin(), load.end()) - *std::min_element(load.begin(), load.end()) <= 1);
    }

    TEST_CASE("placement is total and partitions the triple space") {
        const std::vector<ParallelStrategy> strategies{
            ParallelStrategy::data_parallel(4), ParallelStrategy::pipeline(4), ParallelStrategy::expert(4),
            ParallelStrategy::hybrid(2, 2), ParallelStrategy::hybrid(4, 2), ParallelStrategy::hybrid(1, 8)};
        for (const auto& s : strategies) {
            const auto pl = place_adapters(s, 5, 6, 8, s.gpus());
            std::uint64_t total = 0;
            for (std::uint64_t c : pl.load_per_gpu()) total += c;
            CHECK(total == 5ULL * 6 * 8);
            for (std::uint32_t a = 0; a < 5; ++a)
                for (std::uint32_t l = 0; l < 6; ++l)
                    for (std::uint32_t e = 0; e < 8; ++e) CHECK(pl.gpu_of(a, l, e) < s.gpus());
        }
    }

    TEST_CASE("calibration parsing") {
        const std::string csv =
            "# comment\nstrategy,m,batch_tokens,recv_us,comp_us,send_us,moe_us\n"
            "EP4-PP2,8,512,246,204,396,763\nEP4-PP2,8,256,145,142,207,492\n";
        const auto t = parse_calibration(csv);
        CHECK(t.size() == 2);
        const auto& pts = t.points(ParallelStrategy::hybrid(4, 2));
        REQUIRE(pts.size() == 2);
        CHECK(pts[0].batch_tokens == 256.0);
        CHECK_THROWS_AS(t.points(ParallelStrategy::expert(8)), ConfigError);
        try {
            parse_calibration("strategy,m,batch_tokens,recv_us,comp_us,send_us,moe_us\nEP4-PP2,8,256,x,1,1,1\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
        CHECK_THROWS_AS(parse_calibration("wrong,header\n"), ParseError);
        CHECK_THROWS_AS(parse_calibration("strategy,m,batch_tokens,recv_us,comp_us,send_us,moe_us\n"
                                          "EP4-PP2,8,256,1,1,1,1\nEP4-PP2,8,256,1,1,1,1\n"),
                        ParseError);
        CHECK_THROWS_AS(parse_calibration("strategy,m,batch_tokens,recv_us,comp_us,send_us,moe_us\n"
                                          "EP4-PP2,6,256,1,1,1,1\n"),
                        ParseError);
        CHECK_THROWS_AS(load_calibration("/nonexistent/calibration.csv"), ConfigError);
    }

    TEST_CASE("shipped calibration reproduces the table at calibration points") {
        const auto& t = testing_support::shipped_calibration();
        const auto probs = workload::zipf_probabilities(512, 1.2);
        StageLatencyModel m(t, ParallelStrategy::hybrid(4, 2), probs);
        CHECK(m.latency(Stage::kRecv, 256) == doctest::Approx(145e-6).epsilon(1e-12));
        CHECK(m.latency(Stage::kComp, 256) == doctest::Approx(142e-6).epsilon(1e-12));
        CHECK(m.latency(Stage::kSend, 512) == doctest::Approx(396e-6).epsilon(1e-12));
        CHECK(m.latency(Stage::kMoe, 256) == doctest::Approx(492e-6).epsilon(1e-12));
        CHECK(m.latency(Stage::kComp, 512) / m.latency(Stage::kComp, 256) == doctest::Approx(204.0 / 142.0));
        CHECK(m.latency(Stage::kComp, 512) / m.latency(Stage::kComp, 256) < 2.0);
    }

    TEST_CASE("strict calibration rejects out-of-range probes and names them") {
        const auto probs = workload::zipf_probabilities(64, 1.2);
        StageLatencyModel m(testing_support::shipped_calibration(), ParallelStrategy::hybrid(4, 2), probs);
        try {
            m.latency(Stage::kSend, 1024);
            FAIL("expected a domain error");
        } catch (const CalibrationDomainError& e) {
            const std::string what = e.what();
            CHECK(what.find("send") != std::string::npos);
            CHECK(what.find("1024") != std::string::npos);
        }
        CHECK_THROWS_AS(StageLatencyModel(testing_support::shipped_calibration(), ParallelStrategy::hybrid(2, 1), probs),
                        ConfigError);
    }

    TEST_CASE("linear comm extrapolation doubles with tokens") {
        const auto t = parse_calibration(
            "strategy,m,batch_tokens,recv_us,comp_us,send_us,moe_us\n"
            "EP4-PP2,8,256,100,50,200,400\nEP4-PP2,8,512,200,80,400,800\n");
        const auto probs = workload::zipf_probabilities(256, 1.2);
        StageLatencyModel m(t, ParallelStrategy::hybrid(4, 2), probs, Extrapolation::kLinear);
        for (double tok : {300.0, 512.0, 700.0, 1000.0})
            CHECK(m.latency(Stage::kRecv, 2 * tok) == doctest::Approx(2 * m.latency(Stage::kRecv, tok)).epsilon(0.01));
        CHECK(m.latency(Stage::kRecv, 1.0) >= 0.0);
    }

    TEST_CASE("comp is non-decreasing and concave in tokens under Zipf popularity") {
        const auto probs = workload::zipf_probabilities(512, 1.2);
        StageLatencyModel m(testing_support::shipped_calibration(), ParallelStrategy::hybrid(4, 2), probs, Extrapolation::kLinear);
        double prev = 0.0;
        double prev_slope = INFINITY;
        for (double tok = 64; tok <= 4096; tok += 64) {
            const double v = m.latency(Stage::kComp, tok);
            CHECK(v >= prev);
            if (tok > 64) {
                const double slope = v - prev;
                CHECK(slope <= prev_slope + 1e-15);
                prev_slope = slope;
            }
            prev = v;
        }
    }

    TEST_CASE("tiny catalogs key comp by tokens") {
        // Two adapters are both drawn at either calibration point.
        const std::vector<double> probs{0.5, 0.5};
        StageLatencyModel m(testing_support::shipped_calibration(), ParallelStrategy::hybrid(4, 2), probs, Extrapolation::kLinear);
        CHECK(m.comp_by_tokens());
        CHECK(m.latency(Stage::kComp, 256) == doctest::Approx(142e-6).epsilon(1e-12));
        CHECK(m.latency(Stage::kComp, 384) == doctest::Approx(173e-6).epsilon(1e-12));
        const auto big = workload::zipf_probabilities(512, 1.2);
        CHECK_FALSE(StageLatencyModel(testing_support::shipped_calibration(), ParallelStrategy::hybrid(4, 2), big).comp_by_tokens());
    }

    TEST_CASE("expected distinct adapters") {
        const std::vector<double> uniform(4, 0.25);
        CHECK(expected_distinct(uniform, 1) == doctest::Approx(1.0));
        CHECK(expected_distinct(uniform, 2) == doctest::Approx(4 * (1 - 0.75 * 0.75)));
        CHECK(expected_distinct(uniform, 0) == 0.0);
        CHECK(expected_distinct(uniform, 1e6) == doctest::Approx(4.0));
    }
}

// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"

namespace lorasim::metrics {

void RequestRecord::validate() const {
    if (output_tokens == 0) throw ValidationError("request " + std::to_string(id) + " has zero output tokens");
    if (!(arrival <= admission && admission <= first_token && first_token <= completion))
        throw ValidationError("request " + std::to_string(id) + " timestamps are not ordered");
}

double ttft(const RequestRecord& r) { return r.first_token - r.arrival; }

double tpot(const RequestRecord& r) {
    if (r.output_tokens == 0) throw ValidationError("request " + std::to_string(r.id) + " has zero output tokens");
    return (r.completion - r.admission) / static_cast<double>(r.output_tokens);
}

double percentile(std::span<const double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile rank must lie in [0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

double slo_attainment(std::span<const RequestRecord> records, double ttft_slo, double tpot_slo, double threshold) {
    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> per_adapter;  // met, total
    for (const RequestRecord& r : records) {
        auto& [met, total] = per_adapter[r.adapter_id];
        ++total;
        if (ttft(r) <= ttft_slo && tpot(r) <= tpot_slo) ++met;
    }
    if (per_adapter.empty()) return 0.0;
    std::size_t attaining = 0;
    for (const auto& [adapter, counts] : per_adapter) {
        if (static_cast<double>(counts.first) > threshold * static_cast<double>(counts.second)) ++attaining;
    }
    return static_cast<double>(attaining) / static_cast<double>(per_adapter.size());
}

double time_weighted_mean(std::span<const SeriesPoint> points, std::uint32_t series, double start, double end) {
    if (!(end > start)) return 0.0;
    double value = 0.0;
    double t = start;
    double area = 0.0;
    for (const SeriesPoint& p : points) {
        if (p.series != series) continue;
        if (p.time >= end) break;
        if (p.time > t) {
            area += value * (p.time - t);
            t = p.time;
        }
        value = p.value;
    }
    area += value * (end - t);
    return area / (end - start);
}

void Window::validate() const {
    if (!(warmup >= 0.0) || !(cooldown >= 0.0) || !(warmup + cooldown < 1.0))
        throw ValidationError("metrics window needs warmup >= 0, cooldown >= 0 and warmup + cooldown < 1");
}

MetricsReport build_report(std::vector<RequestRecord> records, std::vector<SeriesPoint> batch_series,
                           std::vector<SeriesPoint> active_series, double duration, std::uint32_t instances,
                           const Window& window, const SloTargets& slos) {
    window.validate();
    MetricsReport rep;
    rep.duration = duration;
    rep.instances = instances;
    rep.window_start = window.warmup * duration;
    rep.window_end = (1.0 - window.cooldown) * duration;
    rep.requests_total = records.size();

    std::vector<RequestRecord> in_window;
    for (const RequestRecord& r : records) {
        if (r.arrival >= rep.window_start && r.arrival <= rep.window_end) in_window.push_back(r);
        if (r.completion >= rep.window_start && r.completion <= rep.window_end) ++rep.completed_in_window;
    }
    rep.requests_in_window = in_window.size();
    if (!in_window.empty()) {
        std::vector<double> ttfts;
        double tpot_sum = 0.0;
        for (const RequestRecord& r : in_window) {
            ttfts.push_back(ttft(r));
            tpot_sum += tpot(r);
        }
        rep.p95_ttft = percentile(ttfts, 95.0);
        rep.avg_tpot = tpot_sum / static_cast<double>(in_window.size());
        rep.attainment = slo_attainment(in_window, slos.ttft, slos.tpot, slos.threshold);
    }
    const double span = rep.window_end - rep.window_start;
    if (span > 0.0) {
        rep.throughput = static_cast<double>(rep.completed_in_window) / span;
        double batch_sum = 0.0;
        for (std::uint32_t i = 0; i < instances; ++i)
            batch_sum += time_weighted_mean(batch_series, i, rep.window_start, rep.window_end);
        rep.mean_batch = instances ? batch_sum / instances : 0.0;
        rep.mean_active_adapters = time_weighted_mean(active_series, 0, rep.window_start, rep.window_end);
    }
    rep.batch_series = std::move(batch_series);
    rep.active_adapter_series = std::move(active_series);
    rep.per_request = std::move(records);
    return rep;
}

std::string summary_json(const MetricsReport& rep, const SloTargets& slos) {
    nlohmann::ordered_json j;
    const bool any = rep.requests_in_window > 0;
    j["duration_s"] = rep.duration;
    j["window"] = {{"start_s", rep.window_start}, {"end_s", rep.window_end}};
    j["requests_total"] = rep.requests_total;
    j["requests_in_window"] = rep.requests_in_window;
    j["completed_in_window"] = rep.completed_in_window;
    j["p95_ttft_s"] = any ? nlohmann::ordered_json(rep.p95_ttft) : nlohmann::ordered_json(nullptr);
    j["avg_tpot_s"] = any ? nlohmann::ordered_json(rep.avg_tpot) : nlohmann::ordered_json(nullptr);
    j["throughput_rps"] = rep.throughput;
    j["attainment"] = any ? nlohmann::ordered_json(rep.attainment) : nlohmann::ordered_json(nullptr);
    j["mean_batch"] = rep.mean_batch;
    j["mean_active_adapters"] = rep.mean_active_adapters;
    j["instances"] = rep.instances;
    j["slos"] = {{"ttft_s", slos.ttft}, {"tpot_s", slos.tpot}, {"threshold", slos.threshold}};
    return j.dump(2) + "\n";
}

std::string requests_csv(const MetricsReport& rep) {
    std::ostringstream out;
    out << "request_id,adapter_id,arrival,admission,first_token,completion,output_tokens,ttft,tpot\n";
    for (const RequestRecord& r : rep.per_request) {
        out << r.id << ',' << r.adapter_id << ',' << io::format_double(r.arrival) << ','
            << io::format_double(r.admission) << ',' << io::format_double(r.first_token) << ','
            << io::format_double(r.completion) << ',' << r.output_tokens << ',' << io::format_double(ttft(r)) << ','
            << io::format_double(tpot(r)) << '\n';
    }
    return out.str();
}

std::string batch_series_csv(const MetricsReport& rep) {
    std::ostringstream out;
    out << "time,instance,batch_size\n";
    for (const SeriesPoint& p : rep.batch_series)
        out << io::format_double(p.time) << ',' << p.series << ',' << io::format_double(p.value) << '\n';
    return out.str();
}

std::string active_adapters_csv(const MetricsReport& rep) {
    std::ostringstream out;
    out << "time,active_adapters\n";
    for (const SeriesPoint& p : rep.active_adapter_series)
        out << io::format_double(p.time) << ',' << io::format_double(p.value) << '\n';
    return out.str();
}

void write_report(const MetricsReport& rep, const SloTargets& slos, const std::filesystem::path& dir) {
    io::write_file_atomic(dir / "summary.json", summary_json(rep, slos));
    io::write_file_atomic(dir / "requests.csv", requests_csv(rep));
    io::write_file_atomic(dir / "batch_series.csv", batch_series_csv(rep));
    io::write_file_atomic(dir / "active_adapters.csv", active_adapters_csv(rep));
}

std::string one_line_summary(const MetricsReport& rep) {
    std::ostringstream out;
    out << "p95_ttft=" << io::format_double(rep.p95_ttft) << "s avg_tpot=" << io::format_double(rep.avg_tpot)
        << "s attainment=" << io::format_double(rep.attainment) << " throughput=" << io::format_double(rep.throughput)
        << "req/s";
    return out.str();
}

}  // namespace lorasim::metrics

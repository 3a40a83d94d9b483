// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"

namespace lorasim::workload {

namespace {

constexpr std::string_view kTraceHeader = "request_id,arrival_time_s,adapter_id,input_tokens,output_tokens";

}  // namespace

void AdapterCatalog::validate() const {
    if (probs.empty()) throw ValidationError("adapter catalog is empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!(probs[i] > 0.0)) throw ValidationError("adapter " + std::to_string(i) + " has non-positive probability");
        if (i > 0 && probs[i] > probs[i - 1])
            throw ValidationError("adapter probabilities must be non-increasing (adapter " + std::to_string(i) + ")");
        sum += probs[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("adapter probabilities sum to " + io::format_double(sum));
    if (layers == 0 || experts == 0 || rank == 0) throw ValidationError("adapter geometry must be positive");
}

AdapterCatalog AdapterCatalog::zipf(std::size_t n, double s, std::uint64_t adapter_bytes, std::uint32_t layers,
                                    std::uint32_t experts, std::uint32_t rank) {
    AdapterCatalog catalog;
    catalog.probs = zipf_probabilities(n, s);
    catalog.adapter_bytes = adapter_bytes;
    catalog.layers = layers;
    catalog.experts = experts;
    catalog.rank = rank;
    return catalog;
}

LengthModel LengthModel::constant(std::uint32_t input_tokens, std::uint32_t output_tokens) {
    if (output_tokens == 0) throw std::invalid_argument("output_tokens must be at least 1");
    return LengthModel(Constant{input_tokens, output_tokens});
}

LengthModel LengthModel::empirical(std::vector<std::pair<std::uint32_t, std::uint32_t>> samples) {
    if (samples.empty()) throw std::invalid_argument("empirical length model needs at least one sample");
    for (const auto& [in, out] : samples) {
        if (out == 0) throw std::invalid_argument("empirical length sample with zero output tokens");
    }
    return LengthModel(std::move(samples));
}

LengthModel LengthModel::from_trace(const std::filesystem::path& path) {
    const WorkloadTrace trace = load_trace(path);
    Empirical samples;
    samples.reserve(trace.requests.size());
    for (const Request& r : trace.requests) samples.emplace_back(r.input_tokens, r.output_tokens);
    return empirical(std::move(samples));
}

std::pair<std::uint32_t, std::uint32_t> LengthModel::sample(Rng& rng) const {
    if (const auto* c = std::get_if<Constant>(&impl_)) return {c->input_tokens, c->output_tokens};
    const auto& samples = std::get<Empirical>(impl_);
    return samples[rng.below(samples.size())];
}

std::vector<double> zipf_probabilities(std::size_t n, double s) {
    if (n == 0) throw std::invalid_argument("zipf_probabilities requires n >= 1");
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("zipf exponent must be finite and non-negative");
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::pow(static_cast<double>(i + 1), -s);
    // Sum smallest-first to keep the normalizer accurate for long tails.
    double total = 0.0;
    for (std::size_t i = n; i-- > 0;) total += p[i];
    for (double& v : p) v /= total;
    return p;
}

WorkloadTrace generate_trace(double rate, double duration, std::span<const double> probs, const LengthModel& lengths,
                             std::uint64_t seed) {
    if (probs.empty()) throw std::invalid_argument("generate_trace requires a non-empty probability vector");
    if (!(rate > 0.0)) throw std::invalid_argument("generate_trace requires rate > 0");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw std::invalid_argument("generate_trace requires duration >= 0");

    Rng arrivals(seed, Stream::kArrivals);
    Rng adapters(seed, Stream::kAdapters);
    Rng length_rng(seed, Stream::kLengths);
    const DiscreteSampler pick(probs);

    WorkloadTrace trace;
    trace.duration = duration;
    trace.seed = seed;
    double t = arrivals.exponential(rate);
    while (t < duration) {
        Request r;
        r.id = trace.requests.size();
        r.arrival_time = t;
        r.adapter_id = static_cast<std::uint32_t>(pick(adapters));
        std::tie(r.input_tokens, r.output_tokens) = lengths.sample(length_rng);
        trace.requests.push_back(r);
        t += arrivals.exponential(rate);
    }
    return trace;
}

WorkloadTrace load_trace(const std::filesystem::path& path, std::optional<std::size_t> adapter_count) {
    const std::string text = io::read_file(path);
    const std::string source = path.string();
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
    ++line_no;
    if (io::trim(line) != kTraceHeader)
        throw ParseError(source, line_no, "expected header '" + std::string(kTraceHeader) + "'");

    WorkloadTrace trace;
    while (std::getline(in, line)) {
        ++line_no;
        if (io::trim(line).empty()) continue;
        const auto fields = io::split(line, ',');
        if (fields.size() != 5) throw ParseError(source, line_no, "expected 5 fields, got " + std::to_string(fields.size()));

        const auto id = io::parse_u64(fields[0]);
        const auto arrival = io::parse_double(fields[1]);
        const auto adapter = io::parse_u64(fields[2]);
        const auto in_tokens = io::parse_u64(fields[3]);
        const auto out_tokens = io::parse_u64(fields[4]);
        if (!id) throw ParseError(source, line_no, "bad request_id");
        if (!arrival) throw ParseError(source, line_no, "bad arrival_time_s");
        if (*arrival < 0.0) throw ParseError(source, line_no, "negative arrival_time_s");
        if (!adapter || *adapter > UINT32_MAX) throw ParseError(source, line_no, "bad adapter_id");
        if (!in_tokens || *in_tokens > UINT32_MAX) throw ParseError(source, line_no, "bad input_tokens");
        if (!out_tokens || *out_tokens > UINT32_MAX) throw ParseError(source, line_no, "bad output_tokens");
        if (*out_tokens == 0) throw ParseError(source, line_no, "output_tokens must be at least 1");
        if (adapter_count && *adapter >= *adapter_count)
            throw ValidationError(source + ":" + std::to_string(line_no) + ": adapter_id " + std::to_string(*adapter) +
                                  " out of range for " + std::to_string(*adapter_count) + " adapters");

        Request r{*id, *arrival, static_cast<std::uint32_t>(*adapter), static_cast<std::uint32_t>(*in_tokens),
                  static_cast<std::uint32_t>(*out_tokens)};
        if (!trace.requests.empty()) {
            const Request& prev = trace.requests.back();
            if (r.arrival_time < prev.arrival_time || (r.arrival_time == prev.arrival_time && r.id <= prev.id))
                throw ParseError(source, line_no, "arrivals not sorted by (arrival_time_s, request_id)");
        }
        trace.requests.push_back(r);
    }
    trace.duration = trace.requests.empty() ? 0.0 : trace.requests.back().arrival_time;
    return trace;
}

void write_trace(const WorkloadTrace& trace, const std::filesystem::path& path) {
    std::string out;
    out.reserve(32 * (trace.requests.size() + 1));
    out += kTraceHeader;
    out += '\n';
    for (const Request& r : trace.requests) {
        out += std::to_string(r.id);
        out += ',';
        out += io::format_double(r.arrival_time);
        out += ',';
        out += std::to_string(r.adapter_id);
        out += ',';
        out += std::to_string(r.input_tokens);
        out += ',';
        out += std::to_string(r.output_tokens);
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

std::vector<std::vector<std::size_t>> partition_adapters_greedy(std::span<const double> probs, std::size_t sets) {
    if (sets == 0) throw std::invalid_argument("partition_adapters_greedy requires at least one set");
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

    std::vector<std::vector<std::size_t>> out(sets);
    std::vector<double> mass(sets, 0.0);
    for (std::size_t adapter : order) {
        const auto lightest = static_cast<std::size_t>(std::min_element(mass.begin(), mass.end()) - mass.begin());
        out[lightest].push_back(adapter);
        mass[lightest] += probs[adapter];
    }
    for (auto& set : out) std::sort(set.begin(), set.end());
    return out;
}

}  // namespace lorasim::workload

// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/parcost.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"

namespace lorasim::parcost {

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    num_ = g == 0 ? 0 : num / g;
    den_ = g == 0 ? 1 : den / g;
}

Rational operator*(const Rational& a, const Rational& b) {
    // Cross-reduce first to keep intermediates small.
    const std::int64_t g1 = std::gcd(a.num_, b.den_);
    const std::int64_t g2 = std::gcd(b.num_, a.den_);
    const std::int64_t n1 = g1 ? a.num_ / g1 : a.num_;
    const std::int64_t d2 = g1 ? b.den_ / g1 : b.den_;
    const std::int64_t n2 = g2 ? b.num_ / g2 : b.num_;
    const std::int64_t d1 = g2 ? a.den_ / g2 : a.den_;
    return Rational(n1 * n2, d1 * d2);
}

Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::invalid_argument("rational division by zero");
    return a * Rational(b.den_, b.num_);
}

namespace {
__extension__ typedef __int128 Wide;
}

bool operator<(const Rational& a, const Rational& b) {
    return static_cast<Wide>(a.num_) * b.den_ < static_cast<Wide>(b.num_) * a.den_;
}

std::ostream& operator<<(std::ostream& os, const Rational& r) {
    os << r.num();
    if (r.den() != 1) os << '/' << r.den();
    return os;
}

Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

ParallelStrategy ParallelStrategy::data_parallel(std::uint32_t m) {
    if (m == 0) throw std::invalid_argument("strategy needs at least one GPU");
    return {StrategyKind::kDataParallel, m, 1};
}

ParallelStrategy ParallelStrategy::pipeline(std::uint32_t m) {
    if (m == 0) throw std::invalid_argument("strategy needs at least one GPU");
    return {StrategyKind::kPipeline, 1, m};
}

ParallelStrategy ParallelStrategy::expert(std::uint32_t m) {
    if (m == 0) throw std::invalid_argument("strategy needs at least one GPU");
    return {StrategyKind::kExpert, m, 1};
}

ParallelStrategy ParallelStrategy::hybrid(std::uint32_t x, std::uint32_t y) {
    if (x == 0 || y == 0) throw std::invalid_argument("hybrid strategy needs x >= 1 and y >= 1");
    return {StrategyKind::kHybrid, x, y};
}

ParallelStrategy ParallelStrategy::parse(std::string_view name, std::uint32_t m) {
    name = io::trim(name);
    auto need_m = [&](const char* what) {
        if (m == 0) throw std::invalid_argument(std::string(what) + " strategy needs a GPU count");
        return m;
    };
    if (name == "DP") return data_parallel(need_m("DP"));
    if (name == "PP") return pipeline(need_m("PP"));
    if (name == "EP") return expert(need_m("EP"));
    if (name.rfind("DP", 0) == 0) {
        const auto gpus = io::parse_u64(name.substr(2));
        if (!gpus || *gpus == 0) throw std::invalid_argument("bad strategy '" + std::string(name) + "'");
        return data_parallel(static_cast<std::uint32_t>(*gpus));
    }
    // EP<x>-PP<y>
    const std::size_t dash = name.find("-PP");
    if (name.rfind("EP", 0) != 0 || dash == std::string_view::npos)
        throw std::invalid_argument("bad strategy '" + std::string(name) + "'");
    const auto x = io::parse_u64(name.substr(2, dash - 2));
    const auto y = io::parse_u64(name.substr(dash + 3));
    if (!x || !y || *x == 0 || *y == 0) throw std::invalid_argument("bad strategy '" + std::string(name) + "'");
    ParallelStrategy s = hybrid(static_cast<std::uint32_t>(*x), static_cast<std::uint32_t>(*y));
    if (m != 0 && s.gpus() != m)
        throw std::invalid_argument("strategy '" + std::string(name) + "' does not use " + std::to_string(m) + " GPUs");
    return s;
}

std::string ParallelStrategy::key() const {
    if (kind == StrategyKind::kDataParallel) return "DP" + std::to_string(gpus());
    return "EP" + std::to_string(ep_degree) + "-PP" + std::to_string(pp_stages);
}

std::string ParallelStrategy::name() const {
    switch (kind) {
        case StrategyKind::kDataParallel: return "DP";
        case StrategyKind::kPipeline: return "PP";
        case StrategyKind::kExpert: return "EP";
        case StrategyKind::kHybrid: return key();
    }
    return key();
}

StrategyMetrics strategy_metrics(const ParallelStrategy& strategy, std::int64_t b, std::int64_t k, std::int64_t p,
                                 std::int64_t m) {
    if (b < 1 || k < 1 || p < 1 || m < 1) throw std::invalid_argument("strategy_metrics parameters must be >= 1");
    const Rational bk(b * k);
    const Rational rp(p);
    const Rational rm(m);
    const Rational one(1);
    switch (strategy.kind) {
        case StrategyKind::kDataParallel: return {bk / (rp * rm), rm, bk / rm, rm};
        case StrategyKind::kPipeline: return {bk / rp, one, bk, one};
        case StrategyKind::kExpert: return {bk / max(rp, rm), max(rm / rp, one), bk / rm, rm};
        case StrategyKind::kHybrid: {
            if (static_cast<std::int64_t>(strategy.gpus()) != m)
                throw std::invalid_argument("hybrid " + strategy.key() + " requires x*y == m (m = " + std::to_string(m) + ")");
            const Rational x(strategy.ep_degree);
            return {bk / max(rp, x), max(x / rp, one), bk / x, x};
        }
    }
    throw std::invalid_argument("unknown strategy kind");
}

Placement::Placement(std::uint32_t adapters, std::uint32_t layers, std::uint32_t experts, std::uint32_t gpus)
    : adapters_(adapters), layers_(layers), experts_(experts), gpus_(gpus),
      gpu_(static_cast<std::size_t>(adapters) * layers * experts, 0) {
    if (adapters == 0 || layers == 0 || experts == 0 || gpus == 0)
        throw std::invalid_argument("placement dimensions must be positive");
}

std::size_t Placement::index(std::uint32_t adapter, std::uint32_t layer, std::uint32_t expert) const {
    if (adapter >= adapters_ || layer >= layers_ || expert >= experts_)
        throw std::out_of_range("placement index out of range");
    return (static_cast<std::size_t>(adapter) * layers_ + layer) * experts_ + expert;
}

std::uint32_t Placement::gpu_of(std::uint32_t adapter, std::uint32_t layer, std::uint32_t expert) const {
    return gpu_[index(adapter, layer, expert)];
}

void Placement::assign(std::uint32_t adapter, std::uint32_t layer, std::uint32_t expert, std::uint32_t gpu) {
    if (gpu >= gpus_) throw std::out_of_range("placement GPU out of range");
    gpu_[index(adapter, layer, expert)] = gpu;
}

std::vector<std::uint64_t> Placement::load_per_gpu() const {
    std::vector<std::uint64_t> load(gpus_, 0);
    for (std::uint32_t g : gpu_) ++load[g];
    return load;
}

std::uint32_t expert_group(std::uint32_t expert, std::uint32_t experts, std::uint32_t groups) {
    if (groups == 0 || expert >= experts) throw std::invalid_argument("expert_group arguments out of range");
    const std::uint32_t base = experts / groups;
    const std::uint32_t extra = experts % groups;
    // Groups [0, extra) own base + 1 experts each, the rest own base.
    const std::uint32_t big = extra * (base + 1);
    if (expert < big) return expert / (base + 1);
    return extra + (expert - big) / base;
}

Placement place_adapters(const ParallelStrategy& strategy, std::uint32_t adapters, std::uint32_t layers,
                         std::uint32_t experts, std::uint32_t gpus) {
    if (strategy.gpus() != gpus)
        throw std::invalid_argument("strategy " + strategy.key() + " does not use " + std::to_string(gpus) + " GPUs");
    Placement placement(adapters, layers, experts, gpus);
    const std::uint32_t x = strategy.ep_degree;
    const std::uint32_t y = strategy.pp_stages;
    for (std::uint32_t a = 0; a < adapters; ++a) {
        for (std::uint32_t l = 0; l < layers; ++l) {
            for (std::uint32_t e = 0; e < experts; ++e) {
                std::uint32_t gpu = 0;
                if (strategy.kind == StrategyKind::kDataParallel) {
                    gpu = a % gpus;
                } else {
                    // PP, EP and hybrid share the stage/expert-group layout.
                    const std::uint32_t stage = l % y;
                    gpu = stage * x + expert_group(e, experts, x);
                }
                placement.assign(a, l, e, gpu);
            }
        }
    }
    return placement;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::kRecv: return "recv";
        case Stage::kComp: return "comp";
        case Stage::kSend: return "send";
        case Stage::kMoe: return "moe";
    }
    return "unknown";
}

void CalibrationTable::add(const ParallelStrategy& strategy, const CalibrationPoint& point) {
    auto& pts = entries_[strategy.key()];
    for (const CalibrationPoint& existing : pts) {
        if (existing.batch_tokens == point.batch_tokens)
            throw ConfigError("duplicate calibration row for " + strategy.key() + " at " +
                              io::format_double(point.batch_tokens) + " tokens");
    }
    pts.push_back(point);
    std::sort(pts.begin(), pts.end(),
              [](const CalibrationPoint& a, const CalibrationPoint& b) { return a.batch_tokens < b.batch_tokens; });
}

const std::vector<CalibrationPoint>& CalibrationTable::points(const ParallelStrategy& strategy) const {
    auto it = entries_.find(strategy.key());
    if (it == entries_.end()) throw ConfigError("no calibration entry for strategy " + strategy.key());
    return it->second;
}

bool CalibrationTable::contains(const ParallelStrategy& strategy) const { return entries_.count(strategy.key()) > 0; }

std::size_t CalibrationTable::size() const {
    std::size_t n = 0;
    for (const auto& [key, pts] : entries_) n += pts.size();
    return n;
}

CalibrationTable parse_calibration(std::string_view csv, const std::string& source) {
    constexpr std::string_view kHeader = "strategy,m,batch_tokens,recv_us,comp_us,send_us,moe_us";
    CalibrationTable table;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view trimmed = io::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        if (!saw_header) {
            if (trimmed != kHeader) throw ParseError(source, line_no, "expected header '" + std::string(kHeader) + "'");
            saw_header = true;
            continue;
        }
        const auto f = io::split(trimmed, ',');
        if (f.size() != 7) throw ParseError(source, line_no, "expected 7 fields, got " + std::to_string(f.size()));
        const auto m = io::parse_u64(f[1]);
        if (!m || *m == 0 || *m > UINT32_MAX) throw ParseError(source, line_no, "bad GPU count");
        ParallelStrategy strategy;
        try {
            strategy = ParallelStrategy::parse(f[0], static_cast<std::uint32_t>(*m));
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, line_no, e.what());
        }
        CalibrationPoint pt;
        double* dst[] = {&pt.batch_tokens, &pt.recv_us, &pt.comp_us, &pt.send_us, &pt.moe_us};
        for (std::size_t i = 0; i < 5; ++i) {
            const auto v = io::parse_double(f[i + 2]);
            if (!v || *v < 0.0) throw ParseError(source, line_no, "bad numeric field " + std::to_string(i + 3));
            *dst[i] = *v;
        }
        if (!(pt.batch_tokens > 0.0)) throw ParseError(source, line_no, "batch_tokens must be positive");
        try {
            table.add(strategy, pt);
        } catch (const ConfigError& e) {
            throw ParseError(source, line_no, e.what());
        }
    }
    if (!saw_header) throw ParseError(source, 0, "missing header");
    return table;
}

CalibrationTable load_calibration(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("calibration file not found: " + path.string());
    return parse_calibration(io::read_file(path), path.string());
}

double expected_distinct(std::span<const double> probs, double tokens) {
    if (!(tokens >= 0.0)) throw std::invalid_argument("token count must be non-negative");
    double total = 0.0;
    for (double p : probs) total += -std::expm1(tokens * std::log1p(-p));
    return total;
}

StageLatencyModel::StageLatencyModel(const CalibrationTable& table, const ParallelStrategy& strategy,
                                     std::span<const double> probs, Extrapolation extrapolation)
    : strategy_(strategy), probs_(probs.begin(), probs.end()), extrapolation_(extrapolation) {
    if (probs_.empty()) throw std::invalid_argument("stage latency model needs a popularity vector");
    const auto& pts = table.points(strategy);
    std::vector<std::pair<double, double>> recv, send, comp, moe;
    for (const CalibrationPoint& pt : pts) {
        recv.emplace_back(pt.batch_tokens, pt.recv_us);
        send.emplace_back(pt.batch_tokens, pt.send_us);
        comp.emplace_back(expected_distinct(probs_, pt.batch_tokens), pt.comp_us);
        moe.emplace_back(pt.batch_tokens, pt.moe_us);
    }
    // Tiny catalogs saturate: every calibrated batch touches all adapters and the
    // distinct counts coincide. Comp then falls back to interpolation in tokens.
    for (std::size_t k = 1; k < comp.size(); ++k) {
        if (!(comp[k].first > comp[k - 1].first * (1.0 + 1e-9))) {
            comp_by_tokens_ = true;
            break;
        }
    }
    if (comp_by_tokens_)
        for (std::size_t k = 0; k < comp.size(); ++k) comp[k].first = pts[k].batch_tokens;
    recv_ = PiecewiseLinear(std::move(recv));
    send_ = PiecewiseLinear(std::move(send));
    comp_ = PiecewiseLinear(std::move(comp));
    moe_ = PiecewiseLinear(std::move(moe));
}

double StageLatencyModel::eval(const PiecewiseLinear& curve, double x, Stage stage, double tokens) const {
    if (auto v = curve.interpolate(x)) return *v * 1e-6;
    if (extrapolation_ == Extrapolation::kStrict)
        throw CalibrationDomainError("stage " + to_string(stage) + " probed at " + io::format_double(tokens) +
                                     " tokens outside the calibrated range for " + strategy_.key());
    return std::max(curve.extrapolate(x), 0.0) * 1e-6;
}

double StageLatencyModel::latency(Stage stage, double tokens) const {
    if (!(tokens >= 0.0)) throw std::invalid_argument("token count must be non-negative");
    switch (stage) {
        case Stage::kRecv: return eval(recv_, tokens, stage, tokens);
        case Stage::kSend: return eval(send_, tokens, stage, tokens);
        case Stage::kMoe: return eval(moe_, tokens, stage, tokens);
        case Stage::kComp: return eval(comp_, comp_by_tokens_ ? tokens : distinct_adapters(tokens), stage, tokens);
    }
    throw std::invalid_argument("unknown stage");
}

double stage_latency(const CalibrationTable& table, Stage stage, double tokens, const ParallelStrategy& strategy,
                     std::span<const double> probs, Extrapolation extrapolation) {
    return StageLatencyModel(table, strategy, probs, extrapolation).latency(stage, tokens);
}

}  // namespace lorasim::parcost

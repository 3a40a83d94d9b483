// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/provision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lorasim/errors.hpp"
#include "lorasim/io.hpp"
#include "lorasim/special_functions.hpp"

namespace lorasim::provision {

namespace {

constexpr double kThresholdTolerance = 1e-10;

double expected_residents(std::span<const double> lambdas, double tau) {
    double sum = 0.0;
    for (double lambda : lambdas) sum += poisson_tail(lambda, tau);
    return sum;
}

void check_lambdas(std::span<const double> lambdas) {
    if (lambdas.empty()) throw std::invalid_argument("solve_threshold requires at least one adapter");
    for (double lambda : lambdas) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("access rates must be finite and >= 0");
    }
}

ThresholdSolution solve_integer(std::span<const double> lambdas, double capacity) {
    // Smallest integer tau with sum <= capacity; the sum is non-increasing in tau.
    double lo = 0.0;
    double hi = 1.0;
    while (expected_residents(lambdas, hi) > capacity) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 1.0) {
        const double mid = std::floor((lo + hi) / 2.0);
        if (expected_residents(lambdas, mid) > capacity) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {hi, false, expected_residents(lambdas, hi)};
}

bool leq_with_tolerance(double value, double limit) {
    return value <= limit + 1e-12 * std::max(std::abs(limit), 1e-9);
}

}  // namespace

double poisson_tail(double lambda, double tau) {
    if (!(lambda >= 0.0) || std::isnan(lambda)) throw std::invalid_argument("poisson_tail requires lambda >= 0");
    if (!(tau >= 0.0) || std::isnan(tau)) throw std::invalid_argument("poisson_tail requires tau >= 0");
    if (lambda == 0.0) return 0.0;
    return special::gamma_p(tau + 1.0, lambda);
}

ThresholdSolution solve_threshold(std::span<const double> lambdas, double capacity, TauMode mode) {
    if (!(capacity > 0.0)) throw std::invalid_argument("solve_threshold requires a positive cache size");
    check_lambdas(lambdas);

    const double at_zero = expected_residents(lambdas, 0.0);
    if (at_zero < capacity - kThresholdTolerance) return {0.0, true, at_zero};
    if (at_zero <= capacity) return {0.0, false, at_zero};
    if (mode == TauMode::kInteger) return solve_integer(lambdas, capacity);

    double lo = 0.0;
    double hi = 1.0;
    while (expected_residents(lambdas, hi) > capacity) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e15) throw std::runtime_error("solve_threshold failed to bracket the root");
    }
    double best_tau = hi;
    double best_err = std::abs(expected_residents(lambdas, hi) - capacity);
    for (int iter = 0; iter < 200 && best_err > kThresholdTolerance; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double sum = expected_residents(lambdas, mid);
        const double err = std::abs(sum - capacity);
        if (err < best_err) {
            best_err = err;
            best_tau = mid;
        }
        if (sum > capacity) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {best_tau, false, expected_residents(lambdas, best_tau)};
}

double free_slot_prob(std::span<const double> q, std::size_t i, std::size_t capacity) {
    const std::size_t n = q.size();
    if (i >= n) throw std::invalid_argument("free_slot_prob: adapter index out of range");
    if (capacity == 0) throw std::invalid_argument("free_slot_prob requires capacity >= 1");
    for (double v : q) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("free_slot_prob: residency outside [0, 1]");
    }
    // The other n - 1 adapters always fit.
    if (capacity >= n) return 1.0;

    std::vector<double> dp(capacity, 0.0);
    dp[0] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double stay = 1.0 - q[j];
        for (std::size_t k = capacity - 1; k >= 1; --k) dp[k] = dp[k] * stay + dp[k - 1] * q[j];
        dp[0] *= stay;
    }
    double total = 0.0;
    for (double v : dp) total += v;
    return total;
}

std::vector<double> free_slot_probs(std::span<const double> q, std::size_t capacity) {
    const std::size_t n = q.size();
    if (capacity == 0) throw std::invalid_argument("free_slot_probs requires capacity >= 1");
    for (double v : q) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("free_slot_probs: residency outside [0, 1]");
    }
    if (capacity >= n) return std::vector<double>(n, 1.0);

    const std::size_t m = capacity;
    // prefix[j * m + k]: Pr[k residents among adapters 0..j-1], for k < m.
    std::vector<double> prefix((n + 1) * m, 0.0);
    prefix[0] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double* prev = &prefix[j * m];
        double* next = &prefix[(j + 1) * m];
        const double stay = 1.0 - q[j];
        next[0] = prev[0] * stay;
        for (std::size_t k = 1; k < m; ++k) next[k] = prev[k] * stay + prev[k - 1] * q[j];
    }

    std::vector<double> out(n);
    // suffix: distribution over adapters i+1..n-1, rebuilt as i walks down.
    std::vector<double> suffix(m, 0.0);
    std::vector<double> suffix_cdf(m, 0.0);
    suffix[0] = 1.0;
    for (std::size_t i = n; i-- > 0;) {
        double running = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            running += suffix[k];
            suffix_cdf[k] = running;
        }
        const double* pre = &prefix[i * m];
        double total = 0.0;
        for (std::size_t a = 0; a < m; ++a) total += pre[a] * suffix_cdf[m - 1 - a];
        out[i] = std::min(total, 1.0);

        const double stay = 1.0 - q[i];
        for (std::size_t k = m - 1; k >= 1; --k) suffix[k] = suffix[k] * stay + suffix[k - 1] * q[i];
        suffix[0] *= stay;
    }
    return out;
}

double iar_from_parts(std::span<const double> probs, std::span<const double> residency, std::span<const double> free_slot) {
    if (probs.size() != residency.size() || probs.size() != free_slot.size())
        throw std::invalid_argument("iar_from_parts: vector sizes differ");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) total += probs[i] * (residency[i] + (1.0 - residency[i]) * free_slot[i]);
    return std::min(total, 1.0);
}

IarSolution iar(std::span<const double> probs, double global_batch, std::size_t cache_size, const IarOptions& options) {
    if (probs.empty()) throw std::invalid_argument("iar requires at least one adapter");
    if (!(global_batch > 0.0)) throw std::invalid_argument("iar requires a positive global batch size");
    if (cache_size == 0) throw std::invalid_argument("iar requires cache size >= 1");

    const std::size_t n = probs.size();
    std::vector<double> lambdas(n);
    for (std::size_t i = 0; i < n; ++i) lambdas[i] = global_batch * probs[i];

    IarSolution out;
    out.cache_size = cache_size;
    const ThresholdSolution threshold = solve_threshold(lambdas, static_cast<double>(cache_size), options.tau_mode);
    out.tau_star = threshold.tau;
    out.non_binding = threshold.non_binding;
    out.residency.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.residency[i] = poisson_tail(lambdas[i], threshold.tau);

    if (cache_size >= n) {
        out.free_slot.assign(n, 1.0);
        out.iar_value = 1.0;
        return out;
    }
    if (options.reference_dp) {
        out.free_slot.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.free_slot[i] = free_slot_prob(out.residency, i, cache_size);
    } else {
        out.free_slot = free_slot_probs(out.residency, cache_size);
    }
    out.iar_value = iar_from_parts(probs, out.residency, out.free_slot);
    return out;
}

CacheSizing min_cache_size(std::span<const double> probs, double global_batch, double alpha,
                           std::span<const std::size_t> extra_probes, const IarOptions& options) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("min_cache_size requires 0 < alpha <= 1");
    if (probs.empty()) throw std::invalid_argument("min_cache_size requires at least one adapter");
    const std::size_t n = probs.size();

    CacheSizing out;
    out.attained = false;
    for (std::size_t m = 1; m <= n; ++m) {
        IarSolution sol = iar(probs, global_batch, m, options);
        out.iar_curve[m] = sol.iar_value;
        if (sol.iar_value >= alpha) {
            out.min_cache_size = m;
            out.attained = true;
            out.at_min = std::move(sol);
            break;
        }
    }
    if (!out.attained) {
        out.min_cache_size = n;
        out.at_min = iar(probs, global_batch, n, options);
    }
    for (std::size_t m : extra_probes) {
        if (m == 0 || m > n || out.iar_curve.count(m)) continue;
        out.iar_curve[m] = iar(probs, global_batch, m, options).iar_value;
    }
    return out;
}

void TpotLatencyModel::validate() const {
    if (by_gpu_count.empty()) throw ValidationError("latency model has no calibrated GPU counts");
    if (instances == 0) throw ValidationError("latency model needs at least one instance");
    if (!(slo_ffn > 0.0) || !(slo_layer > 0.0)) throw ValidationError("SLO_FFN and SLO_Layer must be positive");
    for (const auto& [gpus, curves] : by_gpu_count) {
        for (const PiecewiseLinear* c : {&curves.recv, &curves.comp, &curves.send}) {
            if (c->empty()) throw ValidationError("missing stage curve for " + std::to_string(gpus) + " GPUs");
            if (!c->non_decreasing())
                throw ValidationError("stage curve for " + std::to_string(gpus) + " GPUs decreases in batch size");
        }
    }
}

std::string to_string(Binding b) {
    switch (b) {
        case Binding::kNone: return "none";
        case Binding::kMemory: return "memory";
        case Binding::kCompute: return "compute";
        case Binding::kFfnLatency: return "ffn_latency";
        case Binding::kLayerThroughput: return "layer_throughput";
        case Binding::kBoth: return "ffn_latency+layer_throughput";
    }
    return "unknown";
}

double StageTimes::max() const { return std::max({recv, comp, send}); }

GpuSizing min_server_gpus(const TpotLatencyModel& model, double batch, std::span<const std::uint32_t> candidates) {
    model.validate();
    if (candidates.empty()) throw std::invalid_argument("min_server_gpus requires at least one candidate");
    if (!std::is_sorted(candidates.begin(), candidates.end()))
        throw std::invalid_argument("candidate GPU counts must be ascending");

    auto eval = [&](const PiecewiseLinear& curve, const char* stage, std::uint32_t gpus) {
        const auto v = curve.interpolate(batch);
        if (!v)
            throw CalibrationDomainError(std::string("stage ") + stage + " at batch " + io::format_double(batch) +
                                         " is outside the calibrated range for " + std::to_string(gpus) + " GPUs");
        return *v;
    };

    GpuSizing out;
    for (std::uint32_t gpus : candidates) {
        const auto it = model.by_gpu_count.find(gpus);
        if (it == model.by_gpu_count.end())
            throw ConfigError("no latency calibration for " + std::to_string(gpus) + " server GPUs");
        GpuCandidateResult probe;
        probe.gpus = gpus;
        probe.stages = {eval(it->second.recv, "recv", gpus), eval(it->second.comp, "comp", gpus),
                        eval(it->second.send, "send", gpus)};
        probe.ffn_ok = leq_with_tolerance(probe.stages.sum(), model.slo_ffn);
        probe.layer_ok = leq_with_tolerance(probe.stages.max() * model.instances, model.slo_layer);
        out.probes.push_back(probe);
        if (probe.ffn_ok && probe.layer_ok) {
            out.feasible = true;
            out.gpus = gpus;
            out.binding = Binding::kNone;
            return out;
        }
    }
    const GpuCandidateResult& last = out.probes.back();
    out.binding = (!last.ffn_ok && !last.layer_ok) ? Binding::kBoth
                  : !last.ffn_ok                   ? Binding::kFfnLatency
                                                   : Binding::kLayerThroughput;
    return out;
}

std::uint64_t adapters_per_gpu(std::uint64_t gpu_lora_bytes, std::uint64_t adapter_bytes) {
    if (adapter_bytes == 0) throw std::invalid_argument("adapter footprint must be positive");
    return gpu_lora_bytes / adapter_bytes;
}

std::uint32_t memory_gpus_for(std::size_t cache_size, std::uint64_t per_gpu) {
    if (per_gpu == 0) throw ValidationError("a single adapter does not fit in one server GPU's adapter memory");
    const std::uint64_t gpus = (cache_size + per_gpu - 1) / per_gpu;
    return static_cast<std::uint32_t>(std::max<std::uint64_t>(gpus, 1));
}

ProvisioningPlan provision(const ProvisionRequest& request) {
    request.catalog.validate();
    if (request.instances == 0 || request.batch_per_instance == 0)
        throw ValidationError("instances and batch_per_instance must be positive");

    ProvisioningPlan plan;
    const double global_batch = static_cast<double>(request.instances) * request.batch_per_instance;
    plan.cache = min_cache_size(request.catalog.probs, global_batch, request.alpha, request.probe_capacities,
                                request.iar_options);
    plan.memory_bytes = static_cast<std::uint64_t>(plan.cache.min_cache_size) * request.catalog.adapter_bytes;
    plan.adapters_per_gpu = adapters_per_gpu(request.gpu_lora_bytes, request.catalog.adapter_bytes);
    plan.memory_gpus = memory_gpus_for(plan.cache.min_cache_size, plan.adapters_per_gpu);

    if (!request.candidate_gpus.empty()) {
        plan.compute = min_server_gpus(request.latency, request.batch_per_instance, request.candidate_gpus);
    } else {
        plan.compute.feasible = true;
    }

    if (!plan.compute.feasible) {
        plan.feasible = false;
        plan.binding = plan.compute.binding;
        plan.total_gpus = 0;
        return plan;
    }
    if (!plan.cache.attained) {
        plan.feasible = false;
        plan.binding = Binding::kMemory;
        plan.total_gpus = 0;
        return plan;
    }
    plan.feasible = true;
    plan.total_gpus = std::max(plan.memory_gpus, plan.compute.gpus);
    plan.binding = plan.memory_gpus >= plan.compute.gpus ? Binding::kMemory : Binding::kCompute;
    return plan;
}

}  // namespace lorasim::provision

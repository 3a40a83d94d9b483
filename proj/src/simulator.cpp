// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/simulator.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <memory>
#include <queue>
#include <stdexcept>

#include "lorasim/cache.hpp"
#include "lorasim/network.hpp"

namespace lorasim::sim {

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::kArrival: return "Arrival";
        case EventKind::kAdmissionCheck: return "AdmissionCheck";
        case EventKind::kDecodeStepDone: return "DecodeStepDone";
        case EventKind::kLayerLoadDone: return "LayerLoadDone";
        case EventKind::kStageDone: return "StageDone";
        case EventKind::kRequestDone: return "RequestDone";
    }
    return "Unknown";
}

std::string to_string(Decision d) {
    switch (d) {
        case Decision::kResident: return "resident";
        case Decision::kLoaded: return "loaded";
        case Decision::kQueued: return "queued";
    }
    return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sub-steps of one LoRA invocation on the server.
enum class Phase : std::uint8_t { kNone, kSubmit, kRecvDone, kCompReady, kCompDone, kSendDone };

struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    Phase phase;
    bool boundary;
    std::uint32_t instance;
    std::uint64_t a;
    std::uint32_t b;
};

struct Later {
    bool operator()(const Event& x, const Event& y) const {
        if (x.time != y.time) return x.time > y.time;
        return x.seq > y.seq;
    }
};

struct RequestState {
    const workload::Request* req = nullptr;
    std::uint32_t instance = 0;
    std::uint32_t remaining = 0;
    double admission = -1.0;
    double first_token = -1.0;
    double completion = -1.0;
};

struct StageGroup {
    double recv_free = 0.0;
    double comp_free = 0.0;
    double send_free = 0.0;
};

struct Instance {
    std::vector<std::size_t> queue;
    std::vector<std::size_t> joining;
    std::vector<std::size_t> batch;
    bool busy = false;
    std::uint32_t tokens = 0;
    std::uint32_t layer = 0;
    std::uint32_t projection = 0;
    double gemm_end = 0.0;
    std::vector<std::uint32_t> loading;  // batch adapters not fully loaded at iteration start
    std::unique_ptr<AdapterCache> cache;  // coupled mode
    double loader_free = 0.0;             // coupled mode
    double last_batch = -1.0;
};

struct StageCosts {
    double recv = 0.0;
    double comp = 0.0;
    double send = 0.0;
    double moe = 0.0;
    double overhead = 0.0;  // pull-mode protocol cost per transfer
};

class Simulator {
public:
    Simulator(const SimScenario& s, const SimOptions& o)
        : s_(s), opt_(o), latency_(s.calibration, s.cluster.server, s.catalog.probs, s.extrapolation),
          routing_(s.routing()), layers_(s.catalog.layers), load_start_(s.catalog.count(), kInf),
          pending_(s.catalog.count(), false) {
        const std::uint32_t x =
            s.cluster.server.kind == parcost::StrategyKind::kDataParallel ? 1 : s.cluster.server.ep_degree;
        layer_load_time_ = static_cast<double>(s.catalog.adapter_bytes) / static_cast<double>(layers_) /
                           (s.cluster.pcie_bandwidth * static_cast<double>(x));
        full_load_time_ = static_cast<double>(s.catalog.adapter_bytes) / s.cluster.pcie_bandwidth;
        groups_.resize(s.cluster.server.pp_stages);
        instances_.resize(s.cluster.instances);
        const std::size_t n = s.catalog.count();
        if (s.mode == Mode::kDisaggregated) {
            server_cache_ = std::make_unique<AdapterCache>(s.cluster.cache_capacity, n);
        } else {
            for (std::uint32_t i = 0; i < s.cluster.instances; ++i)
                instances_[i].cache = std::make_unique<AdapterCache>(s.coupled_capacity(i), n);
        }
        if (s.flags.preload) preload();
    }

    SimResult run() {
        const auto& reqs = s_.trace.requests;
        states_.resize(reqs.size());
        for (std::size_t k = 0; k < reqs.size(); ++k) {
            states_[k].req = &reqs[k];
            states_[k].instance = routing_.at(reqs[k].adapter_id);
            states_[k].remaining = reqs[k].output_tokens;
            push(reqs[k].arrival_time, EventKind::kArrival, Phase::kNone, states_[k].instance, k);
        }
        while (!events_.empty()) {
            const Event e = events_.top();
            events_.pop();
            now_ = e.time;
            ++out_.counters.events;
            dispatch(e);
            if (opt_.check_invariants) check_invariants();
        }
        out_.end_time = now_;
        out_.records.reserve(states_.size());
        for (const RequestState& st : states_) {
            if (st.completion < 0.0) throw std::logic_error("request " + std::to_string(st.req->id) + " never completed");
            metrics::RequestRecord r;
            r.id = st.req->id;
            r.adapter_id = st.req->adapter_id;
            r.instance = st.instance;
            r.arrival = st.req->arrival_time;
            r.admission = st.admission;
            r.first_token = st.first_token;
            r.completion = st.completion;
            r.output_tokens = st.req->output_tokens;
            out_.records.push_back(r);
        }
        std::sort(out_.records.begin(), out_.records.end(),
                  [](const metrics::RequestRecord& a, const metrics::RequestRecord& b) { return a.id < b.id; });
        return std::move(out_);
    }

private:
    void push(double t, EventKind kind, Phase phase, std::uint32_t instance, std::uint64_t a = 0,
              std::uint32_t b = 0, bool boundary = false) {
        events_.push(Event{t, seq_++, kind, phase, boundary, instance, a, b});
    }

    AdapterCache& cache_for(std::uint32_t instance) {
        return s_.mode == Mode::kDisaggregated ? *server_cache_ : *instances_[instance].cache;
    }

    void dispatch(const Event& e) {
        switch (e.kind) {
            case EventKind::kArrival: on_arrival(e); break;
            case EventKind::kAdmissionCheck: on_admission_check(e); break;
            case EventKind::kDecodeStepDone: on_step_done(e); break;
            case EventKind::kLayerLoadDone: on_layer_load(e); break;
            case EventKind::kStageDone: on_stage(e); break;
            case EventKind::kRequestDone: on_request_done(e); break;
        }
    }

    void preload() {
        // Least popular first so the most popular adapters are the most recently used.
        if (s_.mode == Mode::kDisaggregated) {
            const std::size_t m = std::min<std::size_t>(s_.cluster.cache_capacity, s_.catalog.count());
            for (std::size_t k = m; k-- > 0;) {
                server_cache_->preload(static_cast<std::uint32_t>(k));
                load_start_[k] = -kInf;
            }
            return;
        }
        for (std::uint32_t i = 0; i < instances_.size(); ++i) {
            std::vector<std::uint32_t> owned;
            for (std::uint32_t a = 0; a < routing_.size(); ++a)
                if (routing_[a] == i) owned.push_back(a);
            const std::size_t m = std::min<std::size_t>(instances_[i].cache->capacity(), owned.size());
            for (std::size_t k = m; k-- > 0;) {
                instances_[i].cache->preload(owned[k]);
                load_start_[owned[k]] = -kInf;
            }
        }
    }

    // ---- admission ---------------------------------------------------------

    void enqueue(Instance& in, std::size_t idx) {
        if (s_.policy == Policy::kFcfs) {
            in.queue.push_back(idx);
            return;
        }
        auto key = [this](std::size_t k) {
            const workload::Request& r = *states_[k].req;
            return std::tuple(r.output_tokens, r.arrival_time, r.id);
        };
        auto pos = std::upper_bound(in.queue.begin(), in.queue.end(), idx,
                                    [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
        in.queue.insert(pos, idx);
    }

    void log_decision(std::size_t idx, std::uint32_t instance, Decision d, std::int64_t evicted = -1) {
        if (!opt_.record_decisions) return;
        out_.decisions.push_back({now_, states_[idx].req->id, instance, d, evicted});
    }

    /// One pass over instance i's queue in policy order.
    void schedule_step(std::uint32_t i) {
        Instance& in = instances_[i];
        if (in.queue.empty()) return;
        AdapterCache& cache = cache_for(i);
        std::size_t occupancy = in.batch.size() + in.joining.size();
        std::vector<std::size_t> waiting;
        waiting.reserve(in.queue.size());
        bool stopped = false;
        for (std::size_t idx : in.queue) {
            if (stopped || occupancy >= s_.cluster.batch_cap) {
                waiting.push_back(idx);
                log_decision(idx, i, Decision::kQueued);
                continue;
            }
            const std::uint32_t a = states_[idx].req->adapter_id;
            const AdapterCache::Probe probe = cache.probe(a);
            if (probe == AdapterCache::Probe::kFull) {
                waiting.push_back(idx);
                log_decision(idx, i, Decision::kQueued);
                if (s_.scan == AdmissionScan::kStop) stopped = true;
                continue;
            }
            const std::size_t before = cache.distinct_active();
            const AdapterCache::Acquired acq = cache.acquire(a);
            active_total_ += cache.distinct_active() - before;
            if (acq.evicted) {
                ++out_.counters.evictions;
                load_start_[*acq.evicted] = kInf;
                pending_[*acq.evicted] = false;
            }
            if (acq.inserted) on_insert(a, i);
            out_.counters.max_resident = std::max<std::uint64_t>(out_.counters.max_resident, cache.size());
            log_decision(idx, i, acq.inserted ? Decision::kLoaded : Decision::kResident,
                         acq.evicted ? static_cast<std::int64_t>(*acq.evicted) : -1);
            states_[idx].admission = now_;
            in.joining.push_back(idx);
            ++occupancy;
        }
        in.queue = std::move(waiting);
        record_active();
    }

    void on_insert(std::uint32_t a, std::uint32_t instance) {
        ++out_.counters.adapter_loads;
        if (s_.mode == Mode::kCoupled) {
            Instance& in = instances_[instance];
            const double start = std::max(now_, in.loader_free);
            in.loader_free = start + full_load_time_;
            load_start_[a] = start;
            push(in.loader_free, EventKind::kLayerLoadDone, Phase::kNone, instance, a, layers_ - 1);
            return;
        }
        if (s_.flags.prefetch) {
            begin_server_load(a, instance);
        } else {
            pending_[a] = true;
            load_start_[a] = kInf;
        }
    }

    void begin_server_load(std::uint32_t a, std::uint32_t instance) {
        const double start = std::max(now_, server_loader_free_);
        server_loader_free_ = start + layers_ * layer_load_time_;
        load_start_[a] = start;
        pending_[a] = false;
        if (s_.flags.layerwise_loading) {
            for (std::uint32_t l = 0; l < layers_; ++l)
                push(layer_ready(a, l), EventKind::kLayerLoadDone, Phase::kNone, instance, a, l);
        } else {
            push(server_loader_free_, EventKind::kLayerLoadDone, Phase::kNone, instance, a, layers_ - 1);
        }
    }

    double layer_ready(std::uint32_t a, std::uint32_t layer) const {
        const double start = load_start_[a];
        if (s_.mode == Mode::kCoupled) return start + full_load_time_;
        const double n = s_.flags.layerwise_loading ? static_cast<double>(layer + 1) : static_cast<double>(layers_);
        return start + n * layer_load_time_;
    }

    double fully_loaded(std::uint32_t a) const { return layer_ready(a, layers_ - 1); }

    // ---- iterations --------------------------------------------------------

    const StageCosts& costs(std::uint32_t tokens) {
        if (tokens >= cost_known_.size()) {
            cost_known_.resize(tokens + 1, false);
            cost_memo_.resize(tokens + 1);
        }
        if (!cost_known_[tokens]) {
            StageCosts c;
            const double t = static_cast<double>(tokens);
            c.moe = latency_.latency(parcost::Stage::kMoe, t);
            c.comp = latency_.latency(parcost::Stage::kComp, t);
            if (s_.mode == Mode::kDisaggregated) {
                c.recv = latency_.latency(parcost::Stage::kRecv, t);
                c.send = latency_.latency(parcost::Stage::kSend, t);
                if (s_.cluster.net.mode == CommMode::kPull)
                    c.overhead = pull_overhead(s_.cluster.net, t * s_.model.hidden * 2.0);
            }
            cost_memo_[tokens] = c;
            cost_known_[tokens] = true;
        }
        return cost_memo_[tokens];
    }

    void record_batch(std::uint32_t i) {
        Instance& in = instances_[i];
        const double b = static_cast<double>(in.batch.size());
        if (b == in.last_batch) return;
        in.last_batch = b;
        out_.batch_series.push_back({now_, i, b});
    }

    void record_active() {
        const double v = static_cast<double>(active_total_);
        if (v == last_active_) return;
        last_active_ = v;
        out_.active_adapter_series.push_back({now_, 0, v});
    }

    void start_iteration(std::uint32_t i) {
        Instance& in = instances_[i];
        if (in.busy) return;
        std::vector<std::size_t> still;
        for (std::size_t idx : in.joining) {
            const std::uint32_t a = states_[idx].req->adapter_id;
            if (s_.mode == Mode::kCoupled && fully_loaded(a) > now_)
                still.push_back(idx);
            else
                in.batch.push_back(idx);
        }
        in.joining = std::move(still);
        record_batch(i);
        if (in.batch.empty()) return;

        in.busy = true;
        ++out_.counters.iterations;
        in.tokens = static_cast<std::uint32_t>(in.batch.size()) * s_.model.top_k;
        const StageCosts& c = costs(in.tokens);
        const double attention = s_.model.attention_time(in.batch.size());
        if (opt_.record_iterations) out_.iterations.push_back({i, static_cast<std::uint32_t>(in.batch.size()), now_, 0.0});

        if (s_.mode == Mode::kCoupled) {
            const double layer = attention + 2.0 * (c.moe + s_.model.coupled_lora_scale * c.comp);
            push(now_ + layers_ * layer, EventKind::kDecodeStepDone, Phase::kNone, i);
            return;
        }
        in.loading.clear();
        for (std::size_t idx : in.batch) {
            const std::uint32_t a = states_[idx].req->adapter_id;
            if ((pending_[a] || fully_loaded(a) > now_) &&
                std::find(in.loading.begin(), in.loading.end(), a) == in.loading.end())
                in.loading.push_back(a);
        }
        in.layer = 0;
        in.projection = 0;
        start_projection(i, now_ + attention);
    }

    void start_projection(std::uint32_t i, double start) {
        Instance& in = instances_[i];
        in.gemm_end = start + costs(in.tokens).moe;
        push(s_.flags.overlap ? start : in.gemm_end, EventKind::kStageDone, Phase::kSubmit, i);
    }

    void record_stage(std::uint32_t i, parcost::Stage stage, double start, double end) {
        if (!opt_.record_stages) return;
        const Instance& in = instances_[i];
        out_.stages.push_back({i, in.layer, in.projection, stage, in.tokens, start, end});
    }

    void reserve_comp(std::uint32_t i) {
        Instance& in = instances_[i];
        StageGroup& g = groups_[in.layer % groups_.size()];
        const double start = std::max(now_, g.comp_free);
        g.comp_free = start + costs(in.tokens).comp;
        record_stage(i, parcost::Stage::kComp, start, g.comp_free);
        push(g.comp_free, EventKind::kStageDone, Phase::kCompDone, i);
    }

    void on_stage(const Event& e) {
        const std::uint32_t i = e.instance;
        Instance& in = instances_[i];
        StageGroup& g = groups_[in.layer % groups_.size()];
        const StageCosts& c = costs(in.tokens);
        switch (e.phase) {
            case Phase::kSubmit: {
                const double start = std::max(now_, g.recv_free);
                g.recv_free = start + c.recv + c.overhead;
                record_stage(i, parcost::Stage::kRecv, start, g.recv_free);
                push(g.recv_free, EventKind::kStageDone, Phase::kRecvDone, i);
                break;
            }
            case Phase::kRecvDone: {
                double ready = now_;
                std::vector<std::uint32_t> still;
                for (std::uint32_t a : in.loading) {
                    if (pending_[a]) begin_server_load(a, i);
                    ready = std::max(ready, layer_ready(a, in.layer));
                    if (fully_loaded(a) > now_) still.push_back(a);
                }
                in.loading = std::move(still);
                if (ready > now_)
                    push(ready, EventKind::kStageDone, Phase::kCompReady, i);
                else
                    reserve_comp(i);
                break;
            }
            case Phase::kCompReady: reserve_comp(i); break;
            case Phase::kCompDone: {
                const double start = std::max(now_, g.send_free);
                g.send_free = start + c.send + c.overhead;
                record_stage(i, parcost::Stage::kSend, start, g.send_free);
                push(g.send_free, EventKind::kStageDone, Phase::kSendDone, i);
                break;
            }
            case Phase::kSendDone: {
                const double end = std::max(in.gemm_end, now_);
                if (in.projection == 0) {
                    in.projection = 1;
                    start_projection(i, end);
                } else if (++in.layer == layers_) {
                    push(end, EventKind::kDecodeStepDone, Phase::kNone, i);
                } else {
                    in.projection = 0;
                    start_projection(i, end + s_.model.attention_time(in.batch.size()));
                }
                break;
            }
            case Phase::kNone: throw std::logic_error("stage event without phase");
        }
    }

    // ---- event handlers ----------------------------------------------------

    void on_arrival(const Event& e) {
        enqueue(instances_[e.instance], e.a);
        push(now_, EventKind::kAdmissionCheck, Phase::kNone, e.instance);
    }

    void on_admission_check(const Event& e) {
        Instance& in = instances_[e.instance];
        if (e.boundary) in.busy = false;
        if (!e.boundary && in.busy) {
            // Mid-iteration: admitted requests join at the next boundary.
            schedule_step(e.instance);
            return;
        }
        schedule_step(e.instance);
        start_iteration(e.instance);
    }

    void on_step_done(const Event& e) {
        Instance& in = instances_[e.instance];
        if (opt_.record_iterations) {
            for (auto it = out_.iterations.rbegin(); it != out_.iterations.rend(); ++it) {
                if (it->instance == e.instance) {
                    it->end = now_;
                    break;
                }
            }
        }
        std::vector<std::size_t> running;
        running.reserve(in.batch.size());
        for (std::size_t idx : in.batch) {
            RequestState& st = states_[idx];
            if (st.first_token < 0.0) st.first_token = now_;
            if (--st.remaining == 0) {
                st.completion = now_;
                push(now_, EventKind::kRequestDone, Phase::kNone, e.instance, idx);
            } else {
                running.push_back(idx);
            }
        }
        in.batch = std::move(running);
        // Stays busy until the boundary check below runs, after the releases.
        push(now_, EventKind::kAdmissionCheck, Phase::kNone, e.instance, 0, 0, true);
    }

    void on_request_done(const Event& e) {
        const std::uint32_t a = states_[e.a].req->adapter_id;
        AdapterCache& cache = cache_for(e.instance);
        const std::size_t before = cache.distinct_active();
        cache.release(a);
        active_total_ -= before - cache.distinct_active();
        record_active();
        if (s_.mode == Mode::kDisaggregated && cache.active_refs(a) == 0) {
            for (std::uint32_t j = 0; j < instances_.size(); ++j) {
                if (j != e.instance && !instances_[j].busy && !instances_[j].queue.empty())
                    push(now_, EventKind::kAdmissionCheck, Phase::kNone, j);
            }
        }
    }

    void on_layer_load(const Event& e) {
        if (s_.mode == Mode::kCoupled && !instances_[e.instance].busy) start_iteration(e.instance);
    }

    void check_invariants() const {
        auto check = [](const AdapterCache& c) {
            if (c.size() > c.capacity()) throw std::logic_error("cache holds more adapters than its capacity");
        };
        if (server_cache_) check(*server_cache_);
        for (const Instance& in : instances_) {
            if (in.cache) check(*in.cache);
            if (in.batch.size() > s_.cluster.batch_cap) throw std::logic_error("batch exceeds its cap");
        }
        for (std::size_t a = 0; a < load_start_.size(); ++a) {
            bool active = false;
            bool resident = false;
            if (server_cache_) {
                active = server_cache_->active_refs(static_cast<std::uint32_t>(a)) > 0;
                resident = server_cache_->resident(static_cast<std::uint32_t>(a));
            } else {
                const AdapterCache& c = *instances_[routing_[a]].cache;
                active = c.active_refs(static_cast<std::uint32_t>(a)) > 0;
                resident = c.resident(static_cast<std::uint32_t>(a));
            }
            if (active && !resident) throw std::logic_error("active adapter is not resident");
        }
    }

    const SimScenario& s_;
    SimOptions opt_;
    parcost::StageLatencyModel latency_;
    std::vector<std::uint32_t> routing_;
    std::uint32_t layers_;
    double layer_load_time_ = 0.0;
    double full_load_time_ = 0.0;
    std::vector<double> load_start_;
    std::vector<bool> pending_;
    double server_loader_free_ = 0.0;
    std::unique_ptr<AdapterCache> server_cache_;
    std::vector<Instance> instances_;
    std::vector<StageGroup> groups_;
    std::vector<RequestState> states_;
    std::vector<StageCosts> cost_memo_;
    std::vector<bool> cost_known_;
    std::priority_queue<Event, std::vector<Event>, Later> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::size_t active_total_ = 0;
    double last_active_ = -1.0;
    SimResult out_;
};

}  // namespace

SimResult simulate(const SimScenario& scenario, const SimOptions& options) {
    scenario.validate();
    return Simulator(scenario, options).run();
}

metrics::MetricsReport run(const SimScenario& scenario) {
    SimResult r = simulate(scenario);
    return metrics::build_report(std::move(r.records), std::move(r.batch_series), std::move(r.active_adapter_series),
                                 scenario.trace.duration, scenario.cluster.instances, scenario.window, scenario.slos);
}

}  // namespace lorasim::sim

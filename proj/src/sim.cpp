#include "gorgo/sim.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <deque>
#include <memory>
#include <queue>
#include <sstream>

#include "gorgo/rng.hpp"

namespace gorgo {

std::string event_kind_to_string(EventKind k) {
    switch (k) {
        case EventKind::kArrival: return "arrival";
        case EventKind::kHopDelivery: return "hop_delivery";
        case EventKind::kAdmitToBatch: return "admit_to_batch";
        case EventKind::kPrefillDone: return "prefill_done";
        case EventKind::kDecodeTick: return "decode_tick";
        case EventKind::kRequestDone: return "request_done";
        case EventKind::kGossipRefresh: return "gossip_refresh";
        case EventKind::kReject: return "reject";
        case EventKind::kProxyRetry: return "proxy_retry";
        case EventKind::kStageStart: return "stage_start";
    }
    return "?";
}

std::string export_event_log_jsonl(std::span<const LoggedEvent> events) {
    std::string out;
    out.reserve(events.size() * 64);
    char buf[160];
    for (const auto& e : events) {
        std::snprintf(buf, sizeof buf, "{\"at_us\":%lld,\"kind\":\"%s\"",
                      static_cast<long long>(e.at_us), event_kind_to_string(e.kind).c_str());
        out += buf;
        if (!e.req.empty()) out += ",\"req\":\"" + e.req + "\"";
        if (!e.region.empty()) out += ",\"region\":\"" + e.region + "\"";
        if (!e.from.empty()) out += ",\"from\":\"" + e.from + "\"";
        if (e.tokens >= 0) {
            std::snprintf(buf, sizeof buf, ",\"tokens\":%lld", static_cast<long long>(e.tokens));
            out += buf;
        }
        if (e.overlap >= 0) {
            std::snprintf(buf, sizeof buf, ",\"overlap\":%lld", static_cast<long long>(e.overlap));
            out += buf;
        }
        if (e.stage >= 0) {
            std::snprintf(buf, sizeof buf, ",\"stage\":%lld", static_cast<long long>(e.stage));
            out += buf;
        }
        out += "}\n";
    }
    return out;
}

namespace {

enum Prio : int {
    kPrioRequestDone = 0,
    kPrioPrefillDone = 1,
    kPrioGossipRefresh = 2,
    kPrioArrival = 3,
    kPrioHopDelivery = 4,
    kPrioProxyRetry = 5,
    kPrioDecodeTick = 6,
    kPrioStageStart = 7,
    kPrioGossipBroadcast = 8,
};

enum class EvKind {
    kArrival,
    kHopDelivery,
    kPrefillDone,
    kRequestDone,
    kDecodeTick,
    kGossipBroadcast,
    kGossipDelivery,
    kProxyRetry,
    kStageStart,
};

struct Ev {
    MicroTs at = 0;
    int prio = 0;
    std::uint64_t order = 0;  // push counter, final tiebreak
    EvKind kind = EvKind::kArrival;
    std::uint64_t req = 0;
    int region = -1;
    int from = -1;
    std::uint64_t payload = 0;
};

struct EvCompare {
    bool operator()(const Ev& a, const Ev& b) const {
        if (a.at != b.at) return a.at > b.at;
        if (a.prio != b.prio) return a.prio > b.prio;
        return a.order > b.order;
    }
};

class Simulation {
public:
    explicit Simulation(const SimConfig& cfg) : cfg_(cfg) {
        validate_config(cfg_);
    }

    SimResult run();

private:
    struct RequestRt {
        Request req;
        RequestTrace trace;
        int serving_region = -1;
        std::int64_t residual_tokens = 0;  // prefill work at admission
        bool terminal = false;
        bool filler = false;
        int stage = -1;
    };

    struct BackendRt {
        std::int64_t running = 0;
        std::int64_t batch_tokens = 0;       // prompt tokens pinned by the running batch
        std::int64_t prefilling_tokens = 0;  // of those, tokens not yet prefilled
        std::deque<std::uint64_t> waiting;
        std::int64_t waiting_tokens = 0;
        PrefixIndex cache{16, 1 << 16};
        bool tick_scheduled = false;
    };

    struct RegionRt {
        RegionConfig cfg;
        BackendRt be;
        std::map<std::string, PeerSummary> peers;
        std::map<std::string, bool> peer_seen;
        PolicyConfig policy;
        RegionAggregate agg;
        MicroTs itl_us = 0;
    };

    struct PendingGossip {
        int to = -1;
        int from = -1;
        PeerSummary summary;
        double rtt_sample = 0.0;
    };

    // Overlap view of one LB: live local cache plus gossiped peer digests.
    class LbOverlap final : public OverlapProvider {
    public:
        LbOverlap(const Simulation& sim, int region) : sim_(&sim), region_(region) {}
        std::int64_t overlap(std::span<const Token> tokens, const std::string& node_id) const override {
            const RegionRt& r = sim_->regions_[static_cast<std::size_t>(region_)];
            if (node_id == r.cfg.id) return r.be.cache.overlap_for_node(tokens, node_id);
            if (!sim_->cfg_.prefix_index.mirror_peer_prefixes) return 0;
            auto it = r.peers.find(node_id);
            if (it == r.peers.end() || it->second.prefix_summary == nullptr) return 0;
            return it->second.prefix_summary->overlap_for_node(tokens, node_id);
        }

    private:
        const Simulation* sim_;
        int region_;
    };

    // --- setup ---
    void init_regions();
    void seed_caches();
    void seed_fillers();
    void warm_start_peers();
    void inject_workload();

    // --- event handlers ---
    void on_arrival(const Ev& e);
    void on_hop_delivery(const Ev& e);
    void on_decode_tick(const Ev& e);
    void on_prefill_done(const Ev& e);
    void on_request_done(const Ev& e);
    void on_gossip_broadcast(const Ev& e);
    void on_gossip_delivery(const Ev& e);
    void on_proxy_retry(const Ev& e);
    void on_stage_start(const Ev& e);

    // --- machinery ---
    void push(MicroTs at, int prio, EvKind kind, std::uint64_t req = 0, int region = -1,
              int from = -1, std::uint64_t payload = 0);
    void log(MicroTs at, EventKind kind, const std::string& req = "", const std::string& region = "",
             const std::string& from = "", std::int64_t tokens = -1, std::int64_t overlap = -1,
             std::int64_t stage = -1);
    std::uint64_t new_request(const ArrivalRecord& rec);
    void ingress(std::uint64_t seq, int region, MicroTs now);
    void route_via_proxy(std::uint64_t seq, MicroTs now);
    void enqueue_backend(std::uint64_t seq, int region, MicroTs now);
    void admit_waiting(int region, MicroTs now);
    void forward(std::uint64_t seq, int from, int to, MicroTs now);
    void reject(std::uint64_t seq, int region, MicroTs now, const std::string& cause);
    void make_terminal(std::uint64_t seq, MicroTs now);
    void schedule_tick(int region, MicroTs now);
    MicroTs ceil_tick(MicroTs t, MicroTs itl_us) const;
    RegionState live_state(int region) const;
    double hop_delay_ms(int from, int to, std::uint64_t req_seq, int hop_index) const;
    int region_index(const std::string& id) const;
    void sample_queues_until(MicroTs t);
    void evaluate_stage(MicroTs now);
    RunReport build_report(MicroTs horizon);

    SimConfig cfg_;
    std::vector<RegionRt> regions_;
    std::map<std::string, int> region_idx_;
    std::vector<std::pair<std::string, GeoPoint>> region_locations_;

    std::priority_queue<Ev, std::vector<Ev>, EvCompare> queue_;
    std::uint64_t push_counter_ = 0;
    std::vector<LoggedEvent> log_;
    std::vector<RequestRt> requests_;
    std::vector<PendingGossip> pending_gossip_;

    // workload
    std::unique_ptr<PromptSampler> sampler_;
    std::unique_ptr<ConcurrentDriver> concurrent_;
    std::unique_ptr<SweepDriver> sweep_;
    std::vector<StageInfo> stages_;
    std::int64_t stage_outstanding_ = 0;
    std::vector<double> stage_ttfts_;
    bool stage_rejection_ = false;
    bool sweep_stopped_ = false;
    int current_stage_ = -1;

    // proxy
    PrefixIndex proxy_index_{16, 1 << 20};
    std::map<std::string, double> proxy_rtt_;
    CostParams proxy_cost_;
    int proxy_colocated_ = 0;
    std::deque<std::uint64_t> proxy_backlog_;
    bool proxy_retry_scheduled_ = false;

    MicroTs duration_us_ = 0;
    MicroTs next_sample_us_ = 0;
    MicroTs sample_interval_us_ = 0;
    std::uint64_t jitter_seed_ = 0;
    std::uint64_t gossip_round_ = 0;
    std::int64_t active_requests_ = 0;

    RunTotals totals_;
};

void Simulation::push(MicroTs at, int prio, EvKind kind, std::uint64_t req, int region, int from,
                      std::uint64_t payload) {
    queue_.push(Ev{at, prio, push_counter_++, kind, req, region, from, payload});
}

void Simulation::log(MicroTs at, EventKind kind, const std::string& req, const std::string& region,
                     const std::string& from, std::int64_t tokens, std::int64_t overlap,
                     std::int64_t stage) {
    log_.push_back(LoggedEvent{at, kind, req, region, from, tokens, overlap, stage});
}

int Simulation::region_index(const std::string& id) const {
    auto it = region_idx_.find(id);
    if (it == region_idx_.end()) throw ConfigError("unknown region '" + id + "'");
    return it->second;
}

MicroTs Simulation::ceil_tick(MicroTs t, MicroTs itl_us) const {
    if (itl_us <= 0) return t;
    MicroTs r = t % itl_us;
    return r == 0 ? t : t + (itl_us - r);
}

void Simulation::init_regions() {
    regions_.clear();
    int idx = 0;
    for (const auto& rc : cfg_.regions) {
        RegionRt r;
        r.cfg = rc;
        r.itl_us = ms_to_us(rc.backend.itl_ms);
        std::int64_t cap_blocks =
            std::max<std::int64_t>(1, rc.backend.kv_capacity_tokens / cfg_.prefix_index.block_size);
        r.be.cache = PrefixIndex(cfg_.prefix_index.block_size, cap_blocks);

        PolicyConfig p;
        p.strategy = cfg_.policy.strategy;
        p.max_hops = cfg_.policy.max_hops;
        p.running_threshold = cfg_.policy.running_threshold;
        p.kv_cache_limit = cfg_.policy.kv_cache_limit;
        p.max_queue_tokens = cfg_.policy.max_queue_tokens;
        p.load_metric = cfg_.policy.load_metric;
        p.cost.q_s = cfg_.policy.cost.q_s;
        p.cost.base_latency_ms = cfg_.policy.cost.base_latency_ms;
        p.cost.t_p_ms_per_token = cfg_.policy.cost.t_p_set
                                      ? cfg_.policy.cost.t_p_ms_per_token
                                      : rc.backend.prefill.slope_ms_per_token * cfg_.policy.cost.t_p_scale;
        p.staleness.stale_after_ms =
            cfg_.policy.stale_after_set ? cfg_.policy.stale_after_ms : 5.0 * cfg_.gossip.interval_ms;
        p.staleness.penalty_ms =
            cfg_.policy.stale_penalty_set ? cfg_.policy.stale_penalty_ms : cfg_.gossip.interval_ms;
        p.stale_exclude_after_ms = cfg_.policy.stale_exclude_after_ms;
        r.policy = p;

        r.agg.region_id = rc.id;
        region_idx_[rc.id] = idx++;
        region_locations_.emplace_back(rc.id, rc.location);
        regions_.push_back(std::move(r));
    }

    proxy_colocated_ = cfg_.proxy.colocated_region.empty()
                           ? 0
                           : region_index(cfg_.proxy.colocated_region);
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        const std::string& id = regions_[i].cfg.id;
        auto it = cfg_.proxy.rtt_ms.find(id);
        proxy_rtt_[id] = it != cfg_.proxy.rtt_ms.end()
                             ? it->second
                             : cfg_.network.rtt_ms[static_cast<std::size_t>(proxy_colocated_)][i];
    }
    proxy_cost_ = regions_[static_cast<std::size_t>(proxy_colocated_)].policy.cost;
    std::int64_t total_blocks = 0;
    for (const auto& r : regions_)
        total_blocks += r.cfg.backend.kv_capacity_tokens / cfg_.prefix_index.block_size;
    proxy_index_ = PrefixIndex(cfg_.prefix_index.block_size, std::max<std::int64_t>(1, total_blocks));
}

void Simulation::seed_caches() {
    bool any = false;
    for (const auto& rc : cfg_.regions)
        if (!rc.cache_seeds.empty()) any = true;
    if (!any) return;

    auto prefixes = synth_shared_prefix(cfg_.workload.prompts.synth, cfg_.seed);
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        for (const auto& seed : regions_[i].cfg.cache_seeds) {
            const TokenSeq& p = prefixes[static_cast<std::size_t>(seed.prefix_id)];
            auto len = static_cast<std::size_t>(seed.fraction * static_cast<double>(p.size()));
            if (len == 0) continue;
            std::span<const Token> span(p.data(), len);
            regions_[i].be.cache.insert(span, regions_[i].cfg.id, 0);
            if (cfg_.policy.strategy == Strategy::kGorgoProxy)
                proxy_index_.insert(span, regions_[i].cfg.id, 0);
        }
    }
}

void Simulation::seed_fillers() {
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        RegionRt& r = regions_[i];
        std::int64_t remaining = r.cfg.initial_waiting_tokens;
        int k = 0;
        rng::Stream filler_rng(rng::derive_seed(cfg_.seed, "filler-" + r.cfg.id));
        while (remaining > 0) {
            std::int64_t chunk = std::min(remaining, r.cfg.filler_chunk_tokens);
            remaining -= chunk;

            ArrivalRecord rec;
            rec.at_us = 0;
            rec.tokens.reserve(static_cast<std::size_t>(chunk));
            for (std::int64_t t = 0; t < chunk; ++t)
                rec.tokens.push_back(static_cast<Token>(filler_rng.next_below(1u << 16)));
            rec.output_tokens = r.cfg.filler_output_tokens;
            rec.origin = r.cfg.location;

            std::uint64_t seq = new_request(rec);
            RequestRt& rt = requests_[seq];
            rt.filler = true;
            rt.req.id = "fill-" + r.cfg.id + "-" + std::to_string(k++);
            rt.trace.id = rt.req.id;
            record_hop(rt.trace, r.cfg.id, 0);
            rt.req.hop_trace.push_back(Hop{r.cfg.id, 0, -1});
            enqueue_backend(seq, static_cast<int>(i), 0);
        }
        // Fillers must occupy the batch before any t=0 arrival is decided.
        if (r.cfg.initial_waiting_tokens > 0) admit_waiting(static_cast<int>(i), 0);
    }
}

void Simulation::warm_start_peers() {
    if (!cfg_.gossip.warm_start) return;
    for (std::size_t to = 0; to < regions_.size(); ++to) {
        for (std::size_t from = 0; from < regions_.size(); ++from) {
            if (to == from) continue;
            PeerSummary s;
            s.region_id = regions_[from].cfg.id;
            s.rtt_ms = cfg_.network.rtt_ms[from][to];
            s.state = live_state(static_cast<int>(from));
            if (cfg_.prefix_index.mirror_peer_prefixes)
                s.prefix_summary = std::make_shared<const PrefixIndex>(regions_[from].be.cache);
            s.as_of_us = 0;
            regions_[to].peers[s.region_id] = std::move(s);
            regions_[to].peer_seen[regions_[from].cfg.id] = true;
        }
    }
}

std::uint64_t Simulation::new_request(const ArrivalRecord& rec) {
    std::uint64_t seq = requests_.size();
    RequestRt rt;
    rt.req.seq = seq;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "req-%06llu", static_cast<unsigned long long>(seq));
    rt.req.id = idbuf;
    rt.req.tokens = rec.tokens;
    rt.req.origin = rec.origin;
    rt.req.created_at_us = rec.at_us;
    rt.req.output_tokens = rec.output_tokens;
    rt.req.prompt_hash = rec.prompt_hash;
    rt.req.origin_fallback = rec.origin_fallback;

    rt.trace.id = rt.req.id;
    rt.trace.seq = seq;
    rt.trace.created_at_us = rec.at_us;
    rt.trace.prompt_tokens = rt.req.prompt_tokens();
    rt.trace.output_tokens = rec.output_tokens;
    rt.trace.origin_fallback = rec.origin_fallback;
    rt.stage = current_stage_;

    requests_.push_back(std::move(rt));
    ++active_requests_;
    return seq;
}

void Simulation::inject_workload() {
    const WorkloadSpec& w = cfg_.workload;
    if (w.kind == WorkloadKind::kNone) return;
    sampler_ = make_sampler(w.prompts, w.origins, cfg_.seed);

    auto push_arrivals = [this](const std::vector<ArrivalRecord>& arrivals) {
        for (const auto& a : arrivals) {
            std::uint64_t seq = new_request(a);
            ++totals_.injected;
            if (requests_[seq].stage >= 0) ++stage_outstanding_;
            push(a.at_us, kPrioArrival, EvKind::kArrival, seq);
        }
    };

    switch (w.kind) {
        case WorkloadKind::kPoisson:
            push_arrivals(gen_poisson(w.rate_per_s, w.duration_s, *sampler_, cfg_.seed));
            break;
        case WorkloadKind::kThroughput:
            push_arrivals(gen_throughput(w.ceiling_per_s, w.duration_s, *sampler_));
            break;
        case WorkloadKind::kConcurrent:
            concurrent_ = std::make_unique<ConcurrentDriver>(w.concurrency, w.duration_s, *sampler_);
            push_arrivals(concurrent_->initial_burst());
            break;
        case WorkloadKind::kSweep:
            sweep_ = std::make_unique<SweepDriver>(w.sweep, *sampler_);
            push(0, kPrioStageStart, EvKind::kStageStart, 0, /*region=*/0, -1, /*payload=*/0);
            break;
        case WorkloadKind::kNone:
            break;
    }
}

RegionState Simulation::live_state(int region) const {
    const RegionRt& r = regions_[static_cast<std::size_t>(region)];
    RegionState s;
    s.region_id = r.cfg.id;
    s.running_requests = r.be.running;
    s.running_tokens = r.be.prefilling_tokens;
    s.waiting_requests = static_cast<std::int64_t>(r.be.waiting.size());
    s.waiting_tokens = r.be.waiting_tokens;
    s.kv_cache_used_fraction =
        std::min(1.0, static_cast<double>(r.be.batch_tokens) /
                          static_cast<double>(r.cfg.backend.kv_capacity_tokens));
    s.t_p_measured_ms = r.cfg.backend.prefill.slope_ms_per_token;
    return s;
}

double Simulation::hop_delay_ms(int from, int to, std::uint64_t req_seq, int hop_index) const {
    double base = from < 0 ? proxy_rtt_.at(regions_[static_cast<std::size_t>(to)].cfg.id)
                           : cfg_.network.rtt_ms[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
    double j = cfg_.network.jitter_fraction;
    if (j <= 0.0) return base;
    double u = rng::hashed_unit(jitter_seed_, req_seq, static_cast<std::uint64_t>(hop_index));
    return base * (1.0 + j * (2.0 * u - 1.0));
}

void Simulation::schedule_tick(int region, MicroTs now) {
    RegionRt& r = regions_[static_cast<std::size_t>(region)];
    if (r.be.tick_scheduled) return;
    r.be.tick_scheduled = true;
    push(ceil_tick(now, r.itl_us), kPrioDecodeTick, EvKind::kDecodeTick, 0, region);
}

void Simulation::enqueue_backend(std::uint64_t seq, int region, MicroTs now) {
    RegionRt& r = regions_[static_cast<std::size_t>(region)];
    RequestRt& rt = requests_[seq];
    rt.serving_region = region;
    r.be.waiting.push_back(seq);
    r.be.waiting_tokens += rt.req.prompt_tokens();
    if (r.be.running < r.cfg.backend.max_running) schedule_tick(region, now);
}

void Simulation::forward(std::uint64_t seq, int from, int to, MicroTs now) {
    RequestRt& rt = requests_[seq];
    rt.trace.hops.back().egress_us = now;
    if (!rt.req.hop_trace.empty()) rt.req.hop_trace.back().egress_us = now;
    ++totals_.forwards;
    if (from >= 0) ++regions_[static_cast<std::size_t>(from)].agg.forwarded_out;
    double delay = hop_delay_ms(from, to, seq, static_cast<int>(rt.trace.hops.size()));
    push(now + ms_to_us(delay), kPrioHopDelivery, EvKind::kHopDelivery, seq, to, from);
}

void Simulation::reject(std::uint64_t seq, int region, MicroTs now, const std::string& cause) {
    RequestRt& rt = requests_[seq];
    std::string region_id = region >= 0 ? regions_[static_cast<std::size_t>(region)].cfg.id : "proxy";
    log(now, EventKind::kReject, rt.req.id, region_id);
    finalize_rejected(rt.trace, now, cause);
    if (region >= 0 && !rt.filler) ++regions_[static_cast<std::size_t>(region)].agg.rejected;
    if (!rt.filler) ++totals_.rejected;
    if (rt.stage >= 0) stage_rejection_ = true;
    make_terminal(seq, now);
}

void Simulation::make_terminal(std::uint64_t seq, MicroTs now) {
    RequestRt& rt = requests_[seq];
    if (rt.terminal) return;
    rt.terminal = true;
    --active_requests_;

    if (!rt.filler) {
        if (concurrent_) {
            if (auto next = concurrent_->on_terminal(now)) {
                std::uint64_t nseq = new_request(*next);
                ++totals_.injected;
                push(next->at_us, kPrioArrival, EvKind::kArrival, nseq);
            }
        }
        if (rt.stage >= 0 && rt.stage == current_stage_) {
            if (rt.trace.status == "completed") stage_ttfts_.push_back(rt.trace.ttft_ms());
            --stage_outstanding_;
            if (stage_outstanding_ == 0) evaluate_stage(now);
        }
    }
}

void Simulation::on_arrival(const Ev& e) {
    RequestRt& rt = requests_[e.req];
    if (cfg_.policy.strategy == Strategy::kGorgoProxy) {
        log(e.at, EventKind::kArrival, rt.req.id, "proxy", "", rt.req.prompt_tokens());
        record_hop(rt.trace, "proxy", e.at);
        rt.req.hop_trace.push_back(Hop{"proxy", e.at, -1});
        route_via_proxy(e.req, e.at);
        return;
    }
    int region = region_index(nearest_region(rt.req.origin, region_locations_));
    log(e.at, EventKind::kArrival, rt.req.id, regions_[static_cast<std::size_t>(region)].cfg.id, "",
        rt.req.prompt_tokens());
    ingress(e.req, region, e.at);
}

void Simulation::ingress(std::uint64_t seq, int region, MicroTs now) {
    RegionRt& r = regions_[static_cast<std::size_t>(region)];
    RequestRt& rt = requests_[seq];

    record_hop(rt.trace, r.cfg.id, now);
    rt.req.hop_trace.push_back(Hop{r.cfg.id, now, -1});

    RegionState local = live_state(region);
    std::vector<PeerSummary> peers;
    peers.reserve(r.peers.size());
    for (const auto& [id, s] : r.peers) peers.push_back(s);

    LbOverlap overlaps(*this, region);
    Decision d = handle_request(rt.req, local, peers, overlaps, r.policy, now);
    rt.trace.hops.back().decision = d;

    switch (d.kind) {
        case DecisionKind::kServeLocal:
        case DecisionKind::kQueueLocal:
            enqueue_backend(seq, region, now);
            break;
        case DecisionKind::kForward:
            forward(seq, region, region_index(d.target), now);
            break;
        case DecisionKind::kReject:
            reject(seq, region, now, d.cause);
            break;
    }
}

void Simulation::route_via_proxy(std::uint64_t seq, MicroTs now) {
    RequestRt& rt = requests_[seq];

    // Live view: the proxy polls instance metrics centrally.
    std::vector<RegionState> states;
    std::vector<std::string> eligible;
    states.reserve(regions_.size());
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        states.push_back(live_state(static_cast<int>(i)));
        if (states.back().waiting_tokens + rt.req.prompt_tokens() <= cfg_.policy.max_queue_tokens)
            eligible.push_back(regions_[i].cfg.id);
    }
    if (rt.req.prompt_tokens() > cfg_.policy.max_queue_tokens) {
        reject(seq, -1, now, "prompt exceeds per-region queue capacity");
        return;
    }
    if (eligible.empty()) {
        proxy_backlog_.push_back(seq);
        if (!proxy_retry_scheduled_) {
            proxy_retry_scheduled_ = true;
            push(now + ms_to_us(cfg_.proxy.retry_backoff_ms), kPrioProxyRetry, EvKind::kProxyRetry);
        }
        return;
    }

    IndexOverlap overlaps(proxy_index_);
    CentralDecision cd = route_central(rt.req, states, overlaps, proxy_rtt_, proxy_cost_, &eligible);

    Decision d;
    d.kind = DecisionKind::kForward;
    d.target = cd.region_id;
    d.chosen_cost_ms = cd.cost_ms;
    for (auto& cs : cd.scored) d.scored.push_back(std::move(cs));
    rt.trace.hops.back().decision = std::move(d);

    int target = region_index(cd.region_id);
    // The proxy learns placements from its own routing decisions.
    proxy_index_.insert(rt.req.tokens, cd.region_id, static_cast<std::uint64_t>(now));
    forward(seq, -1, target, now);
}

void Simulation::on_proxy_retry(const Ev& e) {
    proxy_retry_scheduled_ = false;
    if (proxy_backlog_.empty()) return;
    std::deque<std::uint64_t> pending;
    pending.swap(proxy_backlog_);
    ++totals_.proxy_retries;
    for (std::uint64_t seq : pending) {
        log(e.at, EventKind::kProxyRetry, requests_[seq].req.id, "proxy");
        route_via_proxy(seq, e.at);
    }
}

void Simulation::on_hop_delivery(const Ev& e) {
    RequestRt& rt = requests_[e.req];
    RegionRt& r = regions_[static_cast<std::size_t>(e.region)];
    log(e.at, EventKind::kHopDelivery, rt.req.id, r.cfg.id,
        e.from >= 0 ? regions_[static_cast<std::size_t>(e.from)].cfg.id : "proxy");

    if (cfg_.policy.strategy == Strategy::kGorgoProxy) {
        // No per-region balancer in proxy mode: admit or queue directly.
        record_hop(rt.trace, r.cfg.id, e.at);
        rt.req.hop_trace.push_back(Hop{r.cfg.id, e.at, -1});
        if (r.be.waiting_tokens + rt.req.prompt_tokens() > cfg_.policy.max_queue_tokens) {
            reject(e.req, e.region, e.at, "queue full at delivery");
            return;
        }
        enqueue_backend(e.req, e.region, e.at);
        return;
    }
    ingress(e.req, e.region, e.at);
}

void Simulation::admit_waiting(int region, MicroTs now) {
    RegionRt& r = regions_[static_cast<std::size_t>(region)];
    while (r.be.running < r.cfg.backend.max_running && !r.be.waiting.empty()) {
        std::uint64_t seq = r.be.waiting.front();
        r.be.waiting.pop_front();
        RequestRt& rt = requests_[seq];
        r.be.waiting_tokens -= rt.req.prompt_tokens();
        ++r.be.running;
        r.be.batch_tokens += rt.req.prompt_tokens();
        if (!rt.filler) ++r.agg.handled;

        std::int64_t overlap = 0;
        if (r.cfg.backend.prefix_caching && !rt.req.tokens.empty())
            overlap = r.be.cache.overlap_for_node(rt.req.tokens, r.cfg.id);
        std::int64_t residual = rt.req.prompt_tokens() - overlap;
        rt.residual_tokens = residual;
        r.be.prefilling_tokens += residual;

        rt.trace.admitted_at_us = now;
        rt.trace.serving_region = r.cfg.id;
        rt.trace.overlap_tokens = overlap;
        log(now, EventKind::kAdmitToBatch, rt.req.id, r.cfg.id, "", rt.req.prompt_tokens(), overlap);

        double prefill_ms = r.cfg.backend.prefill.intercept_ms +
                            r.cfg.backend.prefill.slope_ms_per_token * static_cast<double>(residual);
        push(now + ms_to_us(prefill_ms), kPrioPrefillDone, EvKind::kPrefillDone, seq, region);
    }
}

void Simulation::on_decode_tick(const Ev& e) {
    RegionRt& r = regions_[static_cast<std::size_t>(e.region)];
    r.be.tick_scheduled = false;
    log(e.at, EventKind::kDecodeTick, "", r.cfg.id);
    admit_waiting(e.region, e.at);
}

void Simulation::on_prefill_done(const Ev& e) {
    RegionRt& r = regions_[static_cast<std::size_t>(e.region)];
    RequestRt& rt = requests_[e.req];
    rt.trace.first_token_at_us = e.at;
    r.be.prefilling_tokens -= rt.residual_tokens;
    rt.residual_tokens = 0;
    log(e.at, EventKind::kPrefillDone, rt.req.id, r.cfg.id);

    if (r.cfg.backend.prefix_caching && !rt.req.tokens.empty())
        r.be.cache.insert(rt.req.tokens, r.cfg.id, static_cast<std::uint64_t>(e.at));

    MicroTs done_at = e.at;
    if (rt.req.output_tokens > 0) done_at += rt.req.output_tokens * r.itl_us;
    push(done_at, kPrioRequestDone, EvKind::kRequestDone, e.req, e.region);
}

void Simulation::on_request_done(const Ev& e) {
    RegionRt& r = regions_[static_cast<std::size_t>(e.region)];
    RequestRt& rt = requests_[e.req];
    --r.be.running;
    r.be.batch_tokens -= rt.req.prompt_tokens();
    log(e.at, EventKind::kRequestDone, rt.req.id, r.cfg.id);

    finalize(rt.trace, rt.trace.first_token_at_us, e.at);
    if (!rt.filler) ++totals_.completed;
    make_terminal(e.req, e.at);

    if (!r.be.waiting.empty()) schedule_tick(e.region, e.at);
}

void Simulation::on_gossip_broadcast(const Ev& e) {
    ++gossip_round_;
    for (std::size_t from = 0; from < regions_.size(); ++from) {
        PeerSummary snapshot;
        snapshot.region_id = regions_[from].cfg.id;
        snapshot.state = live_state(static_cast<int>(from));
        snapshot.as_of_us = e.at;
        std::shared_ptr<const PrefixIndex> digest;
        if (cfg_.prefix_index.mirror_peer_prefixes)
            digest = std::make_shared<const PrefixIndex>(regions_[from].be.cache);
        for (std::size_t to = 0; to < regions_.size(); ++to) {
            if (to == from) continue;
            double base = cfg_.network.rtt_ms[from][to];
            double sample = base;
            if (cfg_.network.jitter_fraction > 0.0) {
                double u = rng::hashed_unit(jitter_seed_ ^ 0x676f73736970ULL,
                                            gossip_round_ * regions_.size() + from, to);
                sample = base * (1.0 + cfg_.network.jitter_fraction * (2.0 * u - 1.0));
            }
            PendingGossip pg;
            pg.to = static_cast<int>(to);
            pg.from = static_cast<int>(from);
            pg.summary = snapshot;
            pg.summary.prefix_summary = digest;
            pg.rtt_sample = sample;
            pending_gossip_.push_back(std::move(pg));
            push(e.at + ms_to_us(sample), kPrioGossipRefresh, EvKind::kGossipDelivery, 0,
                 static_cast<int>(to), static_cast<int>(from), pending_gossip_.size() - 1);
        }
    }
    // Keep refreshing while work is pending or the injection window is open.
    MicroTs next = e.at + ms_to_us(cfg_.gossip.interval_ms);
    if (next <= duration_us_ || active_requests_ > 0)
        push(next, kPrioGossipBroadcast, EvKind::kGossipBroadcast);
}

void Simulation::on_gossip_delivery(const Ev& e) {
    PendingGossip& pg = pending_gossip_[e.payload];
    RegionRt& to = regions_[static_cast<std::size_t>(pg.to)];
    const std::string& from_id = regions_[static_cast<std::size_t>(pg.from)].cfg.id;
    log(e.at, EventKind::kGossipRefresh, "", to.cfg.id, from_id);

    bool first = !to.peer_seen[from_id];
    PeerSummary& entry = to.peers[from_id];
    double prev_rtt = entry.rtt_ms;
    entry = pg.summary;
    entry.rtt_ms = rtt_ema_update(prev_rtt, pg.rtt_sample, 0.3, first);
    to.peer_seen[from_id] = true;
    pg.summary.prefix_summary.reset();
}

void Simulation::evaluate_stage(MicroTs now) {
    if (!sweep_ || sweep_stopped_ || current_stage_ < 0) return;
    StageInfo& info = stages_[static_cast<std::size_t>(current_stage_)];
    info.p99_ttft_ms = stage_ttfts_.empty() ? 0.0 : aggregate(stage_ttfts_).p99;
    info.any_rejection = stage_rejection_;

    double stage0_p99 = stages_.front().p99_ttft_ms;
    if (sweep_->should_stop(current_stage_, info.p99_ttft_ms, stage0_p99, stage_rejection_)) {
        sweep_stopped_ = true;
        info.stop_reason = stage_rejection_ ? "rejection"
                           : (current_stage_ + 1 >= cfg_.workload.sweep.max_stages ? "max_stages"
                                                                                   : "p99_degraded");
        return;
    }
    // Next stage starts on the next whole second after evaluation.
    MicroTs start = ((now / 1'000'000) + 1) * 1'000'000;
    if (start >= duration_us_) {
        sweep_stopped_ = true;
        info.stop_reason = "duration_cap";
        return;
    }
    push(start, kPrioStageStart, EvKind::kStageStart, 0, 0, -1,
         static_cast<std::uint64_t>(current_stage_ + 1));
}

void Simulation::on_stage_start(const Ev& e) {
    int stage_index = static_cast<int>(e.payload);
    current_stage_ = stage_index;
    stage_ttfts_.clear();
    stage_rejection_ = false;
    stage_outstanding_ = 0;

    SweepDriver::Stage stage = sweep_->stage_arrivals(stage_index, e.at);
    StageInfo info;
    info.index = stage_index;
    info.rate_per_s = stage.rate_per_s;
    info.start_us = e.at;
    info.requests = static_cast<std::int64_t>(stage.arrivals.size());
    stages_.push_back(info);

    log(e.at, EventKind::kStageStart, "", "", "", -1, -1, stage_index);
    for (const auto& a : stage.arrivals) {
        std::uint64_t seq = new_request(a);
        requests_[seq].stage = stage_index;
        ++totals_.injected;
        ++stage_outstanding_;
        push(a.at_us, kPrioArrival, EvKind::kArrival, seq);
    }
}

void Simulation::sample_queues_until(MicroTs t) {
    while (next_sample_us_ < t) {
        for (auto& r : regions_)
            r.agg.queue_depth.emplace_back(next_sample_us_,
                                           static_cast<std::int64_t>(r.be.waiting.size()));
        next_sample_us_ += sample_interval_us_;
    }
}

SimResult Simulation::run() {
    duration_us_ = ms_to_us(cfg_.workload.duration_s * 1000.0);
    sample_interval_us_ = ms_to_us(cfg_.telemetry.queue_sample_interval_ms);
    jitter_seed_ = rng::derive_seed(cfg_.seed, "jitter");

    init_regions();
    seed_caches();
    seed_fillers();
    warm_start_peers();
    inject_workload();
    push(0, kPrioGossipBroadcast, EvKind::kGossipBroadcast);

    MicroTs now = 0;
    std::uint64_t processed = 0;
    while (!queue_.empty()) {
        Ev e = queue_.top();
        if (!cfg_.drain && e.at > duration_us_) break;
        queue_.pop();
        now = std::max(now, e.at);
        sample_queues_until(e.at);

        if (++processed > 50'000'000)
            throw DataError("simulation exceeded event budget; runaway config?");

        switch (e.kind) {
            case EvKind::kArrival: on_arrival(e); break;
            case EvKind::kHopDelivery: on_hop_delivery(e); break;
            case EvKind::kPrefillDone: on_prefill_done(e); break;
            case EvKind::kRequestDone: on_request_done(e); break;
            case EvKind::kDecodeTick: on_decode_tick(e); break;
            case EvKind::kGossipBroadcast: on_gossip_broadcast(e); break;
            case EvKind::kGossipDelivery: on_gossip_delivery(e); break;
            case EvKind::kProxyRetry: on_proxy_retry(e); break;
            case EvKind::kStageStart: on_stage_start(e); break;
        }
    }
    MicroTs horizon = std::max(now, duration_us_);
    sample_queues_until(horizon + 1);

    SimResult result;
    result.report = build_report(horizon);
    result.events = std::move(log_);
    result.stages = stages_;
    return result;
}

RunReport Simulation::build_report(MicroTs horizon) {
    RunReport report;
    report.policy = strategy_to_string(cfg_.policy.strategy);
    report.config_digest = config_digest(cfg_);
    report.seed = cfg_.seed;

    std::vector<RequestTrace> traces;
    traces.reserve(requests_.size());
    std::int64_t in_flight = 0;
    std::int64_t fallbacks = 0;
    for (const auto& rt : requests_) {
        if (rt.filler) continue;
        if (!rt.terminal) ++in_flight;
        if (rt.req.origin_fallback) ++fallbacks;
        traces.push_back(rt.trace);
    }
    totals_.in_flight = in_flight;
    totals_.origin_fallbacks = fallbacks;
    totals_.horizon_us = horizon;

    report.metrics = compute_metrics(traces);
    report.totals = totals_;
    for (const auto& r : regions_) report.regions.push_back(r.agg);
    if (cfg_.telemetry.include_traces) report.traces = std::move(traces);
    return report;
}

}  // namespace

SimResult run_simulation(const SimConfig& config) {
    Simulation sim(config);
    return sim.run();
}

}  // namespace gorgo

#include "gorgo/policy.hpp"

#include <algorithm>
#include <limits>

namespace gorgo {

Strategy strategy_from_string(const std::string& s) {
    if (s == "least_load") return Strategy::kLeastLoad;
    if (s == "prefix_trie") return Strategy::kPrefixTrie;
    if (s == "gorgo") return Strategy::kGorgo;
    if (s == "gorgo_proxy") return Strategy::kGorgoProxy;
    throw ConfigError("unknown strategy '" + s +
                      "' (expected least_load, prefix_trie, gorgo or gorgo_proxy)");
}

std::string strategy_to_string(Strategy s) {
    switch (s) {
        case Strategy::kLeastLoad: return "least_load";
        case Strategy::kPrefixTrie: return "prefix_trie";
        case Strategy::kGorgo: return "gorgo";
        case Strategy::kGorgoProxy: return "gorgo_proxy";
    }
    return "?";
}

std::string decision_kind_to_string(DecisionKind k) {
    switch (k) {
        case DecisionKind::kServeLocal: return "serve_local";
        case DecisionKind::kForward: return "forward";
        case DecisionKind::kQueueLocal: return "queue_local";
        case DecisionKind::kReject: return "reject";
    }
    return "?";
}

bool local_has_capacity(const RegionState& state, const PolicyConfig& cfg) {
    return state.running_requests < cfg.running_threshold &&
           state.kv_cache_used_fraction < cfg.kv_cache_limit;
}

namespace {

std::int64_t load_of(const PeerSummary& p, const PolicyConfig& cfg) {
    if (cfg.load_metric == PolicyConfig::LoadMetric::kRequests)
        return p.state.running_requests + p.state.waiting_requests;
    return p.state.pending_tokens();
}

std::int64_t clamped_overlap(const OverlapProvider& overlaps, const Request& req,
                             const std::string& node_id) {
    std::int64_t o = overlaps.overlap(req.tokens, node_id);
    return std::min(o, req.prompt_tokens());
}

// Queue room for accepting one more request into the local waiting queue.
bool queue_has_room(const RegionState& state, const Request& req, const PolicyConfig& cfg) {
    return state.waiting_tokens + req.prompt_tokens() <= cfg.max_queue_tokens;
}

}  // namespace

std::optional<std::string> select_peer_least_load(std::span<const PeerSummary> peers,
                                                  const PolicyConfig& cfg) {
    const PeerSummary* best = nullptr;
    std::int64_t best_load = 0;
    for (const auto& p : peers) {
        std::int64_t load = load_of(p, cfg);
        if (best == nullptr || load < best_load ||
            (load == best_load &&
             (p.rtt_ms < best->rtt_ms || (p.rtt_ms == best->rtt_ms && p.region_id < best->region_id)))) {
            best = &p;
            best_load = load;
        }
    }
    if (best == nullptr) return std::nullopt;
    return best->region_id;
}

std::optional<std::string> select_peer_prefix_trie(const Request& req,
                                                   std::span<const PeerSummary> peers,
                                                   const OverlapProvider& overlaps,
                                                   const PolicyConfig& cfg) {
    if (peers.empty()) return std::nullopt;
    const PeerSummary* best = nullptr;
    std::int64_t best_overlap = 0;
    for (const auto& p : peers) {
        std::int64_t o = clamped_overlap(overlaps, req, p.region_id);
        if (best == nullptr || o > best_overlap ||
            (o == best_overlap && p.region_id < best->region_id)) {
            best = &p;
            best_overlap = o;
        }
    }
    if (best_overlap == 0) return select_peer_least_load(peers, cfg);
    return best->region_id;
}

std::optional<GorgoChoice> select_peer_gorgo(const Request& req, const RegionState& local,
                                             std::span<const PeerSummary> peers,
                                             const OverlapProvider& overlaps,
                                             const PolicyConfig& cfg, MicroTs now_us,
                                             bool include_local) {
    std::vector<CandidateScore> scored;
    scored.reserve(peers.size() + 1);

    // Local-queue option: no forwarding hop, fresh state by definition.
    if (include_local) {
        PeerSummary self;
        self.region_id = local.region_id;
        self.rtt_ms = 0.0;
        self.state = local;
        self.as_of_us = now_us;
        CandidateScore cs;
        cs.region_id = local.region_id;
        cs.is_local = true;
        cs.overlap_tokens = clamped_overlap(overlaps, req, local.region_id);
        cs.pending_tokens = local.pending_tokens();
        cs.cost = estimate_cost(self, req.prompt_tokens(), cs.overlap_tokens, cfg.cost, now_us,
                                cfg.staleness);
        scored.push_back(std::move(cs));
    }

    for (const auto& p : peers) {
        CandidateScore cs;
        cs.region_id = p.region_id;
        cs.overlap_tokens = clamped_overlap(overlaps, req, p.region_id);
        cs.pending_tokens = p.state.pending_tokens();
        cs.cost = estimate_cost(p, req.prompt_tokens(), cs.overlap_tokens, cfg.cost, now_us,
                                cfg.staleness);
        if (cfg.stale_exclude_after_ms > 0.0 &&
            us_to_ms(now_us - p.as_of_us) > cfg.stale_exclude_after_ms) {
            continue;  // hard exclusion bound
        }
        scored.push_back(std::move(cs));
    }
    if (scored.empty()) return std::nullopt;

    const CandidateScore* best = nullptr;
    for (const auto& cs : scored) {
        if (best == nullptr || cs.cost.total_ms < best->cost.total_ms ||
            (cs.cost.total_ms == best->cost.total_ms &&
             (cs.cost.network_ms < best->cost.network_ms ||
              (cs.cost.network_ms == best->cost.network_ms && cs.region_id < best->region_id)))) {
            best = &cs;
        }
    }

    GorgoChoice choice;
    choice.region_id = best->region_id;
    choice.is_local = best->is_local;
    choice.cost_ms = best->cost.total_ms;
    choice.scored = std::move(scored);
    return choice;
}

namespace {

// Observability: baselines don't act on costs, but decisions still carry the
// per-candidate breakdown table.
std::vector<CandidateScore> score_all(const Request& req, const RegionState& local,
                                      std::span<const PeerSummary> peers,
                                      const OverlapProvider& overlaps, const PolicyConfig& cfg,
                                      MicroTs now_us) {
    auto choice = select_peer_gorgo(req, local, peers, overlaps, cfg, now_us);
    if (!choice) return {};
    return std::move(choice->scored);
}

double cost_for(const std::vector<CandidateScore>& scored, const std::string& region) {
    for (const auto& cs : scored)
        if (cs.region_id == region) return cs.cost.total_ms;
    return 0.0;
}

}  // namespace

Decision handle_request(const Request& req, const RegionState& local,
                        std::span<const PeerSummary> peers, const OverlapProvider& overlaps,
                        const PolicyConfig& cfg, MicroTs now_us) {
    Decision d;

    // Admission short-circuit: an idle-enough region serves immediately,
    // whatever the strategy.
    if (local_has_capacity(local, cfg)) {
        d.kind = DecisionKind::kServeLocal;
        d.target = local.region_id;
        d.scored = score_all(req, local, peers, overlaps, cfg, now_us);
        d.chosen_cost_ms = cost_for(d.scored, local.region_id);
        return d;
    }

    const bool hops_left = req.hop_count() < cfg.max_hops;
    const bool room = queue_has_room(local, req, cfg);

    if (cfg.strategy == Strategy::kGorgo || cfg.strategy == Strategy::kGorgoProxy) {
        auto choice = select_peer_gorgo(req, local, peers, overlaps, cfg, now_us);
        if (choice) {
            d.scored = choice->scored;
            d.chosen_cost_ms = choice->cost_ms;
            if (!choice->is_local && hops_left) {
                d.kind = DecisionKind::kForward;
                d.target = choice->region_id;
                return d;
            }
            // Staying is at least as cheap as every peer, or the hop budget
            // is spent.
            if (room) {
                d.kind = DecisionKind::kQueueLocal;
                d.target = local.region_id;
                return d;
            }
            if (hops_left && !peers.empty()) {
                // Queue full locally: forward to the best non-local candidate.
                const CandidateScore* best_peer = nullptr;
                for (const auto& cs : d.scored) {
                    if (cs.is_local) continue;
                    if (best_peer == nullptr || cs.cost.total_ms < best_peer->cost.total_ms ||
                        (cs.cost.total_ms == best_peer->cost.total_ms && cs.region_id < best_peer->region_id))
                        best_peer = &cs;
                }
                if (best_peer != nullptr) {
                    d.kind = DecisionKind::kForward;
                    d.target = best_peer->region_id;
                    d.chosen_cost_ms = best_peer->cost.total_ms;
                    return d;
                }
            }
            d.kind = DecisionKind::kReject;
            d.cause = "saturated: local queue full, no forward option";
            return d;
        }
        // No scorable candidate (all peers hard-excluded): fall through to
        // the queue-or-reject path.
        if (room) {
            d.kind = DecisionKind::kQueueLocal;
            d.target = local.region_id;
            return d;
        }
        d.kind = DecisionKind::kReject;
        d.cause = "saturated: no admissible candidate";
        return d;
    }

    // Naive baselines: forward whenever capacity is exhausted and the hop
    // budget allows; queue locally otherwise.
    d.scored = score_all(req, local, peers, overlaps, cfg, now_us);
    std::optional<std::string> target;
    if (hops_left && !peers.empty()) {
        if (cfg.strategy == Strategy::kLeastLoad)
            target = select_peer_least_load(peers, cfg);
        else
            target = select_peer_prefix_trie(req, peers, overlaps, cfg);
    }
    if (target) {
        d.kind = DecisionKind::kForward;
        d.target = *target;
        d.chosen_cost_ms = cost_for(d.scored, *target);
        return d;
    }
    if (room) {
        d.kind = DecisionKind::kQueueLocal;
        d.target = local.region_id;
        d.chosen_cost_ms = cost_for(d.scored, local.region_id);
        return d;
    }
    d.kind = DecisionKind::kReject;
    d.cause = "saturated: local queue full, no forward option";
    return d;
}

CentralDecision route_central(const Request& req, std::span<const RegionState> states,
                              const OverlapProvider& global_overlaps,
                              const std::map<std::string, double>& rtt_from_proxy,
                              const CostParams& params,
                              const std::vector<std::string>* eligible) {
    if (states.empty()) throw ConfigError("route_central: no regions");

    CentralDecision d;
    const CandidateScore* best = nullptr;
    d.scored.reserve(states.size());
    for (const auto& st : states) {
        if (eligible != nullptr &&
            std::find(eligible->begin(), eligible->end(), st.region_id) == eligible->end())
            continue;
        PeerSummary cand;
        cand.region_id = st.region_id;
        auto it = rtt_from_proxy.find(st.region_id);
        cand.rtt_ms = it == rtt_from_proxy.end() ? 0.0 : it->second;
        cand.state = st;

        CandidateScore cs;
        cs.region_id = st.region_id;
        cs.overlap_tokens = std::min(global_overlaps.overlap(req.tokens, st.region_id),
                                     req.prompt_tokens());
        cs.pending_tokens = st.pending_tokens();
        // The proxy's view is live; staleness does not apply.
        cs.cost = estimate_cost(cand, req.prompt_tokens(), cs.overlap_tokens, params, 0);
        d.scored.push_back(std::move(cs));
    }
    if (d.scored.empty()) {
        d.region_id.clear();
        return d;
    }
    for (const auto& cs : d.scored) {
        if (best == nullptr || cs.cost.total_ms < best->cost.total_ms ||
            (cs.cost.total_ms == best->cost.total_ms &&
             (cs.cost.network_ms < best->cost.network_ms ||
              (cs.cost.network_ms == best->cost.network_ms && cs.region_id < best->region_id)))) {
            best = &cs;
        }
    }
    d.region_id = best->region_id;
    d.cost_ms = best->cost.total_ms;
    return d;
}

}  // namespace gorgo

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gorgo/cost.hpp"
#include "gorgo/geo.hpp"
#include "gorgo/prefix_index.hpp"
#include "gorgo/state.hpp"
#include "gorgo/types.hpp"

namespace gorgo {

enum class Strategy { kLeastLoad, kPrefixTrie, kGorgo, kGorgoProxy };

Strategy strategy_from_string(const std::string& s);  // throws ConfigError
std::string strategy_to_string(Strategy s);

struct Hop {
    std::string region;
    MicroTs ingress_us = 0;
    MicroTs egress_us = -1;  // -1 while the request is still at this hop
};

struct Request {
    std::string id;
    std::uint64_t seq = 0;
    TokenSeq tokens;
    GeoPoint origin;
    MicroTs created_at_us = 0;
    std::vector<Hop> hop_trace;
    std::int64_t output_tokens = 0;
    std::uint64_t prompt_hash = 0;
    bool origin_fallback = false;

    std::int64_t prompt_tokens() const { return static_cast<std::int64_t>(tokens.size()); }
    int hop_count() const { return static_cast<int>(hop_trace.size()) - 1; }
};

enum class DecisionKind { kServeLocal, kForward, kQueueLocal, kReject };

std::string decision_kind_to_string(DecisionKind k);

struct CandidateScore {
    std::string region_id;
    CostBreakdown cost;
    std::int64_t overlap_tokens = 0;
    std::int64_t pending_tokens = 0;
    bool is_local = false;
};

struct Decision {
    DecisionKind kind = DecisionKind::kReject;
    std::string target;                   // forward target region
    std::vector<CandidateScore> scored;   // every candidate considered
    double chosen_cost_ms = 0.0;
    std::string cause;                    // reject cause, empty otherwise
};

struct PolicyConfig {
    Strategy strategy = Strategy::kGorgo;
    int max_hops = 2;
    std::int64_t running_threshold = 10;
    double kv_cache_limit = 0.9;
    std::int64_t max_queue_tokens = 32768;
    CostParams cost;
    StalenessPolicy staleness;
    double stale_exclude_after_ms = 0.0;  // 0 = never hard-exclude stale peers
    enum class LoadMetric { kTokens, kRequests };
    LoadMetric load_metric = LoadMetric::kTokens;
};

/// Prefix-overlap estimates for the decision path. Implemented directly by a
/// PrefixIndex adapter or by the simulator's composite of the local index plus
/// gossiped peer digests.
class OverlapProvider {
public:
    virtual ~OverlapProvider() = default;
    virtual std::int64_t overlap(std::span<const Token> tokens, const std::string& node_id) const = 0;
};

class IndexOverlap final : public OverlapProvider {
public:
    explicit IndexOverlap(const PrefixIndex& index) : index_(&index) {}
    std::int64_t overlap(std::span<const Token> tokens, const std::string& node_id) const override {
        return index_->overlap_for_node(tokens, node_id);
    }

private:
    const PrefixIndex* index_;
};

bool local_has_capacity(const RegionState& state, const PolicyConfig& cfg);

// Minimal pending load (tokens or requests per cfg); ties by lower rtt_ms,
// then lexicographic id. nullopt when `peers` is empty.
std::optional<std::string> select_peer_least_load(std::span<const PeerSummary> peers,
                                                  const PolicyConfig& cfg);

// Maximal prefix overlap; ties by lexicographic id; zero overlap everywhere
// falls back to least-load.
std::optional<std::string> select_peer_prefix_trie(const Request& req,
                                                   std::span<const PeerSummary> peers,
                                                   const OverlapProvider& overlaps,
                                                   const PolicyConfig& cfg);

struct GorgoChoice {
    std::string region_id;
    bool is_local = false;
    double cost_ms = 0.0;
    std::vector<CandidateScore> scored;
};

// Argmin of estimate_cost over {local-queue option} + peers. The local
// candidate is scored with network_ms = 0 and can be dropped from the set
// (include_local = false) when the local queue is not an option. nullopt when
// every candidate is stale beyond the hard exclusion bound or the set is
// empty.
std::optional<GorgoChoice> select_peer_gorgo(const Request& req, const RegionState& local,
                                             std::span<const PeerSummary> peers,
                                             const OverlapProvider& overlaps,
                                             const PolicyConfig& cfg, MicroTs now_us,
                                             bool include_local = true);

// The per-request decision at one load balancer.
Decision handle_request(const Request& req, const RegionState& local,
                        std::span<const PeerSummary> peers, const OverlapProvider& overlaps,
                        const PolicyConfig& cfg, MicroTs now_us);

struct CentralDecision {
    std::string region_id;
    double cost_ms = 0.0;
    std::vector<CandidateScore> scored;
};

// Single-shot scoring over every region from a centralized vantage point with
// a global prefix view and live queue mirrors; no hop chain.
// `eligible` (optional) restricts candidates, e.g. to regions with queue room.
CentralDecision route_central(const Request& req, std::span<const RegionState> states,
                              const OverlapProvider& global_overlaps,
                              const std::map<std::string, double>& rtt_from_proxy,
                              const CostParams& params,
                              const std::vector<std::string>* eligible = nullptr);

}  // namespace gorgo

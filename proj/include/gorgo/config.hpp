#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gorgo/cost.hpp"
#include "gorgo/geo.hpp"
#include "gorgo/policy.hpp"
#include "gorgo/workload.hpp"

#include "json.hpp"

namespace gorgo {

/// Mock continuous-batching backend: iteration-level admission on an itl_ms
/// tick grid, prefill duration intercept + slope * residual tokens, constant
/// inter-token latency during decode.
struct BackendModel {
    std::int64_t max_running = 10;
    Calibration prefill{150.72, 0.0938, 1.0, 0};
    double itl_ms = 12.5;
    std::int64_t kv_capacity_tokens = 131072;
    bool prefix_caching = true;
};

/// Pre-warmed cache contents: the region starts out holding `fraction` of
/// synthetic shared prefix `prefix_id`.
struct CacheSeed {
    int prefix_id = 0;
    double fraction = 1.0;
};

struct RegionConfig {
    std::string id;
    GeoPoint location;
    BackendModel backend;
    // Filler work present at t=0 (for reproducing instantaneous-state
    // scenarios): split into chunks of filler_chunk_tokens, each decoding
    // filler_output_tokens.
    std::int64_t initial_waiting_tokens = 0;
    std::int64_t filler_chunk_tokens = 650;
    std::int64_t filler_output_tokens = 256;
    std::vector<CacheSeed> cache_seeds;
};

struct NetworkModel {
    // Per-hop delivery latency between regions (ms), aligned with the config
    // region order; symmetric, diagonal = intra-region latency (default 0).
    std::vector<std::vector<double>> rtt_ms;
    double jitter_fraction = 0.0;  // multiplicative, uniform in [1-j, 1+j]
};

struct GossipConfig {
    double interval_ms = 500.0;
    bool warm_start = true;  // pre-populate peer tables at t=0
};

struct PrefixMirrorConfig {
    std::int64_t block_size = 16;
    bool mirror_peer_prefixes = true;  // use gossiped peer digests for overlap estimates
};

struct ProxyConfig {
    std::string colocated_region;  // defaults to the first region
    double retry_backoff_ms = 50.0;
    std::map<std::string, double> rtt_ms;  // defaults to the co-located region's matrix row
};

struct TelemetrySimConfig {
    double queue_sample_interval_ms = 1000.0;
    bool include_traces = true;
};

struct CostConfig {
    bool t_p_set = false;          // explicit t_p wins over the calibration slope
    double t_p_ms_per_token = 0.0;
    double t_p_scale = 1.0;        // multiplier on the calibration slope
    double q_s = 1.0;
    double base_latency_ms = 0.0;
};

struct PolicySimConfig {
    Strategy strategy = Strategy::kGorgo;
    int max_hops = 2;
    std::int64_t running_threshold = 10;
    double kv_cache_limit = 0.9;
    std::int64_t max_queue_tokens = 32768;
    CostConfig cost;
    bool stale_after_set = false;
    double stale_after_ms = 0.0;    // default 5x gossip interval
    bool stale_penalty_set = false;
    double stale_penalty_ms = 0.0;  // default 1x gossip interval
    double stale_exclude_after_ms = 0.0;
    PolicyConfig::LoadMetric load_metric = PolicyConfig::LoadMetric::kTokens;
};

struct SimConfig {
    int version = 1;
    std::uint64_t seed = 1;
    bool drain = true;
    std::vector<RegionConfig> regions;
    NetworkModel network;
    PolicySimConfig policy;
    WorkloadSpec workload;
    GossipConfig gossip;
    PrefixMirrorConfig prefix_index;
    ProxyConfig proxy;
    TelemetrySimConfig telemetry;
};

// Parsing reports the offending field path; validation failures throw
// ConfigError before any event runs.
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json sim_config_to_json(const SimConfig& c);
void validate_config(const SimConfig& c);
SimConfig load_config_file(const std::string& path);

// FNV-1a hex digest of the canonical config JSON with the strategy field
// blanked, so runs that differ only by strategy compare as identical.
std::string config_digest(const SimConfig& c);

}  // namespace gorgo

#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "gorgo/prefix_index.hpp"
#include "gorgo/types.hpp"

namespace gorgo {

/// Mirrored admission state of one serving region, as exported by its runtime
/// and gossiped to peers. running_tokens counts the remaining (not yet
/// prefilled) tokens of the running batch, so pending_tokens estimates the
/// prefill work ahead of a newly queued request.
struct RegionState {
    std::string region_id;
    std::int64_t running_requests = 0;
    std::int64_t running_tokens = 0;
    std::int64_t waiting_requests = 0;
    std::int64_t waiting_tokens = 0;
    double kv_cache_used_fraction = 0.0;   // in [0, 1]
    double t_p_measured_ms = 0.0;          // per-token prefill time, 0 = unknown

    std::int64_t pending_tokens() const { return running_tokens + waiting_tokens; }
};

/// One peer-table entry: the freshest gossiped snapshot of a remote region.
struct PeerSummary {
    std::string region_id;
    double rtt_ms = 0.0;                               // smoothed round-trip estimate
    RegionState state;                                 // snapshot, as of `as_of_us`
    std::shared_ptr<const PrefixIndex> prefix_summary; // may be null (no digest yet)
    MicroTs as_of_us = 0;
};

inline double rtt_ema_update(double current, double sample, double alpha, bool first) {
    return first ? sample : alpha * sample + (1.0 - alpha) * current;
}

}  // namespace gorgo

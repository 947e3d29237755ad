#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gorgo/config.hpp"
#include "gorgo/telemetry.hpp"
#include "gorgo/types.hpp"

namespace gorgo {

enum class EventKind {
    kArrival,
    kHopDelivery,
    kAdmitToBatch,
    kPrefillDone,
    kDecodeTick,
    kRequestDone,
    kGossipRefresh,
    kReject,
    kProxyRetry,
    kStageStart,
};

std::string event_kind_to_string(EventKind k);

/// One processed simulator event, in processing order. Only integer and
/// string fields so JSONL export is byte-stable.
struct LoggedEvent {
    MicroTs at_us = 0;
    EventKind kind = EventKind::kArrival;
    std::string req;     // request id, "" for region-only events
    std::string region;  // primary region ("proxy" for proxy-side events)
    std::string from;    // source region for deliveries / gossip
    std::int64_t tokens = -1;
    std::int64_t overlap = -1;
    std::int64_t stage = -1;
};

struct StageInfo {
    int index = 0;
    double rate_per_s = 0.0;
    MicroTs start_us = 0;
    std::int64_t requests = 0;
    double p99_ttft_ms = 0.0;
    bool any_rejection = false;
    std::string stop_reason;  // set on the final stage
};

struct SimResult {
    std::vector<LoggedEvent> events;
    RunReport report;
    std::vector<StageInfo> stages;  // sweep runs only
};

/// Deterministic discrete-event simulation of the multi-region deployment.
/// Identical (config, seed) produces a bit-identical event log and report.
SimResult run_simulation(const SimConfig& config);

// One event per line, fixed field order.
std::string export_event_log_jsonl(std::span<const LoggedEvent> events);

}  // namespace gorgo

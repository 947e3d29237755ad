#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gorgo/policy.hpp"
#include "gorgo/types.hpp"

#include "json.hpp"

namespace gorgo {

/// Aggregate statistics in the benchmark-table column layout. Percentiles are
/// nearest-rank (value at index ceil(q*n), 1-based, ascending); std dev is the
/// population form. Empty inputs give count 0 and null statistics.
struct SummaryStats {
    std::int64_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double std_dev = 0.0;
    double min = 0.0;
    double max = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    double p95 = 0.0;
    double p99 = 0.0;
};

SummaryStats aggregate(std::span<const double> values);

/// Per-request trace: hop sequence, admission/prefill timing and the routing
/// decision record taken at each hop.
struct HopRecord {
    std::string region;
    MicroTs ingress_us = 0;
    MicroTs egress_us = -1;  // -1 until the request leaves this hop
    Decision decision;
};

struct RequestTrace {
    std::string id;
    std::uint64_t seq = 0;
    MicroTs created_at_us = 0;
    std::vector<HopRecord> hops;
    MicroTs admitted_at_us = -1;
    MicroTs first_token_at_us = -1;
    MicroTs completed_at_us = -1;
    std::string serving_region;
    std::string status = "in_flight";  // in_flight | completed | rejected
    std::int64_t prompt_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t overlap_tokens = 0;  // cache overlap applied at admission
    bool origin_fallback = false;
    std::string reject_cause;

    double ttft_ms() const { return us_to_ms(first_token_at_us - created_at_us); }
};

// Appends a hop, validating timestamp monotonicity. Throws DataError on an
// out-of-order ingress.
HopRecord& record_hop(RequestTrace& trace, const std::string& region, MicroTs ingress_us);

// Marks completion and validates every ordering invariant. Throws DataError.
void finalize(RequestTrace& trace, MicroTs first_token_at_us, MicroTs completed_at_us);

void finalize_rejected(RequestTrace& trace, MicroTs at_us, const std::string& cause);

// Full invariant check (created <= ingress... <= admitted <= first token <=
// completed); throws DataError describing the violation.
void validate_trace(const RequestTrace& trace);

struct RegionAggregate {
    std::string region_id;
    std::int64_t handled = 0;        // requests admitted and prefillled here
    std::int64_t forwarded_out = 0;  // decisions that pushed a request away
    std::int64_t rejected = 0;
    // (time, waiting_requests) samples at the telemetry interval.
    std::vector<std::pair<MicroTs, std::int64_t>> queue_depth;
};

struct RunTotals {
    std::int64_t injected = 0;
    std::int64_t completed = 0;
    std::int64_t rejected = 0;
    std::int64_t in_flight = 0;
    std::int64_t forwards = 0;
    std::int64_t origin_fallbacks = 0;
    std::int64_t proxy_retries = 0;
    MicroTs horizon_us = 0;
};

/// The appendix-table metric set. Request latency is recorded in seconds
/// (the upstream tables' millisecond label is inconsistent with their own
/// magnitudes, so the unit is made explicit here).
struct RunMetrics {
    SummaryStats ttft_ms;
    SummaryStats inter_token_latency_ms;
    SummaryStats request_latency_s;
    SummaryStats time_per_output_token_ms;
    SummaryStats tokens_per_s;
    SummaryStats output_tokens_per_s;
    SummaryStats prompt_tokens_per_s;
    SummaryStats requests_per_s;
};

struct RunReport {
    int schema_version = 1;
    std::string policy;
    std::string config_digest;
    std::uint64_t seed = 0;
    RunMetrics metrics;
    RunTotals totals;
    std::vector<RegionAggregate> regions;
    std::vector<RequestTrace> traces;
};

// Metric extraction from finalized traces. Rate metrics are trailing-1s
// window samples taken at each completion.
RunMetrics compute_metrics(std::span<const RequestTrace> traces);

nlohmann::ordered_json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
std::string render_report_table(const RunReport& report);

// Raw per-request TTFTs for external plotting: "request_id,ttft_ms".
std::string export_ttft_csv(std::span<const RequestTrace> traces);

struct PolicyComparison {
    std::string baseline;
    std::vector<std::string> policies;
    // metric key -> per-policy medians, aligned with `policies`.
    std::vector<std::string> metric_keys;
    std::vector<std::vector<double>> medians;  // [metric][policy]
    std::vector<std::vector<double>> means;    // [metric][policy]
    // baseline_median / policy_median per metric (speedup; >1 = better).
    std::vector<std::vector<double>> median_ratios;
    std::vector<double> ttft_median_ratio;  // surfaced separately, per policy
};

// Requires >= 2 reports with identical config digests (strategy excluded from
// the digest); throws DataError listing the digests otherwise.
PolicyComparison compare_policies(std::span<const RunReport> reports, const std::string& baseline);

nlohmann::ordered_json comparison_to_json(const PolicyComparison& c);
std::string render_comparison_table(const PolicyComparison& c);

// Bar-chart grid of per-metric medians (or means) across policies.
std::string render_comparison_svg(const PolicyComparison& c, bool use_means);

}  // namespace gorgo

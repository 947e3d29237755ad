#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gorgo/state.hpp"
#include "gorgo/types.hpp"

namespace gorgo {

/// Tunable weights of the routing cost model. t_p doubles as the measured
/// per-token prefill rate and as a runtime weight; base_latency is a fixed
/// per-request overhead that shifts every candidate equally and therefore
/// stays out of CostBreakdown totals (see estimated_ttft_ms).
struct CostParams {
    double t_p_ms_per_token = 0.0938;
    double q_s = 1.0;
    double base_latency_ms = 0.0;
};

/// Additive per-candidate cost: the three components occur sequentially, so
/// total is their exact sum.
struct CostBreakdown {
    double network_ms = 0.0;
    double prefill_ms = 0.0;
    double queue_ms = 0.0;
    double total_ms = 0.0;
    bool stale = false;  // summary older than the configured bound
};

/// Linear model of TTFT vs input tokens: ttft = intercept + slope * tokens.
struct Calibration {
    double intercept_ms = 0.0;
    double slope_ms_per_token = 0.0;
    double r_squared = 0.0;
    std::int64_t n = 0;
};

struct PrefillObservation {
    std::int64_t input_tokens = 0;
    double ttft_ms = 0.0;
};

/// Staleness handling for peer summaries: beyond `stale_after_ms` the
/// candidate is flagged and its queue estimate is padded by `penalty_ms`
/// (pessimism under uncertainty, not exclusion).
struct StalenessPolicy {
    double stale_after_ms = 0.0;  // 0 = staleness tracking disabled
    double penalty_ms = 0.0;
};

double saved_time_ms(std::int64_t hit_tokens, double t_p_ms_per_token);

// Throws DataError when hit_tokens > prompt_tokens (corrupt overlap estimate).
double residual_prefill_ms(std::int64_t prompt_tokens, std::int64_t hit_tokens,
                           double t_p_ms_per_token);

double queue_wait_ms(std::int64_t pending_tokens, double t_p_ms_per_token, double q_s);

CostBreakdown estimate_cost(const PeerSummary& candidate, std::int64_t request_tokens,
                            std::int64_t overlap_tokens, const CostParams& params,
                            MicroTs now_us, const StalenessPolicy& staleness = {});

/// Absolute-TTFT view of a breakdown: fixed overhead plus the relative cost.
inline double estimated_ttft_ms(const CostBreakdown& b, const CostParams& p) {
    return p.base_latency_ms + b.total_ms;
}

// Ordinary least squares of ttft_ms on input_tokens. Throws DataError on
// n < 2 or a degenerate design (all x identical).
Calibration fit_prefill_calibration(const std::vector<PrefillObservation>& observations);

// Plain record format: "input_tokens,ttft_ms" per line; one optional header
// line is skipped. Throws DataError with a line number on malformed rows.
std::vector<PrefillObservation> read_observations_csv(std::istream& in);
void write_observations_csv(const std::vector<PrefillObservation>& observations, std::ostream& out);

}  // namespace gorgo

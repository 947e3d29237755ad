#include "gorgo/cost.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace gorgo {

double saved_time_ms(std::int64_t hit_tokens, double t_p_ms_per_token) {
    if (hit_tokens < 0) throw DataError("saved_time: hit_tokens must be >= 0");
    if (!(t_p_ms_per_token > 0.0)) throw DataError("saved_time: t_p must be > 0");
    return static_cast<double>(hit_tokens) * t_p_ms_per_token;
}

double residual_prefill_ms(std::int64_t prompt_tokens, std::int64_t hit_tokens,
                           double t_p_ms_per_token) {
    if (hit_tokens < 0 || prompt_tokens < 0)
        throw DataError("residual_prefill: token counts must be >= 0");
    if (hit_tokens > prompt_tokens)
        throw DataError("residual_prefill: overlap " + std::to_string(hit_tokens) +
                        " exceeds prompt length " + std::to_string(prompt_tokens));
    if (!(t_p_ms_per_token > 0.0)) throw DataError("residual_prefill: t_p must be > 0");
    return static_cast<double>(prompt_tokens - hit_tokens) * t_p_ms_per_token;
}

double queue_wait_ms(std::int64_t pending_tokens, double t_p_ms_per_token, double q_s) {
    if (pending_tokens < 0) throw DataError("queue_wait: pending_tokens must be >= 0");
    if (q_s < 0.0) throw DataError("queue_wait: q_s must be >= 0");
    return q_s * static_cast<double>(pending_tokens) * t_p_ms_per_token;
}

CostBreakdown estimate_cost(const PeerSummary& candidate, std::int64_t request_tokens,
                            std::int64_t overlap_tokens, const CostParams& params,
                            MicroTs now_us, const StalenessPolicy& staleness) {
    if (!std::isfinite(candidate.rtt_ms) || candidate.rtt_ms < 0.0)
        throw DataError("estimate_cost: candidate " + candidate.region_id + " has invalid rtt");

    CostBreakdown b;
    b.network_ms = candidate.rtt_ms;
    b.prefill_ms = residual_prefill_ms(request_tokens, overlap_tokens, params.t_p_ms_per_token);
    b.queue_ms = queue_wait_ms(candidate.state.pending_tokens(), params.t_p_ms_per_token, params.q_s);

    if (staleness.stale_after_ms > 0.0) {
        double age_ms = us_to_ms(now_us - candidate.as_of_us);
        if (age_ms > staleness.stale_after_ms) {
            b.stale = true;
            b.queue_ms += staleness.penalty_ms;
        }
    }
    b.total_ms = b.network_ms + b.prefill_ms + b.queue_ms;
    return b;
}

Calibration fit_prefill_calibration(const std::vector<PrefillObservation>& observations) {
    const std::size_t n = observations.size();
    if (n < 2) throw DataError("calibration: need at least 2 observations, got " + std::to_string(n));

    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& o : observations) {
        mean_x += static_cast<double>(o.input_tokens);
        mean_y += o.ttft_ms;
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0;
    for (const auto& o : observations) {
        double dx = static_cast<double>(o.input_tokens) - mean_x;
        sxx += dx * dx;
        sxy += dx * (o.ttft_ms - mean_y);
    }
    if (sxx == 0.0) throw DataError("calibration: degenerate design, all input_tokens identical");

    Calibration c;
    c.slope_ms_per_token = sxy / sxx;
    c.intercept_ms = mean_y - c.slope_ms_per_token * mean_x;
    c.n = static_cast<std::int64_t>(n);

    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& o : observations) {
        double fit = c.intercept_ms + c.slope_ms_per_token * static_cast<double>(o.input_tokens);
        double dy = o.ttft_ms - fit;
        double dm = o.ttft_ms - mean_y;
        ss_res += dy * dy;
        ss_tot += dm * dm;
    }
    c.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    if (!std::isfinite(c.slope_ms_per_token))
        throw DataError("calibration: non-finite slope");
    return c;
}

std::vector<PrefillObservation> read_observations_csv(std::istream& in) {
    std::vector<PrefillObservation> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Strip trailing CR from CRLF files.
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError("calibration csv line " + std::to_string(lineno) + ": expected input_tokens,ttft_ms");
        try {
            std::size_t used = 0;
            long long x = std::stoll(line.substr(0, comma), &used);
            double y = std::stod(line.substr(comma + 1));
            out.push_back({x, y});
        } catch (const std::exception&) {
            if (lineno == 1) continue;  // header row
            throw DataError("calibration csv line " + std::to_string(lineno) + ": malformed row '" + line + "'");
        }
    }
    return out;
}

void write_observations_csv(const std::vector<PrefillObservation>& observations, std::ostream& out) {
    out << "input_tokens,ttft_ms\n";
    for (const auto& o : observations) out << o.input_tokens << ',' << o.ttft_ms << '\n';
}

}  // namespace gorgo

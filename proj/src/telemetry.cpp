#include "gorgo/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gorgo {

SummaryStats aggregate(std::span<const double> values) {
    SummaryStats s;
    s.count = static_cast<std::int64_t>(values.size());
    if (values.empty()) {
        s.mean = s.median = s.std_dev = s.min = s.max = s.p50 = s.p90 = s.p95 = s.p99 =
            std::numeric_limits<double>::quiet_NaN();
        return s;
    }

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    double sum = 0.0;
    for (double v : sorted) sum += v;
    s.mean = sum / static_cast<double>(sorted.size());

    double ss = 0.0;
    for (double v : sorted) {
        double d = v - s.mean;
        ss += d * d;
    }
    s.std_dev = std::sqrt(ss / static_cast<double>(sorted.size()));

    auto nearest_rank = [&sorted](double q) {
        auto n = static_cast<double>(sorted.size());
        auto idx = static_cast<std::size_t>(std::ceil(q * n));
        if (idx < 1) idx = 1;
        if (idx > sorted.size()) idx = sorted.size();
        return sorted[idx - 1];
    };

    s.min = sorted.front();
    s.max = sorted.back();
    s.p50 = nearest_rank(0.50);
    s.p90 = nearest_rank(0.90);
    s.p95 = nearest_rank(0.95);
    s.p99 = nearest_rank(0.99);
    s.median = s.p50;
    return s;
}

HopRecord& record_hop(RequestTrace& trace, const std::string& region, MicroTs ingress_us) {
    if (ingress_us < trace.created_at_us)
        throw DataError("trace " + trace.id + ": hop ingress precedes creation");
    if (!trace.hops.empty()) {
        const HopRecord& prev = trace.hops.back();
        if (prev.egress_us < 0)
            throw DataError("trace " + trace.id + ": new hop recorded before previous egress");
        if (ingress_us < prev.egress_us)
            throw DataError("trace " + trace.id + ": hop ingress precedes previous egress");
    }
    trace.hops.push_back(HopRecord{region, ingress_us, -1, {}});
    return trace.hops.back();
}

void finalize(RequestTrace& trace, MicroTs first_token_at_us, MicroTs completed_at_us) {
    trace.first_token_at_us = first_token_at_us;
    trace.completed_at_us = completed_at_us;
    trace.status = "completed";
    validate_trace(trace);
}

void finalize_rejected(RequestTrace& trace, MicroTs at_us, const std::string& cause) {
    trace.completed_at_us = at_us;
    trace.status = "rejected";
    trace.reject_cause = cause;
    validate_trace(trace);
}

void validate_trace(const RequestTrace& trace) {
    auto fail = [&trace](const std::string& what) {
        throw DataError("trace " + trace.id + ": " + what);
    };
    if (trace.hops.empty()) fail("no hops recorded");
    MicroTs prev = trace.created_at_us;
    for (std::size_t i = 0; i < trace.hops.size(); ++i) {
        const HopRecord& h = trace.hops[i];
        if (h.ingress_us < prev) fail("hop " + std::to_string(i) + " ingress out of order");
        prev = h.ingress_us;
        if (h.egress_us >= 0) {
            if (h.egress_us < h.ingress_us) fail("hop " + std::to_string(i) + " egress before ingress");
            prev = h.egress_us;
        }
    }
    if (trace.status == "rejected") return;
    MicroTs mark = prev;
    if (trace.admitted_at_us >= 0) {
        if (trace.admitted_at_us < mark) fail("admission precedes last hop");
        mark = trace.admitted_at_us;
    }
    if (trace.first_token_at_us >= 0) {
        if (trace.first_token_at_us < mark) fail("first token precedes admission");
        mark = trace.first_token_at_us;
    }
    if (trace.completed_at_us >= 0 && trace.completed_at_us < mark)
        fail("completion precedes first token");
    if (trace.status == "completed" && (trace.first_token_at_us < 0 || trace.completed_at_us < 0))
        fail("completed without terminal timestamps");
}

RunMetrics compute_metrics(std::span<const RequestTrace> traces) {
    RunMetrics m;

    std::vector<double> ttft, itl, latency_s, tpot;
    struct Done {
        MicroTs at;
        double out_tokens;
        double prompt_tokens;  // attributed at admission time
        MicroTs admitted_at;
    };
    std::vector<Done> done;

    for (const auto& t : traces) {
        if (t.status != "completed") continue;
        ttft.push_back(t.ttft_ms());
        latency_s.push_back(us_to_ms(t.completed_at_us - t.created_at_us) / 1000.0);
        if (t.output_tokens > 0)
            tpot.push_back(us_to_ms(t.completed_at_us - t.created_at_us) /
                           static_cast<double>(t.output_tokens));
        if (t.output_tokens > 1) {
            double gap = us_to_ms(t.completed_at_us - t.first_token_at_us) /
                         static_cast<double>(t.output_tokens - 1);
            for (std::int64_t i = 1; i < t.output_tokens; ++i) itl.push_back(gap);
        }
        done.push_back({t.completed_at_us, static_cast<double>(t.output_tokens),
                        static_cast<double>(t.prompt_tokens), t.admitted_at_us});
    }

    m.ttft_ms = aggregate(ttft);
    m.inter_token_latency_ms = aggregate(itl);
    m.request_latency_s = aggregate(latency_s);
    m.time_per_output_token_ms = aggregate(tpot);

    // Trailing-1s-window rates sampled at each completion.
    std::sort(done.begin(), done.end(), [](const Done& a, const Done& b) { return a.at < b.at; });
    std::vector<double> req_rate, out_rate, prompt_rate, tok_rate;
    constexpr MicroTs kWindow = 1'000'000;
    for (std::size_t i = 0; i < done.size(); ++i) {
        MicroTs lo = done[i].at - kWindow;
        double reqs = 0, outs = 0, prompts = 0;
        for (std::size_t j = i + 1; j-- > 0;) {
            if (done[j].at <= lo) break;
            reqs += 1.0;
            outs += done[j].out_tokens;
        }
        for (const auto& d : done) {
            if (d.admitted_at > lo && d.admitted_at <= done[i].at) prompts += d.prompt_tokens;
        }
        req_rate.push_back(reqs);
        out_rate.push_back(outs);
        prompt_rate.push_back(prompts);
        tok_rate.push_back(outs + prompts);
    }
    m.requests_per_s = aggregate(req_rate);
    m.output_tokens_per_s = aggregate(out_rate);
    m.prompt_tokens_per_s = aggregate(prompt_rate);
    m.tokens_per_s = aggregate(tok_rate);
    return m;
}

}  // namespace gorgo

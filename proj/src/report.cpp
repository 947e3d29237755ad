#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gorgo/telemetry.hpp"

namespace gorgo {

namespace {

struct MetricRow {
    const char* key;
    const char* display;
    SummaryStats RunMetrics::* field;
};

constexpr std::array<MetricRow, 8> kMetricRows{{
    {"ttft_ms", "TTFT (ms)", &RunMetrics::ttft_ms},
    {"inter_token_latency_ms", "Inter-Token Latency (ms)", &RunMetrics::inter_token_latency_ms},
    {"request_latency_s", "Request Latency (s)", &RunMetrics::request_latency_s},
    {"time_per_output_token_ms", "Time per Output Token (ms)", &RunMetrics::time_per_output_token_ms},
    {"tokens_per_s", "Tokens/sec", &RunMetrics::tokens_per_s},
    {"output_tokens_per_s", "Output Tokens/sec", &RunMetrics::output_tokens_per_s},
    {"prompt_tokens_per_s", "Prompt Tokens/sec", &RunMetrics::prompt_tokens_per_s},
    {"requests_per_s", "Requests/sec", &RunMetrics::requests_per_s},
}};

nlohmann::ordered_json stats_to_json(const SummaryStats& s) {
    nlohmann::ordered_json j;
    j["count"] = s.count;
    auto put = [&j, &s](const char* k, double v) {
        if (s.count == 0)
            j[k] = nullptr;
        else
            j[k] = v;
    };
    put("mean", s.mean);
    put("median", s.median);
    put("std_dev", s.std_dev);
    put("min", s.min);
    put("max", s.max);
    put("p50", s.p50);
    put("p90", s.p90);
    put("p95", s.p95);
    put("p99", s.p99);
    return j;
}

SummaryStats stats_from_json(const nlohmann::json& j) {
    SummaryStats s;
    s.count = j.at("count").get<std::int64_t>();
    auto get = [&j](const char* k) {
        const auto& v = j.at(k);
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    s.mean = get("mean");
    s.median = get("median");
    s.std_dev = get("std_dev");
    s.min = get("min");
    s.max = get("max");
    s.p50 = get("p50");
    s.p90 = get("p90");
    s.p95 = get("p95");
    s.p99 = get("p99");
    return s;
}

nlohmann::ordered_json breakdown_to_json(const CostBreakdown& b) {
    nlohmann::ordered_json j;
    j["network_ms"] = b.network_ms;
    j["prefill_ms"] = b.prefill_ms;
    j["queue_ms"] = b.queue_ms;
    j["total_ms"] = b.total_ms;
    j["stale"] = b.stale;
    return j;
}

CostBreakdown breakdown_from_json(const nlohmann::json& j) {
    CostBreakdown b;
    b.network_ms = j.at("network_ms").get<double>();
    b.prefill_ms = j.at("prefill_ms").get<double>();
    b.queue_ms = j.at("queue_ms").get<double>();
    b.total_ms = j.at("total_ms").get<double>();
    b.stale = j.at("stale").get<bool>();
    return b;
}

nlohmann::ordered_json decision_to_json(const Decision& d) {
    nlohmann::ordered_json j;
    j["kind"] = decision_kind_to_string(d.kind);
    j["target"] = d.target;
    j["chosen_cost_ms"] = d.chosen_cost_ms;
    if (!d.cause.empty()) j["cause"] = d.cause;
    nlohmann::ordered_json scored = nlohmann::ordered_json::array();
    for (const auto& cs : d.scored) {
        nlohmann::ordered_json e;
        e["region"] = cs.region_id;
        e["cost"] = breakdown_to_json(cs.cost);
        e["overlap_tokens"] = cs.overlap_tokens;
        e["pending_tokens"] = cs.pending_tokens;
        e["is_local"] = cs.is_local;
        scored.push_back(std::move(e));
    }
    j["scored"] = std::move(scored);
    return j;
}

Decision decision_from_json(const nlohmann::json& j) {
    Decision d;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "serve_local") d.kind = DecisionKind::kServeLocal;
    else if (kind == "forward") d.kind = DecisionKind::kForward;
    else if (kind == "queue_local") d.kind = DecisionKind::kQueueLocal;
    else d.kind = DecisionKind::kReject;
    d.target = j.at("target").get<std::string>();
    d.chosen_cost_ms = j.at("chosen_cost_ms").get<double>();
    if (j.contains("cause")) d.cause = j["cause"].get<std::string>();
    for (const auto& e : j.at("scored")) {
        CandidateScore cs;
        cs.region_id = e.at("region").get<std::string>();
        cs.cost = breakdown_from_json(e.at("cost"));
        cs.overlap_tokens = e.at("overlap_tokens").get<std::int64_t>();
        cs.pending_tokens = e.at("pending_tokens").get<std::int64_t>();
        cs.is_local = e.at("is_local").get<bool>();
        d.scored.push_back(std::move(cs));
    }
    return d;
}

nlohmann::ordered_json trace_to_json(const RequestTrace& t) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["seq"] = t.seq;
    j["created_at_us"] = t.created_at_us;
    nlohmann::ordered_json hops = nlohmann::ordered_json::array();
    for (const auto& h : t.hops) {
        nlohmann::ordered_json e;
        e["region"] = h.region;
        e["ingress_us"] = h.ingress_us;
        e["egress_us"] = h.egress_us;
        e["decision"] = decision_to_json(h.decision);
        hops.push_back(std::move(e));
    }
    j["hops"] = std::move(hops);
    j["admitted_at_us"] = t.admitted_at_us;
    j["first_token_at_us"] = t.first_token_at_us;
    j["completed_at_us"] = t.completed_at_us;
    j["serving_region"] = t.serving_region;
    j["status"] = t.status;
    j["prompt_tokens"] = t.prompt_tokens;
    j["output_tokens"] = t.output_tokens;
    j["overlap_tokens"] = t.overlap_tokens;
    j["origin_fallback"] = t.origin_fallback;
    if (!t.reject_cause.empty()) j["reject_cause"] = t.reject_cause;
    return j;
}

RequestTrace trace_from_json(const nlohmann::json& j) {
    RequestTrace t;
    t.id = j.at("id").get<std::string>();
    t.seq = j.at("seq").get<std::uint64_t>();
    t.created_at_us = j.at("created_at_us").get<MicroTs>();
    for (const auto& e : j.at("hops")) {
        HopRecord h;
        h.region = e.at("region").get<std::string>();
        h.ingress_us = e.at("ingress_us").get<MicroTs>();
        h.egress_us = e.at("egress_us").get<MicroTs>();
        h.decision = decision_from_json(e.at("decision"));
        t.hops.push_back(std::move(h));
    }
    t.admitted_at_us = j.at("admitted_at_us").get<MicroTs>();
    t.first_token_at_us = j.at("first_token_at_us").get<MicroTs>();
    t.completed_at_us = j.at("completed_at_us").get<MicroTs>();
    t.serving_region = j.at("serving_region").get<std::string>();
    t.status = j.at("status").get<std::string>();
    t.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    t.output_tokens = j.at("output_tokens").get<std::int64_t>();
    t.overlap_tokens = j.at("overlap_tokens").get<std::int64_t>();
    t.origin_fallback = j.at("origin_fallback").get<bool>();
    if (j.contains("reject_cause")) t.reject_cause = j["reject_cause"].get<std::string>();
    return t;
}

std::string fmt_stat(double v) {
    if (std::isnan(v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

nlohmann::ordered_json report_to_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["schema_version"] = report.schema_version;
    j["policy"] = report.policy;
    j["config_digest"] = report.config_digest;
    j["seed"] = report.seed;

    nlohmann::ordered_json metrics;
    for (const auto& row : kMetricRows) metrics[row.key] = stats_to_json(report.metrics.*(row.field));
    j["metrics"] = std::move(metrics);

    nlohmann::ordered_json totals;
    totals["injected"] = report.totals.injected;
    totals["completed"] = report.totals.completed;
    totals["rejected"] = report.totals.rejected;
    totals["in_flight"] = report.totals.in_flight;
    totals["forwards"] = report.totals.forwards;
    totals["origin_fallbacks"] = report.totals.origin_fallbacks;
    totals["proxy_retries"] = report.totals.proxy_retries;
    totals["horizon_us"] = report.totals.horizon_us;
    j["totals"] = std::move(totals);

    nlohmann::ordered_json regions = nlohmann::ordered_json::array();
    for (const auto& r : report.regions) {
        nlohmann::ordered_json e;
        e["region"] = r.region_id;
        e["handled"] = r.handled;
        e["forwarded_out"] = r.forwarded_out;
        e["rejected"] = r.rejected;
        nlohmann::ordered_json depth = nlohmann::ordered_json::array();
        for (const auto& [at, q] : r.queue_depth) depth.push_back({at, q});
        e["queue_depth"] = std::move(depth);
        regions.push_back(std::move(e));
    }
    j["regions"] = std::move(regions);

    nlohmann::ordered_json traces = nlohmann::ordered_json::array();
    for (const auto& t : report.traces) traces.push_back(trace_to_json(t));
    j["traces"] = std::move(traces);
    return j;
}

RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    r.policy = j.at("policy").get<std::string>();
    r.config_digest = j.at("config_digest").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& metrics = j.at("metrics");
    for (const auto& row : kMetricRows) r.metrics.*(row.field) = stats_from_json(metrics.at(row.key));
    const auto& totals = j.at("totals");
    r.totals.injected = totals.at("injected").get<std::int64_t>();
    r.totals.completed = totals.at("completed").get<std::int64_t>();
    r.totals.rejected = totals.at("rejected").get<std::int64_t>();
    r.totals.in_flight = totals.at("in_flight").get<std::int64_t>();
    r.totals.forwards = totals.at("forwards").get<std::int64_t>();
    r.totals.origin_fallbacks = totals.at("origin_fallbacks").get<std::int64_t>();
    r.totals.proxy_retries = totals.at("proxy_retries").get<std::int64_t>();
    r.totals.horizon_us = totals.at("horizon_us").get<MicroTs>();
    for (const auto& e : j.at("regions")) {
        RegionAggregate a;
        a.region_id = e.at("region").get<std::string>();
        a.handled = e.at("handled").get<std::int64_t>();
        a.forwarded_out = e.at("forwarded_out").get<std::int64_t>();
        a.rejected = e.at("rejected").get<std::int64_t>();
        for (const auto& d : e.at("queue_depth"))
            a.queue_depth.emplace_back(d.at(0).get<MicroTs>(), d.at(1).get<std::int64_t>());
        r.regions.push_back(std::move(a));
    }
    for (const auto& e : j.at("traces")) r.traces.push_back(trace_from_json(e));
    return r;
}

std::string render_report_table(const RunReport& report) {
    std::ostringstream out;
    out << "Policy: " << report.policy << "  seed=" << report.seed
        << "  config=" << report.config_digest << '\n';
    out << "Requests: injected=" << report.totals.injected
        << " completed=" << report.totals.completed << " rejected=" << report.totals.rejected
        << " in_flight=" << report.totals.in_flight << " forwards=" << report.totals.forwards
        << '\n';

    char line[256];
    std::snprintf(line, sizeof line, "%-28s %8s %10s %10s %10s %10s %12s %10s %10s %10s %10s\n",
                  "Metric", "Count", "Mean", "Median", "Std. Dev.", "Min", "Max", "P50", "P90",
                  "P95", "P99");
    out << line;
    for (const auto& row : kMetricRows) {
        const SummaryStats& s = report.metrics.*(row.field);
        std::snprintf(line, sizeof line,
                      "%-28s %8lld %10s %10s %10s %10s %12s %10s %10s %10s %10s\n", row.display,
                      static_cast<long long>(s.count), fmt_stat(s.mean).c_str(),
                      fmt_stat(s.median).c_str(), fmt_stat(s.std_dev).c_str(),
                      fmt_stat(s.min).c_str(), fmt_stat(s.max).c_str(), fmt_stat(s.p50).c_str(),
                      fmt_stat(s.p90).c_str(), fmt_stat(s.p95).c_str(), fmt_stat(s.p99).c_str());
        out << line;
    }
    return out.str();
}

std::string export_ttft_csv(std::span<const RequestTrace> traces) {
    std::ostringstream out;
    out << "request_id,ttft_ms\n";
    for (const auto& t : traces) {
        if (t.status != "completed") continue;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f", t.ttft_ms());
        out << t.id << ',' << buf << '\n';
    }
    return out.str();
}

PolicyComparison compare_policies(std::span<const RunReport> reports, const std::string& baseline) {
    if (reports.size() < 2) throw DataError("compare_policies: need at least 2 reports");
    for (const auto& r : reports) {
        if (r.config_digest != reports.front().config_digest)
            throw DataError("compare_policies: config digest mismatch: " +
                            reports.front().config_digest + " (" + reports.front().policy +
                            ") vs " + r.config_digest + " (" + r.policy + ")");
        if (r.seed != reports.front().seed)
            throw DataError("compare_policies: seed mismatch between reports");
    }

    const RunReport* base = nullptr;
    for (const auto& r : reports)
        if (r.policy == baseline) base = &r;
    if (base == nullptr) throw DataError("compare_policies: baseline '" + baseline + "' not among reports");

    PolicyComparison c;
    c.baseline = baseline;
    for (const auto& r : reports) c.policies.push_back(r.policy);

    for (const auto& row : kMetricRows) {
        c.metric_keys.push_back(row.key);
        std::vector<double> med, mean, ratio;
        double base_median = (base->metrics.*(row.field)).median;
        for (const auto& r : reports) {
            const SummaryStats& s = r.metrics.*(row.field);
            med.push_back(s.median);
            mean.push_back(s.mean);
            ratio.push_back(s.median == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                            : base_median / s.median);
        }
        c.medians.push_back(std::move(med));
        c.means.push_back(std::move(mean));
        c.median_ratios.push_back(std::move(ratio));
        if (std::string(row.key) == "ttft_ms") c.ttft_median_ratio = c.median_ratios.back();
    }
    return c;
}

nlohmann::ordered_json comparison_to_json(const PolicyComparison& c) {
    nlohmann::ordered_json j;
    j["baseline"] = c.baseline;
    j["policies"] = c.policies;
    nlohmann::ordered_json metrics;
    for (std::size_t m = 0; m < c.metric_keys.size(); ++m) {
        nlohmann::ordered_json e;
        e["median"] = c.medians[m];
        e["mean"] = c.means[m];
        e["median_speedup_vs_baseline"] = c.median_ratios[m];
        metrics[c.metric_keys[m]] = std::move(e);
    }
    j["metrics"] = std::move(metrics);
    j["ttft_median_speedup_vs_baseline"] = c.ttft_median_ratio;
    return j;
}

std::string render_comparison_table(const PolicyComparison& c) {
    std::ostringstream out;
    out << "Baseline: " << c.baseline << '\n';
    char line[512];
    std::string header = "Metric";
    out << "Median values (speedup vs baseline in parentheses)\n";
    std::snprintf(line, sizeof line, "%-28s", "Metric");
    out << line;
    for (const auto& p : c.policies) {
        std::snprintf(line, sizeof line, " %22s", p.c_str());
        out << line;
    }
    out << '\n';
    for (std::size_t m = 0; m < c.metric_keys.size(); ++m) {
        std::snprintf(line, sizeof line, "%-28s", c.metric_keys[m].c_str());
        out << line;
        for (std::size_t p = 0; p < c.policies.size(); ++p) {
            std::string cell = fmt_stat(c.medians[m][p]) + " (" + fmt_stat(c.median_ratios[m][p]) + "x)";
            std::snprintf(line, sizeof line, " %22s", cell.c_str());
            out << line;
        }
        out << '\n';
    }
    return out.str();
}

std::string render_comparison_svg(const PolicyComparison& c, bool use_means) {
    const auto& values = use_means ? c.means : c.medians;
    const std::size_t n_metrics = c.metric_keys.size();
    const std::size_t n_policies = c.policies.size();

    const double panel_w = 260, panel_h = 180, margin = 48, bar_gap = 8;
    const std::size_t cols = 4;
    const std::size_t rows = (n_metrics + cols - 1) / cols;
    const double width = cols * (panel_w + margin) + margin;
    const double height = rows * (panel_h + margin + 30) + margin;

    static const char* kPalette[] = {"#4c78a8", "#f58518", "#54a24b", "#e45756",
                                     "#72b7b2", "#b279a2"};

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' font-family='sans-serif' font-size='11'>\n";
    svg << "<text x='" << margin << "' y='20' font-size='15'>"
        << (use_means ? "Mean" : "Median") << " metrics across methods</text>\n";

    for (std::size_t m = 0; m < n_metrics; ++m) {
        double x0 = margin + (m % cols) * (panel_w + margin);
        double y0 = 40 + (m / cols) * (panel_h + margin + 30);

        double vmax = 0.0;
        for (double v : values[m])
            if (std::isfinite(v)) vmax = std::max(vmax, v);
        if (vmax <= 0.0) vmax = 1.0;

        svg << "<text x='" << x0 << "' y='" << y0 - 6 << "'>" << c.metric_keys[m] << "</text>\n";
        svg << "<rect x='" << x0 << "' y='" << y0 << "' width='" << panel_w << "' height='"
            << panel_h << "' fill='none' stroke='#999'/>\n";

        double bw = (panel_w - bar_gap * (static_cast<double>(n_policies) + 1)) /
                    static_cast<double>(n_policies);
        for (std::size_t p = 0; p < n_policies; ++p) {
            double v = values[m][p];
            if (!std::isfinite(v)) v = 0.0;
            double h = panel_h * (v / vmax);
            double bx = x0 + bar_gap + static_cast<double>(p) * (bw + bar_gap);
            double by = y0 + panel_h - h;
            svg << "<rect x='" << bx << "' y='" << by << "' width='" << bw << "' height='" << h
                << "' fill='" << kPalette[p % 6] << "'/>\n";
            char label[64];
            std::snprintf(label, sizeof label, "%.4g", values[m][p]);
            svg << "<text x='" << bx + bw / 2 << "' y='" << by - 3
                << "' text-anchor='middle' font-size='9'>" << label << "</text>\n";
        }
    }
    // Legend.
    double ly = height - 16;
    double lx = margin;
    for (std::size_t p = 0; p < n_policies; ++p) {
        svg << "<rect x='" << lx << "' y='" << ly - 10 << "' width='12' height='12' fill='"
            << kPalette[p % 6] << "'/>\n";
        svg << "<text x='" << lx + 16 << "' y='" << ly << "'>" << c.policies[p] << "</text>\n";
        lx += 16.0 + 8.0 * static_cast<double>(c.policies[p].size()) + 24.0;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace gorgo

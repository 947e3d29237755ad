#include "gorgo/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gorgo {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

const json& member(const json& j, const std::string& path, const char* key) {
    if (!j.is_object()) bad(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) bad(path + "." + key, "missing required field");
    return *it;
}

template <typename T>
T get_num(const json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    return j.get<T>();
}

template <typename T>
T opt_num(const json& j, const std::string& path, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (j[key].is_null()) return fallback;
    return get_num<T>(j[key], path + "." + key);
}

bool opt_bool(const json& j, const std::string& path, const char* key, bool fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j[key].is_boolean()) bad(path + "." + key, "expected a boolean");
    return j[key].get<bool>();
}

std::string opt_str(const json& j, const std::string& path, const char* key,
                    const std::string& fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j[key].is_string()) bad(path + "." + key, "expected a string");
    return j[key].get<std::string>();
}

LengthDist parse_length_dist(const json& j, const std::string& path) {
    if (j.is_number()) {
        return {LengthDist::Kind::kFixed, j.get<double>(), 0.0};
    }
    if (!j.is_object()) bad(path, "expected a number or {kind: ...} object");
    std::string kind = opt_str(j, path, "kind", "fixed");
    LengthDist d;
    if (kind == "fixed") {
        d.kind = LengthDist::Kind::kFixed;
        d.a = get_num<double>(member(j, path, "value"), path + ".value");
    } else if (kind == "uniform") {
        d.kind = LengthDist::Kind::kUniform;
        d.a = get_num<double>(member(j, path, "min"), path + ".min");
        d.b = get_num<double>(member(j, path, "max"), path + ".max");
        if (d.b < d.a) bad(path, "uniform max < min");
    } else if (kind == "lognormal") {
        d.kind = LengthDist::Kind::kLognormal;
        d.a = get_num<double>(member(j, path, "median"), path + ".median");
        d.b = get_num<double>(member(j, path, "sigma"), path + ".sigma");
        if (d.a <= 0.0) bad(path + ".median", "must be > 0");
        if (d.b < 0.0) bad(path + ".sigma", "must be >= 0");
    } else {
        bad(path + ".kind", "expected fixed, uniform or lognormal");
    }
    return d;
}

json length_dist_to_json(const LengthDist& d) {
    json j;
    switch (d.kind) {
        case LengthDist::Kind::kFixed:
            j["kind"] = "fixed";
            j["value"] = d.a;
            break;
        case LengthDist::Kind::kUniform:
            j["kind"] = "uniform";
            j["min"] = d.a;
            j["max"] = d.b;
            break;
        case LengthDist::Kind::kLognormal:
            j["kind"] = "lognormal";
            j["median"] = d.a;
            j["sigma"] = d.b;
            break;
    }
    return j;
}

Calibration parse_prefill(const json& j, const std::string& path) {
    if (!j.is_object()) bad(path, "expected an object");
    if (j.contains("file")) {
        std::string file = j["file"].get<std::string>();
        std::ifstream in(file);
        if (!in) bad(path + ".file", "cannot open calibration file: " + file);
        json cj = json::parse(in, nullptr, false);
        if (cj.is_discarded()) bad(path + ".file", "calibration file is not valid JSON");
        return parse_prefill(cj, path + ".file:" + file);
    }
    Calibration c;
    c.intercept_ms = get_num<double>(member(j, path, "intercept_ms"), path + ".intercept_ms");
    c.slope_ms_per_token =
        get_num<double>(member(j, path, "slope_ms_per_token"), path + ".slope_ms_per_token");
    c.r_squared = opt_num<double>(j, path, "r_squared", 1.0);
    c.n = opt_num<std::int64_t>(j, path, "n", 0);
    return c;
}

WorkloadSpec parse_workload(const json& j, const std::string& path) {
    WorkloadSpec w;
    w.kind = workload_kind_from_string(opt_str(j, path, "kind", "poisson"));
    w.duration_s = opt_num<double>(j, path, "duration_s", 60.0);
    w.concurrency = opt_num<int>(j, path, "concurrency", 10);
    w.rate_per_s = opt_num<double>(j, path, "rate_per_s", 1.0);
    w.ceiling_per_s = opt_num<double>(j, path, "ceiling_per_s", 100.0);

    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        std::string sp = path + ".sweep";
        w.sweep.start_rate_per_s = opt_num<double>(s, sp, "start_rate_per_s", 2.0);
        w.sweep.step_rate_per_s = opt_num<double>(s, sp, "step_rate_per_s", 2.0);
        w.sweep.stage_duration_s = opt_num<double>(s, sp, "stage_duration_s", 10.0);
        w.sweep.p99_stop_multiplier = opt_num<double>(s, sp, "p99_stop_multiplier", 5.0);
        w.sweep.max_stages = opt_num<int>(s, sp, "max_stages", 12);
    }

    if (j.contains("prompts")) {
        const json& p = j["prompts"];
        std::string pp = path + ".prompts";
        std::string source = opt_str(p, pp, "source", "synthetic");
        if (source == "synthetic") {
            w.prompts.synthetic = true;
            w.prompts.synth.shared_prefixes = opt_num<int>(p, pp, "shared_prefixes", 8);
            if (p.contains("prefix_len"))
                w.prompts.synth.prefix_len = parse_length_dist(p["prefix_len"], pp + ".prefix_len");
            if (p.contains("suffix_len"))
                w.prompts.synth.suffix_len = parse_length_dist(p["suffix_len"], pp + ".suffix_len");
        } else if (source == "trace") {
            w.prompts.synthetic = false;
            w.prompts.trace.prompts_path = opt_str(p, pp, "trace_path", "");
            w.prompts.trace.geolookup_path = opt_str(p, pp, "geolookup_path", "");
            if (w.prompts.trace.prompts_path.empty()) bad(pp + ".trace_path", "required for trace source");
            if (w.prompts.trace.geolookup_path.empty())
                bad(pp + ".geolookup_path", "required for trace source");
        } else {
            bad(pp + ".source", "expected synthetic or trace");
        }
        if (p.contains("output_tokens"))
            w.prompts.output_tokens = parse_length_dist(p["output_tokens"], pp + ".output_tokens");
    }

    if (j.contains("origins")) {
        const json& o = j["origins"];
        std::string op = path + ".origins";
        if (o.contains("points")) {
            if (!o["points"].is_array()) bad(op + ".points", "expected an array");
            std::size_t i = 0;
            for (const auto& e : o["points"]) {
                std::string ep = op + ".points[" + std::to_string(i++) + "]";
                OriginSpec::Point pt;
                pt.point.lat = get_num<double>(member(e, ep, "lat"), ep + ".lat");
                pt.point.lon = get_num<double>(member(e, ep, "lon"), ep + ".lon");
                pt.weight = opt_num<double>(e, ep, "weight", 1.0);
                if (!geo_point_valid(pt.point)) bad(ep, "coordinates out of range");
                if (pt.weight <= 0.0) bad(ep + ".weight", "must be > 0");
                w.origins.points.push_back(pt);
            }
        }
        if (o.contains("fallback")) {
            const json& f = o["fallback"];
            std::string fp = op + ".fallback";
            w.origins.fallback.lat = get_num<double>(member(f, fp, "lat"), fp + ".lat");
            w.origins.fallback.lon = get_num<double>(member(f, fp, "lon"), fp + ".lon");
        }
    }
    return w;
}

json workload_to_json(const WorkloadSpec& w) {
    json j;
    j["kind"] = workload_kind_to_string(w.kind);
    j["duration_s"] = w.duration_s;
    j["concurrency"] = w.concurrency;
    j["rate_per_s"] = w.rate_per_s;
    j["ceiling_per_s"] = w.ceiling_per_s;
    j["sweep"] = {{"start_rate_per_s", w.sweep.start_rate_per_s},
                  {"step_rate_per_s", w.sweep.step_rate_per_s},
                  {"stage_duration_s", w.sweep.stage_duration_s},
                  {"p99_stop_multiplier", w.sweep.p99_stop_multiplier},
                  {"max_stages", w.sweep.max_stages}};
    json p;
    p["source"] = w.prompts.synthetic ? "synthetic" : "trace";
    if (w.prompts.synthetic) {
        p["shared_prefixes"] = w.prompts.synth.shared_prefixes;
        p["prefix_len"] = length_dist_to_json(w.prompts.synth.prefix_len);
        p["suffix_len"] = length_dist_to_json(w.prompts.synth.suffix_len);
    } else {
        p["trace_path"] = w.prompts.trace.prompts_path;
        p["geolookup_path"] = w.prompts.trace.geolookup_path;
    }
    p["output_tokens"] = length_dist_to_json(w.prompts.output_tokens);
    j["prompts"] = std::move(p);
    json pts = json::array();
    for (const auto& pt : w.origins.points)
        pts.push_back({{"lat", pt.point.lat}, {"lon", pt.point.lon}, {"weight", pt.weight}});
    j["origins"] = {{"points", std::move(pts)},
                    {"fallback", {{"lat", w.origins.fallback.lat}, {"lon", w.origins.fallback.lon}}}};
    return j;
}

}  // namespace

SimConfig sim_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    SimConfig c;
    c.version = opt_num<int>(j, "config", "version", 1);
    if (c.version != 1) bad("config.version", "unsupported schema version");
    c.seed = opt_num<std::uint64_t>(j, "config", "seed", 1);
    c.drain = opt_bool(j, "config", "drain", true);

    const json& regions = member(j, "config", "regions");
    if (!regions.is_array() || regions.empty()) bad("config.regions", "expected a non-empty array");
    std::size_t ri = 0;
    for (const auto& e : regions) {
        std::string rp = "config.regions[" + std::to_string(ri++) + "]";
        RegionConfig r;
        r.id = member(e, rp, "id").get<std::string>();
        r.location.lat = opt_num<double>(e, rp, "lat", 0.0);
        r.location.lon = opt_num<double>(e, rp, "lon", 0.0);
        if (e.contains("backend")) {
            const json& b = e["backend"];
            std::string bp = rp + ".backend";
            r.backend.max_running = opt_num<std::int64_t>(b, bp, "max_running", 10);
            r.backend.itl_ms = opt_num<double>(b, bp, "itl_ms", 12.5);
            r.backend.kv_capacity_tokens = opt_num<std::int64_t>(b, bp, "kv_capacity_tokens", 131072);
            r.backend.prefix_caching = opt_bool(b, bp, "prefix_caching", true);
            if (b.contains("prefill")) r.backend.prefill = parse_prefill(b["prefill"], bp + ".prefill");
        }
        r.initial_waiting_tokens = opt_num<std::int64_t>(e, rp, "initial_waiting_tokens", 0);
        r.filler_chunk_tokens = opt_num<std::int64_t>(e, rp, "filler_chunk_tokens", 650);
        r.filler_output_tokens = opt_num<std::int64_t>(e, rp, "filler_output_tokens", 256);
        if (e.contains("cache_seeds")) {
            std::size_t si = 0;
            for (const auto& s : e["cache_seeds"]) {
                std::string sp = rp + ".cache_seeds[" + std::to_string(si++) + "]";
                CacheSeed seed;
                seed.prefix_id = opt_num<int>(s, sp, "prefix_id", 0);
                seed.fraction = opt_num<double>(s, sp, "fraction", 1.0);
                if (seed.fraction < 0.0 || seed.fraction > 1.0) bad(sp + ".fraction", "must be in [0, 1]");
                r.cache_seeds.push_back(seed);
            }
        }
        c.regions.push_back(std::move(r));
    }

    if (j.contains("network")) {
        const json& n = j["network"];
        if (n.contains("rtt_ms")) {
            if (!n["rtt_ms"].is_array()) bad("config.network.rtt_ms", "expected a matrix");
            for (const auto& row : n["rtt_ms"]) {
                std::vector<double> r;
                for (const auto& v : row) r.push_back(v.get<double>());
                c.network.rtt_ms.push_back(std::move(r));
            }
        }
        c.network.jitter_fraction = opt_num<double>(n, "config.network", "jitter_fraction", 0.0);
    }
    if (c.network.rtt_ms.empty())
        c.network.rtt_ms.assign(c.regions.size(), std::vector<double>(c.regions.size(), 0.0));

    if (j.contains("policy")) {
        const json& p = j["policy"];
        std::string pp = "config.policy";
        c.policy.strategy = strategy_from_string(opt_str(p, pp, "strategy", "gorgo"));
        c.policy.max_hops = opt_num<int>(p, pp, "max_hops", 2);
        c.policy.running_threshold = opt_num<std::int64_t>(p, pp, "running_threshold", 10);
        c.policy.kv_cache_limit = opt_num<double>(p, pp, "kv_cache_limit", 0.9);
        c.policy.max_queue_tokens = opt_num<std::int64_t>(p, pp, "max_queue_tokens", 32768);
        if (p.contains("cost") && p["cost"].is_object()) {
            const json& cj = p["cost"];
            std::string cp = pp + ".cost";
            if (cj.contains("t_p_ms_per_token") && !cj["t_p_ms_per_token"].is_null()) {
                c.policy.cost.t_p_set = true;
                c.policy.cost.t_p_ms_per_token =
                    get_num<double>(cj["t_p_ms_per_token"], cp + ".t_p_ms_per_token");
            }
            c.policy.cost.t_p_scale = opt_num<double>(cj, cp, "t_p_scale", 1.0);
            c.policy.cost.q_s = opt_num<double>(cj, cp, "q_s", 1.0);
            c.policy.cost.base_latency_ms = opt_num<double>(cj, cp, "base_latency_ms", 0.0);
        }
        if (p.contains("stale_after_ms") && !p["stale_after_ms"].is_null()) {
            c.policy.stale_after_set = true;
            c.policy.stale_after_ms = get_num<double>(p["stale_after_ms"], pp + ".stale_after_ms");
        }
        if (p.contains("stale_penalty_ms") && !p["stale_penalty_ms"].is_null()) {
            c.policy.stale_penalty_set = true;
            c.policy.stale_penalty_ms = get_num<double>(p["stale_penalty_ms"], pp + ".stale_penalty_ms");
        }
        c.policy.stale_exclude_after_ms = opt_num<double>(p, pp, "stale_exclude_after_ms", 0.0);
        std::string lm = opt_str(p, pp, "load_metric", "tokens");
        if (lm == "tokens") c.policy.load_metric = PolicyConfig::LoadMetric::kTokens;
        else if (lm == "requests") c.policy.load_metric = PolicyConfig::LoadMetric::kRequests;
        else bad(pp + ".load_metric", "expected tokens or requests");
    }

    if (j.contains("gossip")) {
        c.gossip.interval_ms = opt_num<double>(j["gossip"], "config.gossip", "interval_ms", 500.0);
        c.gossip.warm_start = opt_bool(j["gossip"], "config.gossip", "warm_start", true);
    }
    if (j.contains("prefix_index")) {
        c.prefix_index.block_size =
            opt_num<std::int64_t>(j["prefix_index"], "config.prefix_index", "block_size", 16);
        c.prefix_index.mirror_peer_prefixes =
            opt_bool(j["prefix_index"], "config.prefix_index", "mirror_peer_prefixes", true);
    }
    if (j.contains("proxy")) {
        const json& p = j["proxy"];
        c.proxy.colocated_region = opt_str(p, "config.proxy", "colocated_region", "");
        c.proxy.retry_backoff_ms = opt_num<double>(p, "config.proxy", "retry_backoff_ms", 50.0);
        if (p.contains("rtt_ms")) {
            if (!p["rtt_ms"].is_object()) bad("config.proxy.rtt_ms", "expected an object");
            for (const auto& [k, v] : p["rtt_ms"].items())
                c.proxy.rtt_ms[k] = v.get<double>();
        }
    }
    if (j.contains("telemetry")) {
        c.telemetry.queue_sample_interval_ms = opt_num<double>(
            j["telemetry"], "config.telemetry", "queue_sample_interval_ms", 1000.0);
        c.telemetry.include_traces = opt_bool(j["telemetry"], "config.telemetry", "include_traces", true);
    }
    c.workload = parse_workload(j.contains("workload") ? j["workload"] : json::object(), "config.workload");

    validate_config(c);
    return c;
}

void validate_config(const SimConfig& c) {
    if (c.regions.empty()) bad("config.regions", "need at least one region");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < c.regions.size(); ++i) {
        const RegionConfig& r = c.regions[i];
        std::string rp = "config.regions[" + std::to_string(i) + "]";
        if (r.id.empty()) bad(rp + ".id", "must be non-empty");
        if (r.id == "proxy") bad(rp + ".id", "'proxy' is reserved");
        if (!ids.insert(r.id).second) bad(rp + ".id", "duplicate region id '" + r.id + "'");
        if (!geo_point_valid(r.location)) bad(rp, "coordinates out of range");
        if (r.backend.max_running < 1) bad(rp + ".backend.max_running", "must be >= 1");
        if (!(r.backend.itl_ms > 0.0)) bad(rp + ".backend.itl_ms", "must be > 0");
        if (!(r.backend.prefill.slope_ms_per_token > 0.0))
            bad(rp + ".backend.prefill.slope_ms_per_token", "must be > 0");
        if (r.backend.prefill.intercept_ms < 0.0)
            bad(rp + ".backend.prefill.intercept_ms", "must be >= 0");
        if (r.backend.kv_capacity_tokens < c.prefix_index.block_size)
            bad(rp + ".backend.kv_capacity_tokens", "must be >= prefix_index.block_size");
        if (r.initial_waiting_tokens < 0) bad(rp + ".initial_waiting_tokens", "must be >= 0");
        if (r.filler_chunk_tokens < 1) bad(rp + ".filler_chunk_tokens", "must be >= 1");
        if (r.filler_output_tokens < 1) bad(rp + ".filler_output_tokens", "must be >= 1");
        for (const auto& s : r.cache_seeds) {
            if (!c.workload.prompts.synthetic)
                bad(rp + ".cache_seeds", "cache seeding requires a synthetic prompt source");
            if (s.prefix_id < 0 || s.prefix_id >= c.workload.prompts.synth.shared_prefixes)
                bad(rp + ".cache_seeds", "prefix_id out of range");
        }
    }

    const std::size_t n = c.regions.size();
    if (c.network.rtt_ms.size() != n) bad("config.network.rtt_ms", "matrix size must match region count");
    for (std::size_t a = 0; a < n; ++a) {
        if (c.network.rtt_ms[a].size() != n)
            bad("config.network.rtt_ms", "matrix row " + std::to_string(a) + " has wrong length");
        for (std::size_t b = 0; b < n; ++b) {
            double v = c.network.rtt_ms[a][b];
            if (!(v >= 0.0) || !std::isfinite(v))
                bad("config.network.rtt_ms", "entries must be finite and >= 0");
            if (c.network.rtt_ms[a][b] != c.network.rtt_ms[b][a])
                bad("config.network.rtt_ms", "matrix must be symmetric");
        }
    }
    if (c.network.jitter_fraction < 0.0 || c.network.jitter_fraction >= 1.0)
        bad("config.network.jitter_fraction", "must be in [0, 1)");

    if (c.policy.max_hops < 1) bad("config.policy.max_hops", "must be >= 1");
    if (c.policy.running_threshold < 1) bad("config.policy.running_threshold", "must be >= 1");
    if (!(c.policy.kv_cache_limit > 0.0) || c.policy.kv_cache_limit > 1.0)
        bad("config.policy.kv_cache_limit", "must be in (0, 1]");
    if (c.policy.max_queue_tokens < 0) bad("config.policy.max_queue_tokens", "must be >= 0");
    if (c.policy.cost.t_p_set && !(c.policy.cost.t_p_ms_per_token > 0.0))
        bad("config.policy.cost.t_p_ms_per_token", "must be > 0");
    if (!(c.policy.cost.t_p_scale > 0.0)) bad("config.policy.cost.t_p_scale", "must be > 0");
    if (c.policy.cost.q_s < 0.0) bad("config.policy.cost.q_s", "must be >= 0");
    if (c.policy.cost.base_latency_ms < 0.0) bad("config.policy.cost.base_latency_ms", "must be >= 0");

    if (!(c.gossip.interval_ms > 0.0)) bad("config.gossip.interval_ms", "must be > 0");
    if (c.prefix_index.block_size < 1) bad("config.prefix_index.block_size", "must be >= 1");
    if (!c.proxy.colocated_region.empty() && !ids.count(c.proxy.colocated_region))
        bad("config.proxy.colocated_region", "unknown region '" + c.proxy.colocated_region + "'");
    for (const auto& [k, v] : c.proxy.rtt_ms) {
        if (!ids.count(k)) bad("config.proxy.rtt_ms", "unknown region '" + k + "'");
        if (!(v >= 0.0)) bad("config.proxy.rtt_ms", "entries must be >= 0");
    }
    if (!(c.proxy.retry_backoff_ms > 0.0)) bad("config.proxy.retry_backoff_ms", "must be > 0");
    if (!(c.telemetry.queue_sample_interval_ms > 0.0))
        bad("config.telemetry.queue_sample_interval_ms", "must be > 0");

    const WorkloadSpec& w = c.workload;
    if (!(w.duration_s > 0.0)) bad("config.workload.duration_s", "must be > 0");
    switch (w.kind) {
        case WorkloadKind::kNone: break;
        case WorkloadKind::kConcurrent:
            if (w.concurrency < 1) bad("config.workload.concurrency", "must be >= 1");
            break;
        case WorkloadKind::kPoisson:
            if (!(w.rate_per_s > 0.0)) bad("config.workload.rate_per_s", "must be > 0");
            break;
        case WorkloadKind::kThroughput:
            if (!(w.ceiling_per_s > 0.0)) bad("config.workload.ceiling_per_s", "must be > 0");
            break;
        case WorkloadKind::kSweep:
            if (!(w.sweep.start_rate_per_s > 0.0)) bad("config.workload.sweep.start_rate_per_s", "must be > 0");
            if (!(w.sweep.step_rate_per_s > 0.0)) bad("config.workload.sweep.step_rate_per_s", "must be > 0");
            if (!(w.sweep.stage_duration_s > 0.0)) bad("config.workload.sweep.stage_duration_s", "must be > 0");
            if (w.sweep.max_stages < 1) bad("config.workload.sweep.max_stages", "must be >= 1");
            break;
    }
    if (w.prompts.synthetic && w.prompts.synth.shared_prefixes < 1)
        bad("config.workload.prompts.shared_prefixes", "must be >= 1");
}

nlohmann::ordered_json sim_config_to_json(const SimConfig& c) {
    nlohmann::ordered_json j;
    j["version"] = c.version;
    j["seed"] = c.seed;
    j["drain"] = c.drain;
    nlohmann::ordered_json regions = nlohmann::ordered_json::array();
    for (const auto& r : c.regions) {
        nlohmann::ordered_json e;
        e["id"] = r.id;
        e["lat"] = r.location.lat;
        e["lon"] = r.location.lon;
        e["backend"] = {{"max_running", r.backend.max_running},
                        {"itl_ms", r.backend.itl_ms},
                        {"kv_capacity_tokens", r.backend.kv_capacity_tokens},
                        {"prefix_caching", r.backend.prefix_caching},
                        {"prefill",
                         {{"intercept_ms", r.backend.prefill.intercept_ms},
                          {"slope_ms_per_token", r.backend.prefill.slope_ms_per_token},
                          {"r_squared", r.backend.prefill.r_squared},
                          {"n", r.backend.prefill.n}}}};
        e["initial_waiting_tokens"] = r.initial_waiting_tokens;
        e["filler_chunk_tokens"] = r.filler_chunk_tokens;
        e["filler_output_tokens"] = r.filler_output_tokens;
        nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
        for (const auto& s : r.cache_seeds)
            seeds.push_back({{"prefix_id", s.prefix_id}, {"fraction", s.fraction}});
        e["cache_seeds"] = std::move(seeds);
        regions.push_back(std::move(e));
    }
    j["regions"] = std::move(regions);
    j["network"] = {{"rtt_ms", c.network.rtt_ms}, {"jitter_fraction", c.network.jitter_fraction}};
    nlohmann::ordered_json pol;
    pol["strategy"] = strategy_to_string(c.policy.strategy);
    pol["max_hops"] = c.policy.max_hops;
    pol["running_threshold"] = c.policy.running_threshold;
    pol["kv_cache_limit"] = c.policy.kv_cache_limit;
    pol["max_queue_tokens"] = c.policy.max_queue_tokens;
    nlohmann::ordered_json cost;
    if (c.policy.cost.t_p_set)
        cost["t_p_ms_per_token"] = c.policy.cost.t_p_ms_per_token;
    else
        cost["t_p_ms_per_token"] = nullptr;
    cost["t_p_scale"] = c.policy.cost.t_p_scale;
    cost["q_s"] = c.policy.cost.q_s;
    cost["base_latency_ms"] = c.policy.cost.base_latency_ms;
    pol["cost"] = std::move(cost);
    if (c.policy.stale_after_set) pol["stale_after_ms"] = c.policy.stale_after_ms;
    else pol["stale_after_ms"] = nullptr;
    if (c.policy.stale_penalty_set) pol["stale_penalty_ms"] = c.policy.stale_penalty_ms;
    else pol["stale_penalty_ms"] = nullptr;
    pol["stale_exclude_after_ms"] = c.policy.stale_exclude_after_ms;
    pol["load_metric"] =
        c.policy.load_metric == PolicyConfig::LoadMetric::kTokens ? "tokens" : "requests";
    j["policy"] = std::move(pol);
    j["gossip"] = {{"interval_ms", c.gossip.interval_ms}, {"warm_start", c.gossip.warm_start}};
    j["prefix_index"] = {{"block_size", c.prefix_index.block_size},
                         {"mirror_peer_prefixes", c.prefix_index.mirror_peer_prefixes}};
    nlohmann::ordered_json proxy;
    proxy["colocated_region"] = c.proxy.colocated_region;
    proxy["retry_backoff_ms"] = c.proxy.retry_backoff_ms;
    proxy["rtt_ms"] = c.proxy.rtt_ms;
    j["proxy"] = std::move(proxy);
    j["telemetry"] = {{"queue_sample_interval_ms", c.telemetry.queue_sample_interval_ms},
                      {"include_traces", c.telemetry.include_traces}};
    j["workload"] = workload_to_json(c.workload);
    return j;
}

SimConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return sim_config_from_json(j);
}

std::string config_digest(const SimConfig& c) {
    SimConfig canon = c;
    canon.policy.strategy = Strategy::kGorgo;  // strategy excluded from the digest
    std::string dump = sim_config_to_json(canon).dump();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(dump)));
    return buf;
}

}  // namespace gorgo

#include "gorgo/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gorgo {

WorkloadKind workload_kind_from_string(const std::string& s) {
    if (s == "none") return WorkloadKind::kNone;
    if (s == "concurrent") return WorkloadKind::kConcurrent;
    if (s == "poisson") return WorkloadKind::kPoisson;
    if (s == "throughput") return WorkloadKind::kThroughput;
    if (s == "sweep") return WorkloadKind::kSweep;
    throw ConfigError("unknown workload kind '" + s + "'");
}

std::string workload_kind_to_string(WorkloadKind k) {
    switch (k) {
        case WorkloadKind::kNone: return "none";
        case WorkloadKind::kConcurrent: return "concurrent";
        case WorkloadKind::kPoisson: return "poisson";
        case WorkloadKind::kThroughput: return "throughput";
        case WorkloadKind::kSweep: return "sweep";
    }
    return "?";
}

std::int64_t LengthDist::sample(rng::Stream& rng) const {
    double v = 0.0;
    switch (kind) {
        case Kind::kFixed: v = a; break;
        case Kind::kUniform: v = rng.next_range(a, b); break;
        case Kind::kLognormal: v = rng.next_lognormal(a, b); break;
    }
    if (v < 0.0) v = 0.0;
    return static_cast<std::int64_t>(std::llround(v));
}

TokenSeq tokenize_text(std::string_view text) {
    TokenSeq out;
    out.reserve(text.size() / 4 + 1);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::string_view chunk = text.substr(i, 4);
        out.push_back(static_cast<Token>(fnv1a64(chunk) & 0xFFFFu));
    }
    return out;
}

std::vector<TokenSeq> synth_shared_prefix(const SyntheticPromptSpec& spec, std::uint64_t seed) {
    if (spec.shared_prefixes < 1) throw ConfigError("shared_prefixes must be >= 1");
    std::vector<TokenSeq> prefixes;
    prefixes.reserve(static_cast<std::size_t>(spec.shared_prefixes));
    for (int i = 0; i < spec.shared_prefixes; ++i) {
        rng::Stream rng(rng::splitmix64(rng::derive_seed(seed, "prefix-pool") ^
                                        static_cast<std::uint64_t>(i)));
        auto len = static_cast<std::size_t>(spec.prefix_len.sample(rng));
        TokenSeq p;
        p.reserve(len);
        // Lead with a distinct token per pool entry so two prefixes never
        // accidentally share a head.
        if (len > 0) p.push_back(static_cast<Token>(i));
        while (p.size() < len) p.push_back(static_cast<Token>(rng.next_below(1u << 16)));
        prefixes.push_back(std::move(p));
    }
    return prefixes;
}

TracePrompts load_trace(std::istream& prompts_jsonl, std::istream& geolookup_jsonl,
                        const GeoPoint& fallback) {
    GeoLookup lookup = GeoLookup::load_jsonl(geolookup_jsonl);
    TracePrompts out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(prompts_jsonl, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("prompt") || !j["prompt"].is_string())
            throw DataError("trace line " + std::to_string(lineno) + ": expected {\"prompt\": <string>}");
        std::string prompt = j["prompt"].get<std::string>();

        TraceEntry e;
        e.tokens = tokenize_text(prompt);
        e.prompt_hash = fnv1a64(prompt);
        ResolvedOrigin origin = resolve_origin(e.prompt_hash, lookup, fallback);
        e.origin = origin.point;
        e.origin_fallback = origin.fallback;
        if (origin.fallback) ++out.hash_misses;
        out.entries.push_back(std::move(e));
    }
    return out;
}

TracePrompts load_trace_files(const std::string& prompts_path, const std::string& geolookup_path,
                              const GeoPoint& fallback) {
    std::ifstream prompts(prompts_path);
    if (!prompts) throw DataError("cannot open trace prompts file: " + prompts_path);
    std::ifstream lookup(geolookup_path);
    if (!lookup) throw DataError("cannot open geolookup file: " + geolookup_path);
    return load_trace(prompts, lookup, fallback);
}

SyntheticSampler::SyntheticSampler(const SyntheticPromptSpec& spec, const LengthDist& output_tokens,
                                   const OriginSpec& origins, std::uint64_t seed)
    : prefixes_(synth_shared_prefix(spec, seed)),
      output_tokens_(output_tokens),
      origins_(origins),
      pick_(rng::derive_seed(seed, "prefix-pick")),
      suffix_(rng::derive_seed(seed, "suffix")),
      lengths_(rng::derive_seed(seed, "lengths")),
      origin_rng_(rng::derive_seed(seed, "origins")) {
    suffix_spec_ = spec.suffix_len;
    for (const auto& p : origins_.points) total_weight_ += p.weight;
    if (origins_.points.empty()) {
        origins_.points.push_back({GeoPoint{0.0, 0.0}, 1.0});
        total_weight_ = 1.0;
    }
}

ArrivalRecord SyntheticSampler::draw() {
    ArrivalRecord r;
    auto prefix_idx = static_cast<int>(pick_.next_below(prefixes_.size()));
    r.prefix_id = prefix_idx;
    r.tokens = prefixes_[static_cast<std::size_t>(prefix_idx)];
    auto suffix_len = static_cast<std::size_t>(suffix_spec_.sample(lengths_));
    r.tokens.reserve(r.tokens.size() + suffix_len);
    for (std::size_t i = 0; i < suffix_len; ++i)
        r.tokens.push_back(static_cast<Token>(suffix_.next_below(1u << 16)));
    r.output_tokens = output_tokens_.sample(lengths_);
    r.prompt_hash = fnv1a64(r.tokens.data(), r.tokens.size() * sizeof(Token));

    double w = origin_rng_.next_range(0.0, total_weight_);
    for (const auto& p : origins_.points) {
        if (w < p.weight || &p == &origins_.points.back()) {
            r.origin = p.point;
            break;
        }
        w -= p.weight;
    }
    return r;
}

TraceSampler::TraceSampler(TracePrompts trace, const LengthDist& output_tokens, std::uint64_t seed)
    : trace_(std::move(trace)),
      output_tokens_(output_tokens),
      lengths_(rng::derive_seed(seed, "lengths")) {
    if (trace_.entries.empty()) throw DataError("trace sampler: empty trace");
}

ArrivalRecord TraceSampler::draw() {
    const TraceEntry& e = trace_.entries[next_];
    next_ = (next_ + 1) % trace_.entries.size();
    ArrivalRecord r;
    r.tokens = e.tokens;
    r.prompt_hash = e.prompt_hash;
    r.origin = e.origin;
    r.origin_fallback = e.origin_fallback;
    r.output_tokens = output_tokens_.sample(lengths_);
    return r;
}

std::unique_ptr<PromptSampler> make_sampler(const PromptSpec& prompts, const OriginSpec& origins,
                                            std::uint64_t seed) {
    if (prompts.synthetic)
        return std::make_unique<SyntheticSampler>(prompts.synth, prompts.output_tokens, origins, seed);
    TracePrompts trace = load_trace_files(prompts.trace.prompts_path, prompts.trace.geolookup_path,
                                          origins.fallback);
    return std::make_unique<TraceSampler>(std::move(trace), prompts.output_tokens, seed);
}

std::vector<ArrivalRecord> gen_poisson(double rate_per_s, double duration_s,
                                       PromptSampler& sampler, std::uint64_t seed) {
    if (!(rate_per_s > 0.0)) throw ConfigError("poisson rate must be > 0");
    if (!(duration_s > 0.0)) throw ConfigError("duration must be > 0");
    rng::Stream rng(rng::derive_seed(seed, "poisson-arrivals"));
    std::vector<ArrivalRecord> out;
    double t_s = rng.next_exponential(rate_per_s);
    while (t_s < duration_s) {
        ArrivalRecord r = sampler.draw();
        r.at_us = ms_to_us(t_s * 1000.0);
        out.push_back(std::move(r));
        t_s += rng.next_exponential(rate_per_s);
    }
    return out;
}

std::vector<ArrivalRecord> gen_throughput(double ceiling_per_s, double duration_s,
                                          PromptSampler& sampler) {
    if (!(ceiling_per_s > 0.0)) throw ConfigError("throughput ceiling must be > 0");
    if (!(duration_s > 0.0)) throw ConfigError("duration must be > 0");
    std::vector<ArrivalRecord> out;
    auto count = static_cast<std::int64_t>(std::floor(duration_s * ceiling_per_s));
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        ArrivalRecord r = sampler.draw();
        r.at_us = ms_to_us(static_cast<double>(i) / ceiling_per_s * 1000.0);
        out.push_back(std::move(r));
    }
    return out;
}

ConcurrentDriver::ConcurrentDriver(int n, double duration_s, PromptSampler& sampler)
    : n_(n), horizon_us_(ms_to_us(duration_s * 1000.0)), sampler_(&sampler) {
    if (n < 1) throw ConfigError("concurrency must be >= 1");
    if (!(duration_s > 0.0)) throw ConfigError("duration must be > 0");
}

std::vector<ArrivalRecord> ConcurrentDriver::initial_burst() {
    std::vector<ArrivalRecord> out;
    out.reserve(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
        ArrivalRecord r = sampler_->draw();
        r.at_us = 0;
        out.push_back(std::move(r));
    }
    return out;
}

std::optional<ArrivalRecord> ConcurrentDriver::on_terminal(MicroTs now_us) {
    if (now_us >= horizon_us_) return std::nullopt;
    ArrivalRecord r = sampler_->draw();
    r.at_us = now_us;
    return r;
}

SweepDriver::SweepDriver(const SweepSpec& spec, PromptSampler& sampler)
    : spec_(spec), sampler_(&sampler) {
    if (!(spec_.start_rate_per_s > 0.0)) throw ConfigError("sweep start rate must be > 0");
    if (!(spec_.step_rate_per_s > 0.0)) throw ConfigError("sweep step must be > 0");
    if (!(spec_.stage_duration_s > 0.0)) throw ConfigError("sweep stage duration must be > 0");
}

SweepDriver::Stage SweepDriver::stage_arrivals(int stage_index, MicroTs start_us) {
    Stage s;
    s.index = stage_index;
    s.rate_per_s = spec_.start_rate_per_s + stage_index * spec_.step_rate_per_s;
    auto count = static_cast<std::int64_t>(std::floor(spec_.stage_duration_s * s.rate_per_s));
    for (std::int64_t i = 0; i < count; ++i) {
        ArrivalRecord r = sampler_->draw();
        r.at_us = start_us + ms_to_us(static_cast<double>(i) / s.rate_per_s * 1000.0);
        s.arrivals.push_back(std::move(r));
    }
    return s;
}

bool SweepDriver::should_stop(int stage_index, double stage_p99_ms, double stage0_p99_ms,
                              bool any_rejection) const {
    if (any_rejection) return true;
    if (stage_index + 1 >= spec_.max_stages) return true;
    if (stage_index > 0 && stage0_p99_ms > 0.0 &&
        stage_p99_ms > spec_.p99_stop_multiplier * stage0_p99_ms)
        return true;
    return false;
}

std::string dump_arrivals_csv(std::span<const ArrivalRecord> arrivals) {
    std::ostringstream out;
    out << "arrival_us,prompt_hash,origin_lat,origin_lon,token_count\n";
    for (const auto& a : arrivals) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%lld,%llu,%.6f,%.6f,%zu\n",
                      static_cast<long long>(a.at_us),
                      static_cast<unsigned long long>(a.prompt_hash), a.origin.lat, a.origin.lon,
                      a.tokens.size());
        out << buf;
    }
    return out.str();
}

}  // namespace gorgo

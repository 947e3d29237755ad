#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gorgo/geo.hpp"
#include "gorgo/rng.hpp"
#include "gorgo/types.hpp"

namespace gorgo {

enum class WorkloadKind { kNone, kConcurrent, kPoisson, kThroughput, kSweep };

WorkloadKind workload_kind_from_string(const std::string& s);
std::string workload_kind_to_string(WorkloadKind k);

struct LengthDist {
    enum class Kind { kFixed, kUniform, kLognormal };
    Kind kind = Kind::kFixed;
    double a = 0.0;  // fixed: value; uniform: min; lognormal: median
    double b = 0.0;  // uniform: max; lognormal: sigma
    std::int64_t sample(rng::Stream& rng) const;
};

struct SyntheticPromptSpec {
    int shared_prefixes = 8;  // K
    LengthDist prefix_len{LengthDist::Kind::kFixed, 1024, 0};
    LengthDist suffix_len{LengthDist::Kind::kLognormal, 256, 0.5};
};

struct TraceSpec {
    std::string prompts_path;
    std::string geolookup_path;
};

struct OriginSpec {
    struct Point {
        GeoPoint point;
        double weight = 1.0;
    };
    std::vector<Point> points;       // synthetic prompts sample from these
    GeoPoint fallback;               // trace prompts with unknown hashes land here
};

struct PromptSpec {
    bool synthetic = true;
    SyntheticPromptSpec synth;
    TraceSpec trace;
    LengthDist output_tokens{LengthDist::Kind::kFixed, 64, 0};
};

struct SweepSpec {
    double start_rate_per_s = 2.0;
    double step_rate_per_s = 2.0;
    double stage_duration_s = 10.0;
    double p99_stop_multiplier = 5.0;
    int max_stages = 12;
};

struct WorkloadSpec {
    WorkloadKind kind = WorkloadKind::kPoisson;
    double duration_s = 60.0;
    int concurrency = 10;        // concurrent
    double rate_per_s = 1.0;     // poisson
    double ceiling_per_s = 100;  // throughput
    SweepSpec sweep;
    PromptSpec prompts;
    OriginSpec origins;
};

struct ArrivalRecord {
    MicroTs at_us = 0;
    TokenSeq tokens;
    GeoPoint origin;
    bool origin_fallback = false;
    std::uint64_t prompt_hash = 0;
    std::int64_t output_tokens = 0;
    int prefix_id = -1;  // synthetic shared-prefix index, -1 for trace prompts
};

/// Prefix-preserving pseudo-tokenization of trace text: consecutive 4-byte
/// windows hashed into a 2^16 vocabulary. Identical text prefixes yield
/// identical token prefixes, which is the property the routing policies
/// consume.
TokenSeq tokenize_text(std::string_view text);

/// The K shared prefixes of a synthetic population.
std::vector<TokenSeq> synth_shared_prefix(const SyntheticPromptSpec& spec, std::uint64_t seed);

struct TraceEntry {
    TokenSeq tokens;
    std::uint64_t prompt_hash = 0;
    GeoPoint origin;
    bool origin_fallback = false;
};

struct TracePrompts {
    std::vector<TraceEntry> entries;
    std::int64_t hash_misses = 0;
};

// Reads {"prompt": ...} JSONL plus the hash->(lat,lon) lookup. Throws
// DataError with a line number on malformed lines.
TracePrompts load_trace(std::istream& prompts_jsonl, std::istream& geolookup_jsonl,
                        const GeoPoint& fallback);
TracePrompts load_trace_files(const std::string& prompts_path, const std::string& geolookup_path,
                              const GeoPoint& fallback);

/// Draws prompts/origins deterministically in call order.
class PromptSampler {
public:
    virtual ~PromptSampler() = default;
    virtual ArrivalRecord draw() = 0;
};

class SyntheticSampler final : public PromptSampler {
public:
    SyntheticSampler(const SyntheticPromptSpec& spec, const LengthDist& output_tokens,
                     const OriginSpec& origins, std::uint64_t seed);
    ArrivalRecord draw() override;

private:
    std::vector<TokenSeq> prefixes_;
    LengthDist suffix_spec_;
    LengthDist output_tokens_;
    OriginSpec origins_;
    double total_weight_ = 0.0;
    rng::Stream pick_;
    rng::Stream suffix_;
    rng::Stream lengths_;
    rng::Stream origin_rng_;
};

class TraceSampler final : public PromptSampler {
public:
    TraceSampler(TracePrompts trace, const LengthDist& output_tokens, std::uint64_t seed);
    ArrivalRecord draw() override;

private:
    TracePrompts trace_;
    LengthDist output_tokens_;
    std::size_t next_ = 0;
    rng::Stream lengths_;
};

std::unique_ptr<PromptSampler> make_sampler(const PromptSpec& prompts, const OriginSpec& origins,
                                            std::uint64_t seed);

// Open-loop arrival streams. Timestamps are non-decreasing.
std::vector<ArrivalRecord> gen_poisson(double rate_per_s, double duration_s,
                                       PromptSampler& sampler, std::uint64_t seed);
std::vector<ArrivalRecord> gen_throughput(double ceiling_per_s, double duration_s,
                                          PromptSampler& sampler);

/// Closed-loop fixed-concurrency stream: n requests in flight at all times; a
/// completion before the horizon triggers a replacement arrival.
class ConcurrentDriver {
public:
    ConcurrentDriver(int n, double duration_s, PromptSampler& sampler);
    std::vector<ArrivalRecord> initial_burst();
    std::optional<ArrivalRecord> on_terminal(MicroTs now_us);

private:
    int n_;
    MicroTs horizon_us_;
    PromptSampler* sampler_;
};

/// Staged constant-rate stream: stage k runs at start + k*step. The caller
/// evaluates each finished stage and asks for the next.
class SweepDriver {
public:
    SweepDriver(const SweepSpec& spec, PromptSampler& sampler);

    struct Stage {
        int index = 0;
        double rate_per_s = 0.0;
        std::vector<ArrivalRecord> arrivals;
    };

    Stage stage_arrivals(int stage_index, MicroTs start_us);
    // Stop once a stage's p99 exceeds multiplier x stage-0 p99, any request
    // was rejected, or the stage budget is exhausted.
    bool should_stop(int stage_index, double stage_p99_ms, double stage0_p99_ms,
                     bool any_rejection) const;

private:
    SweepSpec spec_;
    PromptSampler* sampler_;
};

// Debug dump: "arrival_us,prompt_hash,origin_lat,origin_lon,token_count".
std::string dump_arrivals_csv(std::span<const ArrivalRecord> arrivals);

}  // namespace gorgo

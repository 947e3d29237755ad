#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gorgo {

// Abstract token ids; the engine never sees real tokenizer output.
using Token = std::uint32_t;
using TokenSeq = std::vector<Token>;

// Simulated clock: integer microseconds. Model arithmetic stays in double
// milliseconds and is rounded once when it becomes a timestamp.
using MicroTs = std::int64_t;

inline MicroTs ms_to_us(double ms) { return static_cast<MicroTs>(std::llround(ms * 1000.0)); }
inline double us_to_ms(MicroTs us) { return static_cast<double>(us) / 1000.0; }

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input data, corrupt traces, mismatched report digests.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a; used for prompt hashing, config digests and seed derivation.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

}  // namespace gorgo

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>

#include "gorgo/types.hpp"

namespace gorgo {

inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180]
};

bool geo_point_valid(const GeoPoint& p);

/// Great-circle distance on a sphere of radius 6371 km. Symmetric by
/// construction (the same floating expression both ways).
double haversine_km(const GeoPoint& a, const GeoPoint& b);

/// Region with the minimum haversine distance to `origin`; ties go to the
/// lexicographically smallest region id. Throws ConfigError on an empty list.
std::string nearest_region(const GeoPoint& origin,
                           std::span<const std::pair<std::string, GeoPoint>> regions);

/// hash(prompt) -> coordinates table, as produced by trace preprocessing.
/// File format: JSONL, {"hash": <u64 decimal>, "lat": <f>, "lon": <f>}.
class GeoLookup {
public:
    void put(std::uint64_t hash, GeoPoint p) { map_[hash] = p; }
    std::optional<GeoPoint> find(std::uint64_t hash) const;
    std::size_t size() const { return map_.size(); }

    static GeoLookup load_jsonl(std::istream& in);
    void save_jsonl(std::ostream& out) const;

private:
    std::unordered_map<std::uint64_t, GeoPoint> map_;
};

struct ResolvedOrigin {
    GeoPoint point;
    bool fallback = false;
};

ResolvedOrigin resolve_origin(std::uint64_t prompt_hash, const GeoLookup& lookup,
                              const GeoPoint& fallback);

}  // namespace gorgo

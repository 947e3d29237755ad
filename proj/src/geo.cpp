#include "gorgo/geo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace gorgo {

namespace {
constexpr double kDegToRad = 0.017453292519943295;
}

bool geo_point_valid(const GeoPoint& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
           p.lon >= -180.0 && p.lon <= 180.0;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    double phi1 = a.lat * kDegToRad;
    double phi2 = b.lat * kDegToRad;
    double dphi = (b.lat - a.lat) * kDegToRad;
    double dlam = (b.lon - a.lon) * kDegToRad;

    double sp = std::sin(dphi / 2.0);
    double sl = std::sin(dlam / 2.0);
    double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    h = std::min(1.0, h);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

std::string nearest_region(const GeoPoint& origin,
                           std::span<const std::pair<std::string, GeoPoint>> regions) {
    if (regions.empty()) throw ConfigError("nearest_region: empty region list");
    const std::string* best_id = nullptr;
    double best_km = 0.0;
    for (const auto& [id, loc] : regions) {
        double km = haversine_km(origin, loc);
        if (best_id == nullptr || km < best_km || (km == best_km && id < *best_id)) {
            best_id = &id;
            best_km = km;
        }
    }
    return *best_id;
}

std::optional<GeoPoint> GeoLookup::find(std::uint64_t hash) const {
    auto it = map_.find(hash);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

GeoLookup GeoLookup::load_jsonl(std::istream& in) {
    GeoLookup lookup;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("hash") || !j.contains("lat") || !j.contains("lon"))
            throw DataError("geolookup line " + std::to_string(lineno) + ": malformed record");
        GeoPoint p{j["lat"].get<double>(), j["lon"].get<double>()};
        if (!geo_point_valid(p))
            throw DataError("geolookup line " + std::to_string(lineno) + ": coordinates out of range");
        lookup.put(j["hash"].get<std::uint64_t>(), p);
    }
    return lookup;
}

void GeoLookup::save_jsonl(std::ostream& out) const {
    // Sorted by hash so dumps are reproducible.
    std::vector<std::pair<std::uint64_t, GeoPoint>> rows(map_.begin(), map_.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [hash, p] : rows) {
        nlohmann::ordered_json j;
        j["hash"] = hash;
        j["lat"] = p.lat;
        j["lon"] = p.lon;
        out << j.dump() << '\n';
    }
}

ResolvedOrigin resolve_origin(std::uint64_t prompt_hash, const GeoLookup& lookup,
                              const GeoPoint& fallback) {
    if (auto p = lookup.find(prompt_hash)) return {*p, false};
    return {fallback, true};
}

}  // namespace gorgo

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gorgo/geo.hpp"
#include "gorgo/rng.hpp"

using namespace gorgo;

namespace {

// Independent great-circle oracle: spherical law of cosines.
double law_of_cosines_km(const GeoPoint& a, const GeoPoint& b) {
    constexpr double rad = 0.017453292519943295;
    double p1 = a.lat * rad, p2 = b.lat * rad;
    double dl = (b.lon - a.lon) * rad;
    double c = std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos(dl);
    c = std::min(1.0, std::max(-1.0, c));
    return kEarthRadiusKm * std::acos(c);
}

GeoPoint random_point(rng::Stream& rng) {
    return {rng.next_range(-90.0, 90.0), rng.next_range(-180.0, 180.0)};
}

}  // namespace

TEST_CASE("haversine fixed points") {
    GeoPoint berlin{52.52, 13.405};
    CHECK(haversine_km(berlin, berlin) == doctest::Approx(0.0).epsilon(1e-12));

    GeoPoint eq0{0, 0}, eq180{0, 180};
    CHECK(haversine_km(eq0, eq180) ==
          doctest::Approx(3.14159265358979323846 * kEarthRadiusKm).epsilon(1e-9));

    GeoPoint sf{37.77, -122.42};
    CHECK(std::abs(haversine_km(sf, berlin) - law_of_cosines_km(sf, berlin)) < 0.1);
}

TEST_CASE("haversine symmetry and bounds on random pairs") {
    rng::Stream rng(19);
    double half_circumference = 3.14159265358979323846 * kEarthRadiusKm;
    for (int i = 0; i < 10000; ++i) {
        GeoPoint a = random_point(rng), b = random_point(rng);
        double d1 = haversine_km(a, b);
        double d2 = haversine_km(b, a);
        CHECK(d1 == d2);  // identical floating expression both ways
        CHECK(d1 >= 0.0);
        CHECK(d1 <= half_circumference + 1e-9);
        CHECK(std::abs(d1 - law_of_cosines_km(a, b)) < 0.1);
    }
}

TEST_CASE("nearest_region picks the minimum-distance region") {
    std::vector<std::pair<std::string, GeoPoint>> regions{
        {"us-west", {45.59, -122.60}},
        {"germany", {50.11, 8.68}},
        {"israel", {32.08, 34.78}},
    };

    // Origin exactly at a region.
    CHECK(nearest_region({32.08, 34.78}, regions) == "israel");

    // Central Europe; verify against the oracle.
    GeoPoint prague{50.08, 14.44};
    std::string best;
    double best_km = 1e18;
    for (const auto& [id, loc] : regions) {
        double km = law_of_cosines_km(prague, loc);
        if (km < best_km) {
            best_km = km;
            best = id;
        }
    }
    CHECK(best == "germany");
    CHECK(nearest_region(prague, regions) == best);

    // Tie: two regions at identical coordinates -> lexicographically smaller.
    std::vector<std::pair<std::string, GeoPoint>> tied{{"zeta", {1, 1}}, {"alpha", {1, 1}}};
    CHECK(nearest_region({1, 1}, tied) == "alpha");

    // Permutation invariance.
    std::vector<std::pair<std::string, GeoPoint>> reversed(regions.rbegin(), regions.rend());
    rng::Stream rng(23);
    for (int i = 0; i < 200; ++i) {
        GeoPoint origin = random_point(rng);
        CHECK(nearest_region(origin, regions) == nearest_region(origin, reversed));
    }

    CHECK_THROWS_AS(nearest_region({0, 0}, {}), ConfigError);
}

TEST_CASE("geo lookup jsonl round-trip and fallback resolution") {
    GeoLookup lookup;
    lookup.put(fnv1a64("hello"), {10.0, 20.0});
    lookup.put(fnv1a64("world"), {-33.5, 151.2});

    std::ostringstream out;
    lookup.save_jsonl(out);
    std::istringstream in(out.str());
    GeoLookup back = GeoLookup::load_jsonl(in);
    CHECK(back.size() == 2);
    auto p = back.find(fnv1a64("hello"));
    REQUIRE(p.has_value());
    CHECK(p->lat == doctest::Approx(10.0));
    CHECK(p->lon == doctest::Approx(20.0));

    GeoPoint fallback{52.0, 5.0};
    auto known = resolve_origin(fnv1a64("world"), back, fallback);
    CHECK_FALSE(known.fallback);
    CHECK(known.point.lat == doctest::Approx(-33.5));

    auto unknown = resolve_origin(fnv1a64("missing"), back, fallback);
    CHECK(unknown.fallback);
    CHECK(unknown.point.lat == doctest::Approx(52.0));

    std::istringstream bad("{\"hash\": 1}\n");
    CHECK_THROWS_AS(GeoLookup::load_jsonl(bad), DataError);
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gorgo/config.hpp"
#include "gorgo/cost.hpp"
#include "gorgo/geo.hpp"
#include "gorgo/policy.hpp"
#include "gorgo/prefix_index.hpp"
#include "gorgo/sim.hpp"
#include "gorgo/telemetry.hpp"
#include "gorgo/workload.hpp"

namespace py = pybind11;
using namespace gorgo;

PYBIND11_MODULE(_gorgo, m) {
    m.doc() = "Geo-distributed LLM load-balancing engine and cluster simulator";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");

    // --- cost model ---
    py::class_<CostParams>(m, "CostParams")
        .def(py::init<>())
        .def(py::init([](double t_p, double q_s, double base) {
                 return CostParams{t_p, q_s, base};
             }),
             py::arg("t_p_ms_per_token"), py::arg("q_s") = 1.0, py::arg("base_latency_ms") = 0.0)
        .def_readwrite("t_p_ms_per_token", &CostParams::t_p_ms_per_token)
        .def_readwrite("q_s", &CostParams::q_s)
        .def_readwrite("base_latency_ms", &CostParams::base_latency_ms);

    py::class_<CostBreakdown>(m, "CostBreakdown")
        .def_readonly("network_ms", &CostBreakdown::network_ms)
        .def_readonly("prefill_ms", &CostBreakdown::prefill_ms)
        .def_readonly("queue_ms", &CostBreakdown::queue_ms)
        .def_readonly("total_ms", &CostBreakdown::total_ms)
        .def_readonly("stale", &CostBreakdown::stale)
        .def("__repr__", [](const CostBreakdown& b) {
            return "CostBreakdown(network=" + std::to_string(b.network_ms) +
                   ", prefill=" + std::to_string(b.prefill_ms) +
                   ", queue=" + std::to_string(b.queue_ms) + ")";
        });

    py::class_<Calibration>(m, "Calibration")
        .def(py::init<>())
        .def(py::init([](double intercept, double slope) {
                 return Calibration{intercept, slope, 1.0, 0};
             }),
             py::arg("intercept_ms"), py::arg("slope_ms_per_token"))
        .def_readwrite("intercept_ms", &Calibration::intercept_ms)
        .def_readwrite("slope_ms_per_token", &Calibration::slope_ms_per_token)
        .def_readonly("r_squared", &Calibration::r_squared)
        .def_readonly("n", &Calibration::n);

    py::class_<RegionState>(m, "RegionState")
        .def(py::init<>())
        .def_readwrite("region_id", &RegionState::region_id)
        .def_readwrite("running_requests", &RegionState::running_requests)
        .def_readwrite("running_tokens", &RegionState::running_tokens)
        .def_readwrite("waiting_requests", &RegionState::waiting_requests)
        .def_readwrite("waiting_tokens", &RegionState::waiting_tokens)
        .def_readwrite("kv_cache_used_fraction", &RegionState::kv_cache_used_fraction)
        .def_readwrite("t_p_measured_ms", &RegionState::t_p_measured_ms)
        .def("pending_tokens", &RegionState::pending_tokens);

    py::class_<PeerSummary>(m, "PeerSummary")
        .def(py::init<>())
        .def_readwrite("region_id", &PeerSummary::region_id)
        .def_readwrite("rtt_ms", &PeerSummary::rtt_ms)
        .def_readwrite("state", &PeerSummary::state)
        .def_readwrite("as_of_us", &PeerSummary::as_of_us);

    m.def("saved_time_ms", &saved_time_ms, py::arg("hit_tokens"), py::arg("t_p_ms_per_token"));
    m.def("residual_prefill_ms", &residual_prefill_ms, py::arg("prompt_tokens"),
          py::arg("hit_tokens"), py::arg("t_p_ms_per_token"));
    m.def("queue_wait_ms", &queue_wait_ms, py::arg("pending_tokens"), py::arg("t_p_ms_per_token"),
          py::arg("q_s"));
    m.def(
        "estimate_cost",
        [](const PeerSummary& candidate, std::int64_t request_tokens, std::int64_t overlap_tokens,
           const CostParams& params, MicroTs now_us) {
            return estimate_cost(candidate, request_tokens, overlap_tokens, params, now_us);
        },
        py::arg("candidate"), py::arg("request_tokens"), py::arg("overlap_tokens"),
        py::arg("params"), py::arg("now_us") = 0);
    m.def(
        "fit_prefill_calibration",
        [](const std::vector<std::pair<std::int64_t, double>>& samples) {
            std::vector<PrefillObservation> obs;
            obs.reserve(samples.size());
            for (const auto& [x, y] : samples) obs.push_back({x, y});
            return fit_prefill_calibration(obs);
        },
        py::arg("samples"));

    // --- geo ---
    py::class_<GeoPoint>(m, "GeoPoint")
        .def(py::init<>())
        .def(py::init([](double lat, double lon) { return GeoPoint{lat, lon}; }), py::arg("lat"),
             py::arg("lon"))
        .def_readwrite("lat", &GeoPoint::lat)
        .def_readwrite("lon", &GeoPoint::lon);

    m.def("haversine_km", &haversine_km, py::arg("a"), py::arg("b"));
    m.def(
        "nearest_region",
        [](const GeoPoint& origin, const std::vector<std::pair<std::string, GeoPoint>>& regions) {
            return nearest_region(origin, regions);
        },
        py::arg("origin"), py::arg("regions"));
    m.def("fnv1a64", [](const std::string& s) { return fnv1a64(s); }, py::arg("text"));
    m.def("tokenize_text", &tokenize_text, py::arg("text"));

    // --- prefix index ---
    py::class_<MatchResult>(m, "MatchResult")
        .def_readonly("match_len", &MatchResult::match_len)
        .def_readonly("holders", &MatchResult::holders);

    py::class_<PrefixIndex>(m, "PrefixIndex")
        .def(py::init<std::int64_t, std::int64_t>(), py::arg("block_size") = 16,
             py::arg("capacity_blocks") = (1 << 16))
        .def(
            "insert",
            [](PrefixIndex& idx, const TokenSeq& tokens, const std::string& node_id,
               std::uint64_t now) { idx.insert(tokens, node_id, now); },
            py::arg("tokens"), py::arg("node_id"), py::arg("now") = 0)
        .def(
            "longest_prefix_match",
            [](const PrefixIndex& idx, const TokenSeq& tokens) {
                return idx.longest_prefix_match(tokens);
            },
            py::arg("tokens"))
        .def(
            "overlap_for_node",
            [](const PrefixIndex& idx, const TokenSeq& tokens, const std::string& node_id) {
                return idx.overlap_for_node(tokens, node_id);
            },
            py::arg("tokens"), py::arg("node_id"))
        .def("evict_to_capacity", &PrefixIndex::evict_to_capacity, py::arg("now") = 0)
        .def("total_blocks", &PrefixIndex::total_blocks)
        .def("capacity_blocks", &PrefixIndex::capacity_blocks)
        .def("block_size", &PrefixIndex::block_size)
        .def("debug_dump", &PrefixIndex::debug_dump);

    // --- statistics ---
    py::class_<SummaryStats>(m, "SummaryStats")
        .def_readonly("count", &SummaryStats::count)
        .def_readonly("mean", &SummaryStats::mean)
        .def_readonly("median", &SummaryStats::median)
        .def_readonly("std_dev", &SummaryStats::std_dev)
        .def_readonly("min", &SummaryStats::min)
        .def_readonly("max", &SummaryStats::max)
        .def_readonly("p50", &SummaryStats::p50)
        .def_readonly("p90", &SummaryStats::p90)
        .def_readonly("p95", &SummaryStats::p95)
        .def_readonly("p99", &SummaryStats::p99);

    m.def(
        "aggregate", [](const std::vector<double>& values) { return aggregate(values); },
        py::arg("values"));

    // --- simulation ---
    m.def(
        "run_simulation_json",
        [](const std::string& config_json, py::object seed) {
            nlohmann::json j = nlohmann::json::parse(config_json);
            SimConfig cfg = sim_config_from_json(j);
            if (!seed.is_none()) cfg.seed = seed.cast<std::uint64_t>();
            SimResult result = run_simulation(cfg);
            return py::make_tuple(report_to_json(result.report).dump(),
                                  export_event_log_jsonl(result.events));
        },
        py::arg("config_json"), py::arg("seed") = py::none(),
        "Run one simulation; returns (report_json, event_log_jsonl).");

    m.def("config_digest", [](const std::string& config_json) {
        return config_digest(sim_config_from_json(nlohmann::json::parse(config_json)));
    });
}

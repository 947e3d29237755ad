"""Geo-distributed LLM load balancing: cost model, prefix index and simulator."""

import json as _json

from gorgo._gorgo import (
    Calibration,
    ConfigError,
    CostBreakdown,
    CostParams,
    DataError,
    GeoPoint,
    MatchResult,
    PeerSummary,
    PrefixIndex,
    RegionState,
    SummaryStats,
    aggregate,
    config_digest,
    estimate_cost,
    fit_prefill_calibration,
    fnv1a64,
    haversine_km,
    nearest_region,
    queue_wait_ms,
    residual_prefill_ms,
    run_simulation_json,
    saved_time_ms,
    tokenize_text,
)

__all__ = [
    "Calibration",
    "ConfigError",
    "CostBreakdown",
    "CostParams",
    "DataError",
    "GeoPoint",
    "MatchResult",
    "PeerSummary",
    "PrefixIndex",
    "RegionState",
    "SummaryStats",
    "aggregate",
    "config_digest",
    "estimate_cost",
    "fit_prefill_calibration",
    "fnv1a64",
    "haversine_km",
    "nearest_region",
    "queue_wait_ms",
    "residual_prefill_ms",
    "run_simulation",
    "run_simulation_json",
    "saved_time_ms",
    "tokenize_text",
]


def run_simulation(config, seed=None):
    """Run one simulation from a config dict (or JSON string).

    Returns (report, event_log): the report parsed back into a dict and the
    event log as JSONL text.
    """
    if not isinstance(config, str):
        config = _json.dumps(config)
    report_json, event_log = run_simulation_json(config, seed)
    return _json.loads(report_json), event_log

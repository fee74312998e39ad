"""Incremental instance-segmentation learning lab."""

from ._core import (
    AssessorModel,
    CalibrationError,
    ConfigError,
    DataError,
    budgeted_instances,
    decode_clustering,
    expected_pq,
    extract_features,
    feature_names,
    fit_assessor,
    generate_scene,
    match_instances,
    membership_score,
    panoptic_quality,
    rebalance_uniform,
    route,
    run_campaign,
    run_cli,
    simulate_inference,
    strategy_names,
)

__all__ = [
    "AssessorModel",
    "CalibrationError",
    "ConfigError",
    "DataError",
    "budgeted_instances",
    "decode_clustering",
    "expected_pq",
    "extract_features",
    "feature_names",
    "fit_assessor",
    "generate_scene",
    "match_instances",
    "membership_score",
    "panoptic_quality",
    "rebalance_uniform",
    "route",
    "run_campaign",
    "run_cli",
    "simulate_inference",
    "strategy_names",
]

"""Tri-view geo-localization dataset tooling: geodesy, quality gates,
contrastive objective, toy training and retrieval metrics."""

import json

from ._geobridge import (
    EARTH_RADIUS_M,
    TOOL_VERSION,
    GeoBridgeError,
    geo_to_pixel,
    haversine_distance,
    infonce,
    laplacian_variance,
    load_image,
    overlap_ratio,
    pixel_to_geo,
    read_gbem,
    run_cli,
    total_loss,
    train_toy,
    write_gbem,
)
from . import _geobridge

__version__ = TOOL_VERSION

__all__ = [
    "EARTH_RADIUS_M",
    "GeoBridgeError",
    "evaluate",
    "gate_report",
    "geo_to_pixel",
    "haversine_distance",
    "infonce",
    "laplacian_variance",
    "load_image",
    "overlap_ratio",
    "pixel_to_geo",
    "read_gbem",
    "run_cli",
    "total_loss",
    "train_toy",
    "write_gbem",
]


def gate_report(image, thresholds=None, id="image"):
    """Run the BH -> C -> UN cascade on an HxW or HxWx3 uint8 array."""
    return json.loads(_geobridge._gate_report_json(image, thresholds, id))


def evaluate(rankings, ground_truth, k_list=(1, 5, 10)):
    """R@k, R@1% and AP for ranked gallery indices, one list per query."""
    return json.loads(_geobridge._evaluate_json(rankings, ground_truth, list(k_list)))

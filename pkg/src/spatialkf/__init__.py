"""Spatial Kalman filtering of county-level rate panels."""

from .analysis import (
    YearlyAssessment,
    absolute_errors,
    actual_hotspots,
    assess,
    general_accuracy,
    hotspot_accuracy,
    multi_year_study,
    sensitivity_analysis,
    vulnerability_levels,
)
from .data import CountyPanel, DatasetKind, apply_rio_arriba_fix, interpolate_biennial, load_panel
from .estimators import SpatialKalmanForecaster, VulnerabilityLevels
from .filter import FilterState, NoiseConfig, marginal_std, predict, run, update
from .geo import (
    CentroidTable,
    GeoPoint,
    SpatialCovariance,
    build_process_covariance,
    calibrate_decay,
    haversine_km,
)

__version__ = "0.1.0"

__all__ = [
    "CentroidTable",
    "CountyPanel",
    "DatasetKind",
    "FilterState",
    "GeoPoint",
    "NoiseConfig",
    "SpatialCovariance",
    "SpatialKalmanForecaster",
    "VulnerabilityLevels",
    "YearlyAssessment",
    "absolute_errors",
    "actual_hotspots",
    "apply_rio_arriba_fix",
    "assess",
    "build_process_covariance",
    "calibrate_decay",
    "general_accuracy",
    "haversine_km",
    "hotspot_accuracy",
    "interpolate_biennial",
    "load_panel",
    "marginal_std",
    "multi_year_study",
    "predict",
    "run",
    "sensitivity_analysis",
    "update",
    "vulnerability_levels",
]

"""Geodesic X-ray transform of symmetric tensor fields on 2D conformal discs.

Numerical checks of Pestov-type energy identities, frequency localization
on the sphere bundle, and half-order stability estimates.
"""
from .geometry import MetricDisc, BoundaryChart, PhasePoint, metric_from_spec, PRESETS
from .grid import DiscGrid

__version__ = "0.1.0"

__all__ = ["MetricDisc", "BoundaryChart", "PhasePoint", "metric_from_spec", "PRESETS", "DiscGrid"]

"""Ruin probabilities for multivariate renewal risk models with Brownian perturbation."""

from .geometry import Allocation, GaugeSet, RuinSetKind, RuinSetSpec, build_gauge, contains, gauge_project
from .rng import Stream

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "GaugeSet",
    "RuinSetKind",
    "RuinSetSpec",
    "Stream",
    "build_gauge",
    "contains",
    "gauge_project",
]

"""Disordered Kuramoto synchronization toolkit.

Stationary synchronized states, spectral analysis of the linearized
evolution operator (including its Jordan block at zero), stochastic
simulation of the fluctuation field, and finite-N rotator ensembles.
"""

from .fields import DisorderedField, Grid
from .stationary import ModelParams, StationaryState, build_stationary

__version__ = "0.1.0"

__all__ = [
    "DisorderedField",
    "Grid",
    "ModelParams",
    "StationaryState",
    "build_stationary",
    "__version__",
]

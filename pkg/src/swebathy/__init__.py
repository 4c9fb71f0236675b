"""Bathymetry reconstruction from free-surface observations.

A Chebyshev collocation solver for the 1D shallow water equations, its
continuous adjoint, and gradient descent on the bottom profile.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (
    ConfigurationError,
    DomainError,
    DryBoundaryError,
    NumericalFailure,
    ParseError,
    SweBathyError,
    UsageError,
)
from .grid import Grid, SampledCurve, build_grid
from .forward import Bathymetry, BoundaryForcing, PhysParams, Trajectory, run_forward
from .adjoint import run_adjoint
from .objective import ObjectiveWeights, SensorLayout
from .data_io import ObservationMode, ObservationSet, TimeSeries
from .metrics import ErrorReport, bathymetry_errors, series_rel_l2
from .optimizer import OptimizerConfig, ReconstructionResult, Termination, reconstruct

__all__ = [
    "BACKEND",
    "Bathymetry",
    "BoundaryForcing",
    "ConfigurationError",
    "DomainError",
    "DryBoundaryError",
    "ErrorReport",
    "Grid",
    "NumericalFailure",
    "ObjectiveWeights",
    "ObservationMode",
    "ObservationSet",
    "OptimizerConfig",
    "ParseError",
    "PhysParams",
    "ReconstructionResult",
    "SampledCurve",
    "SensorLayout",
    "SweBathyError",
    "Termination",
    "TimeSeries",
    "Trajectory",
    "UsageError",
    "bathymetry_errors",
    "build_grid",
    "reconstruct",
    "run_adjoint",
    "run_forward",
    "series_rel_l2",
]

"""Forecasting by fusing a simplified dynamics model with a Hankel-DMD measurement surrogate."""

from .baseline import EnsembleTrace, monte_carlo_propagate
from .dynamics import (
    Cr3bp,
    LinearSystem,
    OrbitalElements,
    Pendulum,
    Trajectory,
    TwoBody,
    VanDerPol,
    propagate,
    rk4_step,
)
from .errors import DmdFusionError
from .fusion import FilterConfig, run_filter
from .iod import GaussianBelief
from .measurements import MeasurementKind, MeasurementModel, MeasurementSeries, NoiseSpec
from .metrics import normalized_error
from .surrogate import DmdModel, EnergyThreshold, FixedRank, HankelParams, fit, forecast

__version__ = "0.1.0"

__all__ = [
    "Cr3bp",
    "DmdFusionError",
    "DmdModel",
    "EnergyThreshold",
    "EnsembleTrace",
    "FilterConfig",
    "FixedRank",
    "GaussianBelief",
    "HankelParams",
    "LinearSystem",
    "MeasurementKind",
    "MeasurementModel",
    "MeasurementSeries",
    "NoiseSpec",
    "OrbitalElements",
    "Pendulum",
    "Trajectory",
    "TwoBody",
    "VanDerPol",
    "fit",
    "forecast",
    "monte_carlo_propagate",
    "normalized_error",
    "propagate",
    "rk4_step",
    "run_filter",
]

"""Simulator, native-gate compiler and fitting toolkit for spin-qubit phase-flip codes."""
from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .analysis import (
    CurveModelRegressor,
    FitResult,
    GammaModelParams,
    GammaModelRegressor,
    fit_decay,
    fit_gamma_model,
    gamma_ideal,
    gamma_linear,
    gamma_model,
)
from .circuit import NativeCircuit
from .compiler import LogicalCircuit, insert_readout_reset, lower, verify_equivalence
from .curves import DecayCurve
from .experiments import ExperimentSpec, list_experiments, run_experiment
from .gates import DeviceModel
from .noise import ErrorInjection, NoiseModel, ReadoutModel, ResetModel, calibrate_noise
from .state import StateVector, apply_unitary, new_state

__all__ = [
    "CurveModelRegressor",
    "DecayCurve",
    "DeviceModel",
    "ErrorInjection",
    "ExperimentSpec",
    "FitResult",
    "GammaModelParams",
    "GammaModelRegressor",
    "LogicalCircuit",
    "NativeCircuit",
    "NoiseModel",
    "ReadoutModel",
    "ResetModel",
    "StateVector",
    "apply_unitary",
    "calibrate_noise",
    "fit_decay",
    "fit_gamma_model",
    "gamma_ideal",
    "gamma_linear",
    "gamma_model",
    "insert_readout_reset",
    "list_experiments",
    "lower",
    "new_state",
    "run_experiment",
    "verify_equivalence",
]

"""Spectral Galerkin simulation of stochastic Navier-Stokes equations driven by
finite-dimensional symmetric stable Levy noise, with empirical invariant
measures and executable checks of the underlying energy estimates."""

from .errors import (
    BlowUpError,
    CalibrationError,
    ConfigError,
    CoverageError,
    DiagnosticError,
    LevyNSEError,
    MomentDivergenceError,
    ParameterError,
    SchemaError,
)
from .integrator import IntegratorConfig, LedgerConstants, TrajectoryRecord, simulate
from .measure_lab import EmpiricalMeasure, build_mu_T, stabilization_distance, tightness_report
from .ou_process import OUState, calibrate_alpha, moment_check, ou_exact_step, ou_stationary_init
from .spectral_model import SpectralModel, abstract_model, nse2d_model
from .stable_levy import RngStream, StableParams, levy_increment, sample_standard_stable

__all__ = [
    "BlowUpError", "CalibrationError", "ConfigError", "CoverageError", "DiagnosticError",
    "LevyNSEError", "MomentDivergenceError", "ParameterError", "SchemaError",
    "IntegratorConfig", "LedgerConstants", "TrajectoryRecord", "simulate",
    "EmpiricalMeasure", "build_mu_T", "stabilization_distance", "tightness_report",
    "OUState", "calibrate_alpha", "moment_check", "ou_exact_step", "ou_stationary_init",
    "SpectralModel", "abstract_model", "nse2d_model",
    "RngStream", "StableParams", "levy_increment", "sample_standard_stable",
]
__version__ = "0.1.0"

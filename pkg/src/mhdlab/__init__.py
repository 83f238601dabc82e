"""Pseudo-spectral incompressible MHD simulator and decay diagnostics."""

from .errors import (
    BoxPolicyError,
    ConfigurationError,
    MHDLabError,
    NumericalBlowupError,
    PicardDivergenceError,
    TimeStepError,
)
from .solver import MHDState, SolverConfig, run, step_ifrk4
from .spectral import Grid, build_grid

__version__ = "0.1.0"

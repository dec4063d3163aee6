"""Pseudospectral simulator and verification suite for the structurally damped
wave equation u_tt - Delta u + (-Delta)^alpha u_t + u_t + u + g(u) = f."""

from .dynamics import IntegratorConfig, ModelParams, Trajectory, integrate, integrate_auxiliary
from .errors import (
    ConfigError,
    CutoffError,
    DegenerateInput,
    FitError,
    NoContraction,
    NotAbsorbed,
    SdwaveError,
    StateBlowUp,
)
from .nonlinearity import Nonlinearity, exponent_table, growth_switch
from .spectral import Field, Grid, SobolevIndex, State

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CutoffError",
    "DegenerateInput",
    "Field",
    "FitError",
    "Grid",
    "IntegratorConfig",
    "ModelParams",
    "NoContraction",
    "Nonlinearity",
    "NotAbsorbed",
    "SdwaveError",
    "SobolevIndex",
    "State",
    "StateBlowUp",
    "Trajectory",
    "exponent_table",
    "growth_switch",
    "integrate",
    "integrate_auxiliary",
]

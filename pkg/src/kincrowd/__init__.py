"""Kinetic model of crowd motion in rooms and corridors, discretised on a
uniform grid with Lie splitting and Lax-Friedrichs transport."""

from .errors import ConfigError, DomainError, KinCrowdError, NumericStateError
from .scenario import ScenarioConfig, build_initial_field, load_and_validate
from .builtins import builtin
from .solver import run

__version__ = "0.1.0"

__all__ = ["ConfigError", "DomainError", "KinCrowdError", "NumericStateError",
           "ScenarioConfig", "build_initial_field", "load_and_validate", "builtin", "run"]

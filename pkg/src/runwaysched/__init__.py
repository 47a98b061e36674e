"""Simulation-based multi-objective optimization of runway operation schedules."""

from runwaysched.domain import (
    Aircraft,
    ObjectiveVector,
    OperationType,
    Scenario,
    Schedule,
    SeparationMatrix,
    SpacingBand,
    StochasticConfig,
    WeightClass,
    check_feasibility,
    check_triangle,
    load_scenario,
    save_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Aircraft",
    "ObjectiveVector",
    "OperationType",
    "Scenario",
    "Schedule",
    "SeparationMatrix",
    "SpacingBand",
    "StochasticConfig",
    "WeightClass",
    "check_feasibility",
    "check_triangle",
    "load_scenario",
    "save_scenario",
    "__version__",
]

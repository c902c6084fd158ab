"""otkit: sparse interior-point / column-generation solver for discrete
optimal transport linear programs."""

from .instance import (
    CostView,
    Explicit,
    GridMetric,
    InstanceError,
    OTInstance,
    ParseError,
    grid_cost,
    make_synthetic_instance,
    read_instance,
    write_instance,
)
from .ipm import SolveReport, SolverConfig, solve
from .oracle import ReferenceSolution, reference_solve, rwe

__all__ = [
    "CostView",
    "Explicit",
    "GridMetric",
    "InstanceError",
    "OTInstance",
    "ParseError",
    "ReferenceSolution",
    "SolveReport",
    "SolverConfig",
    "grid_cost",
    "make_synthetic_instance",
    "read_instance",
    "reference_solve",
    "rwe",
    "solve",
    "write_instance",
]

__version__ = "0.1.0"

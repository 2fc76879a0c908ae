"""First-passage percolation laboratory on Z^d and cone-like subgraphs."""

__version__ = "0.1.0"

from . import kernel
from .errors import (
    BudgetExceeded,
    ConefppError,
    DegenerateShape,
    EmptySlice,
    IsolatedSite,
    NoDetours,
    NoPlot,
    Unreachable,
    ValidationError,
    WitnessNotFound,
)
from .geometry import (
    Region,
    capsule,
    classify,
    cone,
    cone_interior,
    contains,
    cylinder,
    halfspace,
    lattice,
    logwedge,
    neighbors,
)
from .randomness import Distribution, WeightField
from . import dynamical, estimators, geometry, metric, randomness, shape
from .dynamical import DynamicalEnvironment
from .metric import travel_time

__all__ = [
    "kernel",
    "geometry",
    "randomness",
    "metric",
    "estimators",
    "shape",
    "dynamical",
    "travel_time",
    "DynamicalEnvironment",
    "Region",
    "Distribution",
    "WeightField",
    "lattice",
    "cone",
    "cone_interior",
    "cylinder",
    "capsule",
    "halfspace",
    "logwedge",
    "contains",
    "classify",
    "neighbors",
    "ConefppError",
    "BudgetExceeded",
    "Unreachable",
    "EmptySlice",
    "NoDetours",
    "WitnessNotFound",
    "IsolatedSite",
    "DegenerateShape",
    "NoPlot",
    "ValidationError",
]

"""Graph matching for correlated two-community stochastic block models.

Signed chandelier counts estimated by color coding give similarity scores
between the vertices of two correlated graphs; thresholding them yields a
partial matching that a seeded common-neighbour procedure grows to a full
one, after which communities are recovered on the union graph.
"""

from .errors import CapacityError, ValidationError
from .graph import Graph
from .model import CorrelatedInstance, DerivedParams, ModelParams, derive, generate_csbm, h, solve_h

__all__ = [
    "CapacityError",
    "ValidationError",
    "Graph",
    "CorrelatedInstance",
    "DerivedParams",
    "ModelParams",
    "derive",
    "generate_csbm",
    "h",
    "solve_h",
]

__version__ = "0.1.0"

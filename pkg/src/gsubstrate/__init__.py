"""Graph substrate toolkit: one graph state, many realizations, forged tasks and schedules."""

__version__ = "0.1.0"

from .errors import GSubError  # noqa: E402
from .graph import Entity, GraphState, Relation, structural_equal, validate  # noqa: E402
from .schema_io import Realization, parse, serialize  # noqa: E402

__all__ = [
    "Entity",
    "GSubError",
    "GraphState",
    "Realization",
    "Relation",
    "__version__",
    "parse",
    "serialize",
    "structural_equal",
    "validate",
]

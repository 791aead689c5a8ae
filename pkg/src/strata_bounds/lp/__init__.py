"""Dense LP solver and exact polyhedral conversions."""

from .polyhedra import (
    PolyhedronError,
    PolyhedronH,
    PolyhedronV,
    enumerate_dual,
    format_hrep,
    hrep_to_vrep,
    image_polytope_hrep,
    parse_hrep,
    vrep_of_simplex,
    vrep_to_hrep,
)
from .simplex import LPError, LPResult, StandardLP, feasible, solve, solve_general

__all__ = [
    "LPError", "LPResult", "StandardLP", "feasible", "solve", "solve_general",
    "PolyhedronError", "PolyhedronH", "PolyhedronV", "enumerate_dual", "format_hrep",
    "hrep_to_vrep", "image_polytope_hrep", "parse_hrep", "vrep_of_simplex", "vrep_to_hrep",
]

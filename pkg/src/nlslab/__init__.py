"""Radial numerical laboratory for threshold dynamics of the 3D cubic
focusing nonlinear Schrodinger equation i u_t + Lap u + |u|^2 u = 0."""

__version__ = "0.1.0"

from .grid import RadialGrid, RadialField, integrate, laplacian, norms, momentum
from .ground_state import (GroundState, solve_ground_state, mass, energy,
                           delta, gn_constant, rescale_to_threshold)

__all__ = [
    "RadialGrid", "RadialField", "integrate", "laplacian", "norms", "momentum",
    "GroundState", "solve_ground_state", "mass", "energy", "delta",
    "gn_constant", "rescale_to_threshold", "__version__",
]

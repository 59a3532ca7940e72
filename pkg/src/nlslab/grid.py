"""Uniform radial grid on [0, r_max] with quadrature for 3D radial integrals.

All fields in the lab are radial samples f(r_i) of functions on R^3; every
integral is

    int_{R^3} f dx = 4*pi * int_0^{r_max} f(r) r^2 dr,

realized by composite Simpson weights (exact for cubics, so the ball volume
and low-degree moments come out to roundoff).  The discrete Laplacian is the
standard second-order radial stencil

    (Lap f)_i = (f_{i+1} - 2 f_i + f_{i-1})/dr^2 + (2/r_i)(f_{i+1} - f_{i-1})/(2 dr),

with the regularized origin form Lap f(0) = 6 (f(dr) - f(0))/dr^2 (valid for
even f with f'(0) = 0) and a homogeneous Dirichlet ghost at r_max.  First
derivatives for norm functionals use a fourth-order centered stencil with
even extension through the origin, so that gradient-based functionals are
accurate well below the 1e-6 tolerances used by the verification suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import GridMismatchError

ArrayLike = Union[np.ndarray, list, tuple]


def _simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights on n uniform nodes (3/8 closure if needed)."""
    if n < 8:
        raise ValueError("grid needs at least 8 points")
    w = np.zeros(n)
    if (n - 1) % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= h / 3.0
    else:
        # Simpson on the first n-4 intervals, Newton 3/8 on the last three.
        m = n - 3
        w[0] = w[m - 1] = 1.0
        w[1:m - 1:2] = 4.0
        w[2:m - 1:2] = 2.0
        w *= h / 3.0
        w[m - 1:] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


@dataclass(frozen=True)
class RadialGrid:
    """Uniform discretization of [0, r_max] with 3D radial quadrature."""

    n_points: int
    r_max: float
    spacing: float = field(init=False)
    nodes: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_points < 8:
            raise ValueError("n_points must be >= 8")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        object.__setattr__(self, "spacing", self.r_max / (self.n_points - 1))
        object.__setattr__(self, "nodes", np.linspace(0.0, self.r_max, self.n_points))
        object.__setattr__(self, "weights", _simpson_weights(self.n_points, self.spacing))

    def integrate(self, samples: ArrayLike):
        """4*pi * int f r^2 dr for samples f(r_i); complex input allowed."""
        samples = np.asarray(samples)
        if samples.shape != self.nodes.shape:
            raise GridMismatchError(
                f"expected {self.n_points} samples, got {samples.shape}")
        return 4.0 * np.pi * np.sum(self.weights * self.nodes**2 * samples)

    def field(self, values: ArrayLike) -> "RadialField":
        return RadialField(self, np.asarray(values, dtype=complex).copy())

    def field_from_function(self, fn) -> "RadialField":
        return self.field(fn(self.nodes))

    def zero_field(self) -> "RadialField":
        return RadialField(self, np.zeros(self.n_points, dtype=complex))

    def __eq__(self, other):
        return (isinstance(other, RadialGrid)
                and self.n_points == other.n_points
                and self.r_max == other.r_max)

    def __hash__(self):
        return hash((self.n_points, self.r_max))


@dataclass
class RadialField:
    """Complex radial sample on a RadialGrid; r_max value is treated as 0."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_points,):
            raise GridMismatchError("field length does not match grid")

    @property
    def re(self) -> np.ndarray:
        return self.values.real

    @property
    def im(self) -> np.ndarray:
        return self.values.imag

    def copy(self) -> "RadialField":
        return RadialField(self.grid, self.values.copy())

    def conj(self) -> "RadialField":
        return RadialField(self.grid, np.conj(self.values))

    def __add__(self, other: "RadialField") -> "RadialField":
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "RadialField":
        return RadialField(self.grid, self.values * scalar)

    __rmul__ = __mul__


def _check_same_grid(f: RadialField, g: RadialField):
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")


def integrate(f: RadialField, grid: RadialGrid | None = None):
    """Integral of f over R^3.  Raises GridMismatchError on a foreign grid."""
    if grid is not None and f.grid != grid:
        raise GridMismatchError("field defined on a different grid")
    val = f.grid.integrate(f.values)
    return val.real if abs(val.imag) == 0.0 else val


def laplacian(f: RadialField) -> RadialField:
    """Second-order radial Laplacian with regularized origin and Dirichlet end."""
    g = f.grid
    h = g.spacing
    r = g.nodes
    u = f.values
    out = np.empty_like(u)
    out[0] = 6.0 * (u[1] - u[0]) / h**2
    out[1:-1] = ((u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
                 + (u[2:] - u[:-2]) / (r[1:-1] * h))
    # ghost value 0 beyond r_max
    out[-1] = (-2.0 * u[-1] + u[-2]) / h**2 + (0.0 - u[-2]) / (r[-1] * h)
    return RadialField(g, out)


def radial_derivative(f: RadialField) -> RadialField:
    """d/dr by the 4th-order centered stencil, even extension through r = 0."""
    g = f.grid
    h = g.spacing
    u = f.values
    # even ghosts at the origin, zero ghosts past r_max
    ext = np.concatenate([u[2:0:-1], u, [0.0, 0.0]])
    out = (ext[:-4] - 8.0 * ext[1:-3] + 8.0 * ext[3:-1] - ext[4:]) / (12.0 * h)
    return RadialField(g, out)


def norms(f: RadialField) -> dict:
    """L2^2, L4^4, |grad|_2^2 and H1^2 of a radial field (3D measure)."""
    g = f.grid
    a2 = np.abs(f.values)**2
    df = radial_derivative(f)
    l2sq = g.integrate(a2).real
    l4_4 = g.integrate(a2**2).real
    grad_l2sq = g.integrate(np.abs(df.values)**2).real
    return {
        "l2sq": l2sq,
        "l4_4": l4_4,
        "grad_l2sq": grad_l2sq,
        "h1sq": l2sq + grad_l2sq,
    }


def h1_norm(f: RadialField) -> float:
    return float(np.sqrt(norms(f)["h1sq"]))


def momentum(f: RadialField) -> np.ndarray:
    """P[u] = Im int conj(u) grad u dx; identically zero for radial fields."""
    _ = f.values  # shape check happened at construction
    return np.zeros(3)

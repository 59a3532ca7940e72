"""Symmetric banded representation of radial Schrodinger operators.

For a radial function f on R^3 the substitution v(r) = r f(r) turns the
radial Laplacian into the plain 1D second derivative,

    (Lap f)(r) = v''(r) / r,        v(0) = 0,

and the weighted inner product int f g r^2 dr into int v w dr.  Operators
of the form -Lap + V(r) therefore become symmetric banded matrices acting
on the interior nodes r_1 .. r_{n-2} (homogeneous Dirichlet at both ends),
which is what the eigenproblems, the resolvent solves and the
Crank-Nicolson propagator all want.

The second derivative uses the 4th-order five-point stencil.  Because v is
odd through the origin (f even), the ghost values below r = 0 are exact:
v(-h) = -v(h).  Past r_max all fields of interest have decayed, so zero
ghosts close the band there.

Quadratic forms built here use the plain trapezoid pairing
<a, b> = 4*pi*h*sum(a_i b_i), under which the matrices are exactly
symmetric; this keeps identities like B(g,h) = B(h,g) at roundoff level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .grid import RadialGrid, RadialField


def _d2_pentadiagonal(m: int, h: float) -> sp.csr_matrix:
    """4th-order d^2/dr^2 on interior nodes, odd extension at the origin."""
    main = np.full(m, -30.0)
    main[0] = -29.0  # odd ghost: v(-h) = -v(h)
    off1 = np.full(m - 1, 16.0)
    off2 = np.full(m - 2, -1.0)
    a = sp.diags([off2, off1, main, off1, off2], [-2, -1, 0, 1, 2], format="csr")
    return a * (1.0 / (12.0 * h * h))


@dataclass
class VSpace:
    """v = r*f workspace attached to a RadialGrid."""

    grid: RadialGrid
    m: int = field(init=False)
    h: float = field(init=False)
    r_int: np.ndarray = field(init=False)

    def __post_init__(self):
        self.m = self.grid.n_points - 2
        self.h = self.grid.spacing
        self.r_int = self.grid.nodes[1:-1]
        self._d2 = _d2_pentadiagonal(self.m, self.h)
        self._stiff = None

    # -- representation maps ------------------------------------------------

    def to_v(self, values: np.ndarray) -> np.ndarray:
        return self.r_int * np.asarray(values)[1:-1]

    def from_v(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(self.m + 2, dtype=vec.dtype)
        out[1:-1] = vec / self.r_int
        # even-extension extrapolation of f to the origin, O(h^4)
        out[0] = (4.0 * out[1] - out[2]) / 3.0
        return out

    def field_from_v(self, vec: np.ndarray) -> RadialField:
        return RadialField(self.grid, self.from_v(vec.astype(complex)))

    # -- inner products ------------------------------------------------------

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        """<a,b> = 4*pi*h*sum a_i b_i  (trapezoid form of int a b dr)."""
        return 4.0 * np.pi * self.h * float(np.dot(a, b))

    def pair_fields(self, f: RadialField, g: RadialField) -> float:
        """Real L2 pairing (f,g) = Re int f conj(g) dx in the v metric."""
        fv = self.to_v(f.values)
        gv = self.to_v(g.values)
        return 4.0 * np.pi * self.h * float(np.real(np.vdot(gv, fv)))

    def trap_integral(self, values: np.ndarray):
        """Trapezoid 4*pi int f r^2 dr, consistent with the dot() metric."""
        vals = np.asarray(values)[1:-1]
        return 4.0 * np.pi * self.h * np.sum(self.r_int**2 * vals)

    # -- operators -----------------------------------------------------------

    @property
    def d2(self) -> sp.csr_matrix:
        return self._d2

    def minus_laplacian(self) -> sp.csr_matrix:
        return (-self._d2).tocsr()

    def schrodinger(self, potential: np.ndarray) -> sp.csr_matrix:
        """-Lap + V as a symmetric banded matrix; V sampled on all grid nodes."""
        v_int = np.asarray(potential)[1:-1]
        return (-self._d2 + sp.diags(v_int)).tocsr()

    def apply(self, op: sp.spmatrix, f: RadialField) -> RadialField:
        return self.field_from_v(op @ self.to_v(f.values))

    # -- H1 metric -----------------------------------------------------------

    def stiffness(self) -> sp.csr_matrix:
        """4*pi int (v')^2 dr as a symmetric tridiagonal form (gradient part)."""
        mdiag = np.full(self.m, 2.0)
        odiag = np.full(self.m - 1, -1.0)
        k = sp.diags([odiag, mdiag, odiag], [-1, 0, 1]) / self.h
        return (4.0 * np.pi * k).tocsr()

    def h1_gram(self) -> sp.csr_matrix:
        """SPD tridiagonal Gram of the radial H1 inner product (on v)."""
        if self._stiff is None:
            self._stiff = (self.stiffness()
                           + 4.0 * np.pi * self.h * sp.identity(self.m)).tocsr()
        return self._stiff

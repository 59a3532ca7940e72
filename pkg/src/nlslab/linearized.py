"""Linearization around the periodic soliton orbit.

Writing u = e^{it}(Q + h) turns the flow into dh/dt + L h = R(h) with the
block operator L = [[0, -L-], [L+, 0]] acting on (Re h, Im h), where

    L+ = -Lap + 1 - 3 Q^2,      L- = -Lap + 1 - Q^2,
    R(h) = i Q (2|h|^2 + h^2) + i |h|^2 h.

Both scalar operators are realized as symmetric banded matrices in the
v = r*f representation (see operators.py), so the quadratic form

    Phi(h) = 1/2 <L+ h1, h1> + 1/2 <L- h2, h2>,    B(g,h) its bilinear form,

is exactly symmetric in floating point and Phi(h) == B(h,h) by construction.

The single pair of real eigenvalues +-e0 of L is found through the
composition L- L+ y1 = -e0^2 y1 on the radial sector (a coarse dense solve
seeds a banded shift-inverted iteration), with y2 = L+ y1 / e0.  The
normalization keeps Y- = conj(Y+) and scales |B(Y+, Y-)| = 1.  Note the sign:
with L+ Y1 = e0 Y2 and L- Y2 = -e0 Y1 one has B(Y+,Y-) = -<L- Y2, Y2> < 0
because L- is nonnegative, so B(Y+,Y-) = -1 is the only value reachable by
real scaling; the mode projections divide by B(Y+,Y-) so all reconstruction
identities hold regardless.  The sign of the pair itself is fixed by
int grad Q . grad Y1 > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .errors import (AccuracyError, InsufficientDataError,
                     NonsimpleSpectrumError, PreconditionError, SpectralError)
from .grid import RadialGrid, RadialField, norms, radial_derivative
from .ground_state import GroundState, energy, mass
from .operators import VSpace


@dataclass
class LinearizedPair:
    """L+ and L- as symmetric banded matrices on the v = r*f representation."""

    gs: GroundState
    vs: VSpace = field(init=False)
    a_plus: sp.csr_matrix = field(init=False)
    a_minus: sp.csr_matrix = field(init=False)

    def __post_init__(self):
        self.vs = VSpace(self.gs.grid)
        q2 = self.gs.profile**2
        self.a_plus = self.vs.schrodinger(1.0 - 3.0 * q2)
        self.a_minus = self.vs.schrodinger(1.0 - q2)

    @property
    def grid(self) -> RadialGrid:
        return self.gs.grid

    def apply_plus(self, f: RadialField) -> RadialField:
        return self.vs.apply(self.a_plus, f)

    def apply_minus(self, f: RadialField) -> RadialField:
        return self.vs.apply(self.a_minus, f)

    def apply_block(self, h: RadialField) -> RadialField:
        """L h = (-L- h2, L+ h1) as a complex field."""
        v1 = self.vs.to_v(h.values.real)
        v2 = self.vs.to_v(h.values.imag)
        out1 = -(self.a_minus @ v2)
        out2 = self.a_plus @ v1
        return self.vs.field_from_v(out1 + 1j * out2)


def assemble(gs: GroundState) -> LinearizedPair:
    return LinearizedPair(gs)


def remainder(h: RadialField, gs: GroundState) -> RadialField:
    """R(h) = i Q (2|h|^2 + h^2) + i |h|^2 h."""
    z = h.values
    q = gs.profile
    return RadialField(h.grid, 1j * q * (2.0 * np.abs(z)**2 + z * z)
                       + 1j * np.abs(z)**2 * z)


# -- quadratic forms ----------------------------------------------------------

def bilinear(g: RadialField, h: RadialField, lp: LinearizedPair) -> float:
    """B(g,h) = 1/2 int (L+ g1) h1 + 1/2 int (L- g2) h2."""
    vs = lp.vs
    g1, g2 = vs.to_v(g.values.real), vs.to_v(g.values.imag)
    h1, h2 = vs.to_v(h.values.real), vs.to_v(h.values.imag)
    return 0.5 * (vs.dot(lp.a_plus @ g1, h1) + vs.dot(lp.a_minus @ g2, h2))


def phi(h: RadialField, lp: LinearizedPair) -> float:
    """Linearized energy Phi(h) = B(h,h)."""
    return bilinear(h, h, lp)


def phi_from_constraints(h: RadialField, gs: GroundState,
                         violation_tol: float = 1e-6) -> float:
    """Phi via int Q |h|^2 h1 + 1/4 int |h|^4; needs E[Q+h]=E[Q], M[Q+h]=M[Q]."""
    u = RadialField(h.grid, gs.profile + h.values)
    dm = abs(mass(u) - gs.mass) / gs.mass
    de = abs(energy(u) - gs.energy) / abs(gs.energy)
    if dm > violation_tol or de > violation_tol:
        raise PreconditionError(
            f"threshold constraints violated: dM={dm:.2e}, dE={de:.2e}")
    vs = VSpace(h.grid)
    z = h.values
    cubic = gs.profile * np.abs(z)**2 * z.real
    quartic = np.abs(z)**4
    return vs.trap_integral(cubic) + 0.25 * vs.trap_integral(quartic)


# -- eigenpair ----------------------------------------------------------------

@dataclass
class SpectralData:
    """Eigenvalue e0 > 0 of L with normalized eigenfunction pair."""

    e0: float
    y1: RadialField
    y2: RadialField
    b_norm: float            # B(Y+, Y-) after normalization (= -1)
    grad_overlap: float      # int grad Q . grad Y1 (positive by convention)
    residual_minus: float    # |L- y2 + e0 y1| / (|y1| + |y2|)

    def y_plus(self) -> RadialField:
        return RadialField(self.y1.grid, self.y1.values.real
                           + 1j * self.y2.values.real)

    def y_minus(self) -> RadialField:
        return RadialField(self.y1.grid, self.y1.values.real
                           - 1j * self.y2.values.real)


def _coarse_resample(values: np.ndarray, src: RadialGrid,
                     dst: RadialGrid) -> np.ndarray:
    spl = CubicSpline(src.nodes, values, bc_type=((1, 0.0), "not-a-knot"))
    return spl(dst.nodes)


def _coarse_composition_spectrum(gs: GroundState, n_coarse: int):
    """Dense eigenvalues of L- L+ on a coarse grid (structure + shift seed)."""
    cg = RadialGrid(n_coarse, gs.grid.r_max)
    q = _coarse_resample(gs.profile, gs.grid, cg)
    cvs = VSpace(cg)
    ap = cvs.schrodinger(1.0 - 3.0 * q**2).toarray()
    am = cvs.schrodinger(1.0 - q**2).toarray()
    return scipy.linalg.eigvals(am @ ap)


def _block_polish(lp: LinearizedPair, e0_seed: float, y1_seed: np.ndarray,
                  tol: float):
    """Inverse iteration on [[0,-L-],[L+,0]] - sigma to machine-level residual."""
    vs = lp.vs
    m = vs.m
    block = sp.bmat([[None, -lp.a_minus], [lp.a_plus, None]], format="csc")
    sigma = e0_seed
    lu = spla.splu(block - sigma * sp.identity(2 * m, format="csc"))
    w = np.concatenate([y1_seed, (lp.a_plus @ y1_seed) / e0_seed])
    w /= np.linalg.norm(w)
    e0 = e0_seed
    for _ in range(25):
        w = lu.solve(w)
        w /= np.linalg.norm(w)
        e0_new = float(w @ (block @ w))
        done = abs(e0_new - e0) <= 1e-13 * abs(e0_new)
        e0 = e0_new
        if done:
            break
    else:
        raise SpectralError("block polish did not converge")
    res = np.linalg.norm(block @ w - e0 * w)
    if res > 1e-7:
        raise AccuracyError(f"block eigen residual {res:.2e} too large")
    return e0, w[:m], w[m:]


def solve_eigenpair(lp: LinearizedPair, n_coarse: int = 512,
                    tol: float = 1e-12) -> SpectralData:
    """e0 and Y+ through the composition L- L+ y1 = -e0^2 y1.

    The composition route detects the unique negative direction and pins
    e0^2; a final inverse-iteration pass on the sparse block [[0,-L-],[L+,0]]
    polishes the pair, because applying the assembled product L- L+ amplifies
    roundoff by ~1/h^4 and cannot certify the 1e-8 residual contract.
    """
    gs = lp.gs
    vs = lp.vs

    ev = _coarse_composition_spectrum(gs, n_coarse)
    real = ev[np.abs(ev.imag) <= 1e-8 * np.abs(ev.real).max()].real
    lam_min = real.min()
    if lam_min >= 0:
        raise SpectralError("no negative eigenvalue of L-L+ on the radial "
                            "sector; discretization is broken")
    floor = 0.02 * abs(lam_min)
    negatives = real[real < -floor]
    if negatives.size != 1:
        raise NonsimpleSpectrumError(
            f"{negatives.size} eigenvalues below -{floor:.3g}; expected one")

    # shift-inverted iteration on the banded composition
    comp = (lp.a_minus @ lp.a_plus).tocsc()
    sigma = lam_min
    lu = spla.splu(comp - sigma * sp.identity(vs.m, format="csc"))
    rng = np.random.default_rng(1234)
    y = rng.standard_normal(vs.m)
    y /= np.linalg.norm(y)
    lam_old = np.inf
    lam = sigma
    for _ in range(60):
        y = lu.solve(y)
        y /= np.linalg.norm(y)
        z = lp.a_plus @ y
        lam = float(np.dot(z, comp @ y) / np.dot(z, y))  # two-sided quotient
        # the quotient floor is set by the ~1/h^4 roundoff of the assembled
        # composition; the block polish below restores machine accuracy
        if abs(lam - lam_old) <= 1e-8 * abs(lam):
            break
        lam_old = lam
    else:
        raise SpectralError("inverse iteration for e0 did not converge")

    if lam >= 0:
        raise SpectralError("composition eigenvalue turned nonnegative")

    e0, y1v, y2v = _block_polish(lp, float(np.sqrt(-lam)), y, tol)
    # sign convention: int grad Q . grad Y1 > 0
    y1f = vs.field_from_v(y1v.astype(complex))
    dq = radial_derivative(gs.q).values.real
    dy1 = radial_derivative(y1f).values.real
    overlap = float(gs.grid.integrate(dq * dy1).real)
    if overlap < 0:
        y1v, y2v, overlap = -y1v, -y2v, -overlap

    # scale so |B(Y+, Y-)| = 1 (the sign of B(Y+,Y-) is forced negative)
    b_raw = 0.5 * (vs.dot(lp.a_plus @ y1v, y1v) - vs.dot(lp.a_minus @ y2v, y2v))
    if b_raw >= 0:
        raise SpectralError("B(Y+,Y-) should be negative; eigenpair corrupt")
    s = 1.0 / np.sqrt(-b_raw)
    y1v *= s
    y2v *= s

    y1 = vs.field_from_v(y1v.astype(complex))
    y2 = vs.field_from_v(y2v.astype(complex))
    res_minus = (np.linalg.norm(lp.a_minus @ y2v + e0 * y1v)
                 / (np.linalg.norm(y1v) + np.linalg.norm(y2v)))
    if res_minus > 1e-8:
        raise AccuracyError(f"eigenpair residual {res_minus:.2e} above 1e-8")

    sd = SpectralData(e0=e0, y1=y1, y2=y2, b_norm=-1.0,
                      grad_overlap=overlap * s, residual_minus=float(res_minus))

    dq_arr = gs.delta_q()
    num = abs(float(gs.grid.integrate(dq_arr * y1.values.real).real))
    den = (np.sqrt(gs.grid.integrate(dq_arr**2).real)
           * np.sqrt(norms(y1)["l2sq"]))
    if num <= 1e-3 * den:
        raise AccuracyError("int Lap Q . Y1 is numerically zero; "
                            "nondegeneracy lost")
    return sd


# -- coercivity ---------------------------------------------------------------

@dataclass
class CoercivityReport:
    minimum: float
    block_minima: dict
    which: str


def _constrained_pencil_min(a: sp.spmatrix, gram: sp.csr_matrix,
                            constraints: Sequence[np.ndarray],
                            coarse_estimate: tuple) -> float:
    """Smallest eigenvalue of (a, gram) restricted to c . v = 0."""
    lam_c, gap_c = coarse_estimate
    m = a.shape[0]
    sigma = lam_c - max(0.25 * gap_c, 1e-4)
    if constraints:
        c = np.column_stack(constraints)
        k = c.shape[1]
        kkt = sp.bmat([[a - sigma * gram, sp.csc_matrix(c)],
                       [sp.csc_matrix(c.T), None]], format="csc")
        lu = spla.splu(kkt)

        def opinv(x):
            rhs = np.concatenate([x, np.zeros(k)])
            return lu.solve(rhs)[:m]
    else:
        lu = spla.splu((a - sigma * gram).tocsc())

        def opinv(x):
            return lu.solve(x)

    op = spla.LinearOperator((m, m), matvec=opinv)
    vals = spla.eigsh(a, k=2, M=gram, sigma=sigma, OPinv=op,
                      which="LM", return_eigenvectors=False, tol=1e-10)
    return float(np.min(vals))


def _coarse_block_min(gs: GroundState, potential_sel: str,
                      constraint_fields: Sequence[np.ndarray],
                      n_coarse: int = 512) -> tuple:
    cg = RadialGrid(n_coarse, gs.grid.r_max)
    q = _coarse_resample(gs.profile, gs.grid, cg)
    cvs = VSpace(cg)
    pot = 1.0 - (3.0 if potential_sel == "plus" else 1.0) * q**2
    # pencil matrix carries the quadrature factor so the quotient is Phi/H1
    a = (2.0 * np.pi * cvs.h) * cvs.schrodinger(pot).toarray()
    g = cvs.h1_gram().toarray()
    if constraint_fields:
        cols = [cvs.to_v(_coarse_resample(c, gs.grid, cg))
                for c in constraint_fields]
        z = scipy.linalg.null_space(np.column_stack(cols).T)
        a = z.T @ a @ z
        g = z.T @ g @ z
    vals = scipy.linalg.eigh(a, g, eigvals_only=True,
                             subset_by_index=[0, 1])
    return float(vals[0]), float(vals[1] - vals[0])


def coercivity_minimum(lp: LinearizedPair, sd: SpectralData | None,
                       which: str) -> CoercivityReport:
    """min Phi(h)/|h|_H1^2 over the radial sector of G_perp, G_perp_prime,
    or with all constraints dropped ('unconstrained')."""
    gs = lp.gs
    vs = lp.vs
    gram = vs.h1_gram()
    if which == "G_perp":
        blocks = {
            "plus": (lp.a_plus, [gs.delta_q()]),
            "minus": (lp.a_minus, [gs.profile]),
        }
    elif which == "G_perp_prime":
        if sd is None:
            raise ValueError("G_perp_prime needs SpectralData")
        blocks = {
            "plus": (lp.a_plus, [sd.y2.values.real]),
            "minus": (lp.a_minus, [gs.profile, sd.y1.values.real]),
        }
    elif which == "unconstrained":
        blocks = {"plus": (lp.a_plus, []), "minus": (lp.a_minus, [])}
    else:
        raise ValueError(f"unknown constraint set {which!r}")

    minima = {}
    for name, (a, fields) in blocks.items():
        coarse = _coarse_block_min(gs, name, fields)
        cons_v = [vs.to_v(f) for f in fields]
        # Phi(h) = (1/2) * 4*pi*h <A v, v>; gram already carries its weights
        form = ((2.0 * np.pi * vs.h) * a).tocsc()
        minima[name] = _constrained_pencil_min(form, gram, cons_v, coarse)
    return CoercivityReport(minimum=min(minima.values()),
                            block_minima=minima, which=which)


# -- mode projections ---------------------------------------------------------

@dataclass
class ModeProjection:
    alpha_plus: float
    alpha_minus: float
    beta0: float
    v_perp: RadialField


def project_modes(v: RadialField, sd: SpectralData, lp: LinearizedPair,
                  gs: GroundState) -> ModeProjection:
    """Decompose v = a+ Y+ + a- Y- + b0 Q0 + v_perp, Q0 = iQ/|Q|_2.

    a+ = B(v, Y-)/B(Y+,Y-) and a- = B(v, Y+)/B(Y+,Y-); the division keeps the
    expansion exact under the lab normalization B(Y+,Y-) = -1.
    """
    yp, ym = sd.y_plus(), sd.y_minus()
    alpha_plus = bilinear(v, ym, lp) / sd.b_norm
    alpha_minus = bilinear(v, yp, lp) / sd.b_norm
    vs = lp.vs
    qv = vs.to_v(gs.profile)
    qnorm = np.sqrt(vs.dot(qv, qv))
    q0 = RadialField(gs.grid, 1j * gs.profile / qnorm)
    beta0 = (vs.pair_fields(v, q0)
             - alpha_plus * vs.pair_fields(yp, q0)
             - alpha_minus * vs.pair_fields(ym, q0))
    v_perp = v - alpha_plus * yp - alpha_minus * ym - beta0 * q0
    return ModeProjection(alpha_plus, alpha_minus, beta0, v_perp)


@dataclass
class ModeOdeResiduals:
    times: np.ndarray
    alpha_plus: np.ndarray
    alpha_minus: np.ndarray
    res_plus: np.ndarray      # alpha+' + e0 alpha+
    res_minus: np.ndarray     # alpha-' - e0 alpha-
    dphi_dt: np.ndarray


def _time_derivative(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """4th-order first derivative on a uniform time grid (5-point stencil).

    The mode amplitudes evolve at rates up to e0 while the residuals decay
    at 2 e0, so a second-order stencil error (dt^2 e0^3 y) would swamp the
    signal; the 5-point stencil keeps the differentiation noise far below it.
    """
    n = y.size
    if n < 5 or np.ptp(np.diff(t)) > 1e-9 * abs(t[-1] - t[0]):
        return np.gradient(y, t)
    h = t[1] - t[0]
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    # one-sided 4th-order closures
    c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12.0 * h)
    d[0] = c0 @ y[:5]
    d[1] = c1 @ y[:5]
    d[-1] = -(c0 @ y[-5:][::-1])
    d[-2] = -(c1 @ y[-5:][::-1])
    return d


def mode_ode_residuals(samples: Sequence[tuple], sd: SpectralData,
                       lp: LinearizedPair, gs: GroundState) -> ModeOdeResiduals:
    """Residuals of the decoupled mode ODEs along a sampled trajectory.

    samples: iterable of (t, v) with v the profile-frame perturbation field.
    """
    if len(samples) < 3:
        raise InsufficientDataError("need at least 3 samples for derivatives")
    t = np.array([s[0] for s in samples])
    ap, am, ph = [], [], []
    for _, v in samples:
        pr = project_modes(v, sd, lp, gs)
        ap.append(pr.alpha_plus)
        am.append(pr.alpha_minus)
        ph.append(phi(v, lp))
    ap, am, ph = np.array(ap), np.array(am), np.array(ph)
    dap = _time_derivative(ap, t)
    dam = _time_derivative(am, t)
    dph = _time_derivative(ph, t)
    return ModeOdeResiduals(times=t, alpha_plus=ap, alpha_minus=am,
                            res_plus=dap + sd.e0 * ap,
                            res_minus=dam - sd.e0 * am,
                            dphi_dt=dph)


# -- Appendix-A positivity ------------------------------------------------------

@dataclass
class QuadraticCheckReport:
    n_samples: int
    min_normalized: float
    values: np.ndarray


def gagliardo_quadratic_check(lp: LinearizedPair, gs: GroundState,
                              fields: Sequence[RadialField]) -> QuadraticCheckReport:
    """Second-order positivity of the sharp-constant functional.

    For h with int grad Q . grad h1 = 0 the quadratic coefficient of the
    expansion of I(Q + a h) is proportional to Phi(h) - (int Q h1)^2/(2 int Q^2),
    which must be nonnegative.  Inputs are projected onto the constraint in
    the same discrete gradient metric the quadratic form uses, so the
    degenerate directions (tangents of the sharp-constant equality manifold)
    land at zero instead of picking up metric-mismatch noise.
    """
    vs = lp.vs
    qv = vs.to_v(gs.profile)
    stiff = vs.stiffness()
    kq = stiff @ qv
    qkq = float(np.dot(qv, kq))
    values = []
    for h in fields:
        h1v = vs.to_v(h.values.real)
        c = float(np.dot(kq, h1v)) / qkq
        h1v = h1v - c * qv
        h1 = vs.from_v(h1v)
        hc = RadialField(gs.grid, h1 + 1j * h.values.imag)
        qh1 = vs.dot(qv, h1v)
        q2 = vs.dot(qv, qv)
        val = phi(hc, lp) - qh1**2 / (2.0 * q2)
        values.append(val / max(norms(hc)["h1sq"], 1e-300))
    values = np.array(values)
    return QuadraticCheckReport(n_samples=len(values),
                                min_normalized=float(values.min()),
                                values=values)

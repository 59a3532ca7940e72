"""Modulation decomposition along near-threshold trajectories.

For u close to the orbit the lab fits the phase parameter theta(t) from the
orthogonality Im int Q e^{-i(theta+t)} u dx = 0 (the radial restriction kills
the translation parameters, so this single scalar condition is the whole
implicit-function system) and then splits

    e^{-i(theta+t)} u = (1 + alpha) Q + h,

with alpha chosen so that the gradient projection int grad h1 . grad Q
vanishes, which is the discrete form of the int (Lap Q) h1 = 0 orthogonality.
Near the orbit |alpha|, |int Q h1|, |h|_H1 and delta(u) are all comparable;
the reports below measure those brackets and the small-alpha law
|alpha|/delta -> 1/(2 |grad Q|_2^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, SolverError
from .grid import RadialField, norms, radial_derivative
from .ground_state import GroundState, delta as delta_fn
from .evolve import EvolutionTrace


@dataclass
class ModulationFrame:
    t: float
    theta: float
    alpha: float
    h: RadialField
    delta: float
    valid: bool

    def h_h1(self) -> float:
        return float(np.sqrt(norms(self.h)["h1sq"]))


def fit_frame(u: RadialField, t: float, gs: GroundState,
              delta0: float | None = None, max_iter: int = 50) -> ModulationFrame:
    """Fit (theta, alpha) at one snapshot.

    Newton in theta on Im int Q e^{-i(theta+t)} u = 0, seeded by the phase of
    int u Q; of the two roots per period the one with positive real
    projection (v close to +Q) is selected.
    """
    g = u.grid
    if delta0 is None:
        delta0 = 0.1 * gs.grad_sq
    z = g.integrate(u.values * gs.profile)  # int u Q dx (complex)
    if abs(z) == 0.0:
        raise SolverError("zero projection on Q; cannot fit a phase")
    phase = float(np.angle(z))  # root with Re e^{-i phase} z > 0
    theta = phase - t

    # one safeguarded Newton pass (the seed is already the exact root)
    for _ in range(max_iter):
        resid = float(np.imag(np.exp(-1j * (theta + t)) * z))
        slope = float(-np.real(np.exp(-1j * (theta + t)) * z))
        if abs(resid) <= 1e-14 * abs(z):
            break
        step = resid / slope if slope != 0 else 0.0
        theta += step
        if abs(step) < 1e-15:
            break
    else:
        raise SolverError("phase Newton did not converge")
    if float(np.real(np.exp(-1j * (theta + t)) * z)) <= 0:
        raise SolverError("both phase roots have nonpositive projection on Q")

    w = np.exp(-1j * (theta + t)) * u.values
    dw = radial_derivative(RadialField(g, w)).values
    dq = radial_derivative(gs.q).values.real
    alpha = float(np.real(g.integrate(dw * dq)) / gs.grad_sq) - 1.0
    h = RadialField(g, w - (1.0 + alpha) * gs.profile)
    dl = delta_fn(u, gs)
    return ModulationFrame(t=t, theta=_wrap(theta), alpha=alpha, h=h,
                           delta=dl, valid=bool(dl < delta0))


def _wrap(theta: float) -> float:
    return (theta + np.pi) % (2.0 * np.pi) - np.pi


def frame_series(trace: EvolutionTrace, gs: GroundState,
                 delta0: float | None = None) -> list:
    """Fit frames at every stored snapshot, unwrapping theta continuously."""
    items = sorted(trace.snapshots.items())
    frames = [fit_frame(u, t, gs, delta0) for t, u in items]
    for prev, cur in zip(frames, frames[1:]):
        k = round((prev.theta - cur.theta) / (2.0 * np.pi))
        cur.theta += 2.0 * np.pi * k
    return frames


@dataclass
class ComparabilityReport:
    n_valid: int
    alpha_over_delta: tuple
    h_over_delta: tuple
    qh1_over_delta: tuple
    ill_conditioned: bool


def comparability_report(frames: Sequence[ModulationFrame],
                         gs: GroundState | None = None,
                         floor: float = 1e-12) -> ComparabilityReport:
    """Brackets of |alpha|/delta, |h|_H1/delta, |int Q h1|/delta over frames."""
    valid = [f for f in frames if f.valid]
    if len(valid) < 5:
        raise InsufficientDataError("need at least 5 valid frames")
    if all(f.delta < floor for f in valid):
        return ComparabilityReport(len(valid), (np.nan, np.nan),
                                   (np.nan, np.nan), (np.nan, np.nan), True)
    r_a, r_h, r_q = [], [], []
    for f in valid:
        if f.delta < floor:
            continue
        r_a.append(abs(f.alpha) / f.delta)
        r_h.append(f.h_h1() / f.delta)
        qh1 = f.h.grid.integrate(f.h.values.real
                                 * (gs.profile if gs is not None else 1.0))
        r_q.append(abs(float(np.real(qh1))) / f.delta)
    return ComparabilityReport(
        n_valid=len(valid),
        alpha_over_delta=(float(min(r_a)), float(max(r_a))),
        h_over_delta=(float(min(r_h)), float(max(r_h))),
        qh1_over_delta=(float(min(r_q)), float(max(r_q))),
        ill_conditioned=False,
    )


def theta_derivative_ratio(frames: Sequence[ModulationFrame]) -> np.ndarray:
    """|theta'(t)| / delta(t) by central differences over valid frames."""
    valid = [f for f in frames if f.valid]
    if len(valid) < 3:
        raise InsufficientDataError("need at least 3 valid frames")
    t = np.array([f.t for f in valid])
    th = np.array([f.theta for f in valid])
    dl = np.array([f.delta for f in valid])
    dth = np.gradient(th, t)
    return np.abs(dth) / np.maximum(dl, 1e-300)

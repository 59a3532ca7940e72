"""Desk-scale classification harness for threshold dynamics.

Data at the mass-energy threshold M[u]E[u] = M[Q]E[Q] fall on one of three
sides by the gradient comparison, and the trichotomy is probed by running
both time directions and applying evidence rules:

    converges_to_Q_orbit : distance to the orbit decays at rate <= -0.8 e0
                           with r^2 > 0.99 over the clean window,
    scatter_proxy        : potential energy collapses >= 100x with bounded
                           H1 norm and delta bounded away from zero,
    blowup               : the integrator's detection record,
    undetermined         : anything that fails the evidence thresholds.

"Scattering" is certified only by the potential-energy proxy; true
scattering is an infinite-time statement and is out of reach of any finite
run.  Near the stable manifold the forward/backward split is exponentially
sensitive, so `undetermined` is a first-class outcome.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import NLSLabError, SolverError, InsufficientDataError
from .grid import RadialField, RadialGrid, h1_norm, norms
from .ground_state import GroundState, energy, mass, resample
from .linearized import LinearizedPair, SpectralData
from .profiles import build_profiles, approximate_initial_data
from .evolve import (EvolveOpts, EvolutionTrace, integrate, distance_to_orbit,
                     exp_rate_fit)
from .sampling import random_radial_field

DEFAULT_EPS = 1e-2          # |A| e^{-e0 t0} at the start of profile runs
SNAPSHOT_SPACING = 0.02


# -- data preparation -----------------------------------------------------------

@dataclass
class ProfileData:
    A: float
    k: int = 3
    t0: Optional[float] = None      # default: log(|A|/eps)/e0
    eps: float = DEFAULT_EPS
    restore: bool = True            # pull (M, E) back onto the threshold


@dataclass
class ScaledOrbit:
    theta: float = 0.0


@dataclass
class Perturbed:
    seed: int
    amplitude: float = 0.05


def prepare_threshold_data(kind, gs: GroundState, sd: SpectralData,
                           lp: LinearizedPair) -> tuple:
    """Build initial data at the threshold; returns (field, meta).

    Profile runs use the shifted clock: the run starts at lab time 0 with
    data Q + V_k(t0), so the lab phase at the start is exactly 1.
    """
    if isinstance(kind, ProfileData):
        t0 = kind.t0
        if t0 is None:
            t0 = float(np.log(abs(kind.A) / kind.eps) / sd.e0)
        pe = build_profiles(kind.A, kind.k, sd, lp, gs)
        u0 = approximate_initial_data(pe, t0, gs)
        if kind.restore:
            # profile truncation leaves O(eps^2) in (M, E); pull it back
            u0 = restore_mass_energy(u0, gs)
        eps_eff = abs(kind.A) * np.exp(-sd.e0 * t0)
        return u0, {"kind": "profile", "A": kind.A, "k": kind.k,
                    "t0": t0, "eps": eps_eff}
    if isinstance(kind, ScaledOrbit):
        u0 = RadialField(gs.grid, np.exp(1j * kind.theta) * gs.profile)
        return u0, {"kind": "scaled_orbit", "theta": kind.theta}
    if isinstance(kind, Perturbed):
        rng = np.random.default_rng(kind.seed)
        bump = random_radial_field(gs.grid, rng, n_bumps=3)
        scale = kind.amplitude * np.sqrt(gs.mass) / max(h1_norm(bump), 1e-30)
        u = RadialField(gs.grid, gs.profile + scale * bump.values)
        u0 = restore_mass_energy(u, gs)
        return u0, {"kind": "perturbed", "seed": kind.seed,
                    "amplitude": kind.amplitude}
    raise ValueError(f"unknown data kind {kind!r}")


def restore_mass_energy(u: RadialField, gs: GroundState,
                        tol: float = 1e-9, max_iter: int = 30) -> RadialField:
    """Two-parameter Newton on (amplitude a, scaling nu) restoring (M, E).

    The candidate a * nu * u(nu x) has closed-form Jacobian through the
    scaling laws M -> a^2 M / nu, |grad|^2 -> a^2 nu |grad|^2,
    |u|_4^4 -> a^4 nu |u|_4^4; measured values of the resampled field are
    used for the residual so interpolation error cannot bias the result.
    """
    a, nu = 1.0, 1.0
    for _ in range(max_iter):
        cand = RadialField(u.grid, a * resample(u, nu).values)
        m = mass(cand)
        e = energy(cand)
        f = np.array([m - gs.mass, e - gs.energy])
        if abs(f[0]) < tol * gs.mass and abs(f[1]) < tol * abs(gs.energy):
            return cand
        nm = norms(cand)
        g2, p4 = nm["grad_l2sq"], nm["l4_4"]
        jac = np.array([
            [2.0 * m / a, -m / nu],
            [(g2 - p4) / a, (0.5 * g2 - 0.25 * p4) / nu],
        ])
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular Jacobian in (M,E) restoration") from exc
        a -= step[0]
        nu -= step[1]
        if nu <= 0 or a <= 0:
            raise SolverError("(M,E) restoration left the valid parameter range")
    raise SolverError("Newton for (M,E) restoration did not converge")


# -- verdicts ---------------------------------------------------------------------

@dataclass
class DirectionReport:
    outcome: str
    rates: dict = field(default_factory=dict)
    blowup_at: Optional[float] = None
    pot_drop: Optional[float] = None
    final_distance: Optional[float] = None


@dataclass
class Verdict:
    side: str                       # 'subcritical' | 'critical' | 'supercritical'
    forward: str
    backward: str
    rates: dict
    evidence: dict

    def as_dict(self) -> dict:
        return {"side": self.side, "forward": self.forward,
                "backward": self.backward, "rates": self.rates,
                "evidence": self.evidence}


@dataclass
class ClassifyOpts:
    dt: float = 1e-4
    horizon_fwd: Optional[float] = None     # default 8/e0
    horizon_bwd: Optional[float] = None     # default 6/e0 (+ dispersive tail)
    dispersive_tail: float = 5.0
    critical_floor: float = 1e-7            # relative gradient-norm floor
    rate_tolerance: float = 0.8             # accept rate <= -rate_tolerance*e0
    pot_drop_required: float = 100.0
    record_stride: int = 50


def _distance_series(trace: EvolutionTrace, gs: GroundState):
    ts, ds = [], []
    for t, u in sorted(trace.snapshots.items()):
        ts.append(t)
        ds.append(distance_to_orbit(u, t, gs)["dist_h1"])
    return np.array(ts), np.array(ds)


def _fit_convergence(ts, ds, e0, chronological: bool):
    """Rate fit over the clean decaying window (until 4x the floor)."""
    if not chronological:               # backward: convergence as t decreases
        ts, ds = -ts[::-1], ds[::-1]
    floor = ds.min()
    idx = np.where(ds < 4.0 * floor)[0]
    stop = idx[0] if idx.size else len(ds)
    stop = max(stop, min(9, len(ds)))
    if stop < 8:
        return None
    try:
        return exp_rate_fit(ts[:stop], ds[:stop])
    except (ValueError, InsufficientDataError):
        return None


def _judge_direction(trace: EvolutionTrace, gs: GroundState, e0: float,
                     opts: ClassifyOpts, chronological: bool) -> DirectionReport:
    if trace.blowup is not None:
        return DirectionReport("blowup", blowup_at=trace.blowup.detected_at)
    ts, ds = _distance_series(trace, gs)
    rep = DirectionReport("undetermined", final_distance=float(ds[-1] if chronological else ds[0]))
    fit = _fit_convergence(ts, ds, e0, chronological)
    if fit is not None and fit["rate"] <= -opts.rate_tolerance * e0 \
            and fit["r_squared"] > 0.99:
        rep.outcome = "converges_to_Q_orbit"
        rep.rates = fit
        return rep
    # scattering proxy
    pot = trace.pot_series
    h1 = trace.mass_series + trace.grad_series
    pot_start = pot[-1] if not chronological else pot[0]
    tail = pot[:max(2, len(pot) // 10)] if not chronological \
        else pot[-max(2, len(pot) // 10):]
    drop = pot_start / max(tail.max(), 1e-300)
    rep.pot_drop = float(drop)
    delta_tail = (trace.delta_series[:len(pot) // 2] if not chronological
                  else trace.delta_series[len(pot) // 2:])
    if drop >= opts.pot_drop_required \
            and h1.max() <= 2.0 * (h1[0] if chronological else h1[-1]) \
            and delta_tail.min() >= 0.05 * gs.grad_sq:
        rep.outcome = "scatter_proxy"
    return rep


def classify_trajectory(u0: RadialField, gs: GroundState, sd: SpectralData,
                        opts: ClassifyOpts | None = None,
                        meta: dict | None = None) -> Verdict:
    """Run both directions and apply the verdict rules."""
    opts = opts or ClassifyOpts()
    e0 = sd.e0
    prod_u = np.sqrt(norms(u0)["grad_l2sq"] * norms(u0)["l2sq"])
    prod_q = np.sqrt(gs.grad_sq * gs.mass)
    me_u = mass(u0) * energy(u0)
    me_q = gs.mass * gs.energy
    if abs(me_u - me_q) > 1e-6 * abs(me_q):
        raise NLSLabError(f"data off the mass-energy threshold: "
                          f"{me_u} vs {me_q}")

    grad_gap = np.sqrt(norms(u0)["grad_l2sq"]) - np.sqrt(gs.grad_sq)
    if abs(grad_gap) < opts.critical_floor * np.sqrt(gs.grad_sq):
        side = "critical"
    elif prod_u > prod_q:
        side = "supercritical"
    else:
        side = "subcritical"

    hf = opts.horizon_fwd if opts.horizon_fwd is not None else 8.0 / e0
    hb = opts.horizon_bwd if opts.horizon_bwd is not None else \
        6.0 / e0 + opts.dispersive_tail
    if side == "critical":
        # the orbit is exponentially unstable, so scheme noise seeds the
        # unstable mode; keep critical probes inside the quiet e-folding budget
        hf = hb = min(hf, 3.0 / e0)

    snaps_f = tuple(np.round(np.arange(0.0, hf + 1e-12, SNAPSHOT_SPACING), 10))
    snaps_b = tuple(np.round(np.arange(-hb, 1e-12, SNAPSHOT_SPACING), 10))
    ev = EvolveOpts(dt=opts.dt, record_stride=opts.record_stride,
                    snapshot_times=snaps_f)
    tr_f = integrate(u0, 0.0, hf, opts.dt, gs, ev)
    ev_b = EvolveOpts(dt=opts.dt, record_stride=opts.record_stride,
                      snapshot_times=snaps_b)
    tr_b = integrate(u0, 0.0, -hb, opts.dt, gs, ev_b)

    rf = _judge_direction(tr_f, gs, e0, opts, chronological=True)
    rb = _judge_direction(tr_b, gs, e0, opts, chronological=False)

    if side == "critical":
        if rf.outcome == "undetermined" and (rf.final_distance or 1) < 1e-3:
            rf.outcome = "converges_to_Q_orbit"
        if rb.outcome == "undetermined" and (rb.final_distance or 1) < 1e-3:
            rb.outcome = "converges_to_Q_orbit"

    rates = {"forward": rf.rates, "backward": rb.rates}
    evidence = {
        "meta": meta or {},
        "forward": asdict(rf),
        "backward": asdict(rb),
        "traces": {"forward": _trace_summary(tr_f), "backward": _trace_summary(tr_b)},
    }
    return Verdict(side=side, forward=rf.outcome, backward=rb.outcome,
                   rates=rates, evidence=evidence)


def _trace_summary(tr: EvolutionTrace) -> dict:
    return {
        "t0": tr.t0, "t1": tr.t1,
        "mass_drift": tr.mass_drift_rate(),
        "energy_drift": tr.energy_drift_rate(),
        "blowup": None if tr.blowup is None else asdict(tr.blowup),
    }


# -- uniqueness probe ---------------------------------------------------------------

@dataclass
class UniquenessReport:
    shift: float
    sup_mismatch: float
    n_compared: int
    mismatch_flagged: bool
    series: list


def uniqueness_probe(trace_a: EvolutionTrace, trace_b: EvolutionTrace,
                     gs: GroundState, e0: float) -> UniquenessReport:
    """Compare run A against the time/phase-shifted run B.

    Both traces must come from profile data with the same sign of A; if A
    starts at perturbation eps_a and B at eps_b, then
    u_a(t) = e^{-i dt} u_b(t + dt) with dt = log(eps_b/eps_a)/e0.
    """
    ma, mb = trace_a.meta, trace_b.meta
    try:
        eps_a, eps_b = ma["eps"], mb["eps"]
        sign_match = np.sign(ma["A"]) == np.sign(mb["A"])
    except KeyError as exc:
        raise NLSLabError("uniqueness probe needs profile-run metadata") from exc
    shift = float(np.log(eps_b / eps_a) / e0)
    pairs = []
    for t, ua in sorted(trace_a.snapshots.items()):
        tb = t + shift
        match = [s for s in trace_b.snapshots if abs(s - tb) < 1e-9]
        if match:
            pairs.append((t, ua, trace_b.snapshots[match[0]]))
    if len(pairs) < 3:
        raise InsufficientDataError("fewer than 3 overlapping snapshot times")
    series = []
    for t, ua, ub in pairs:
        diff = RadialField(gs.grid,
                           ua.values - np.exp(-1j * shift) * ub.values)
        series.append((t, h1_norm(diff)))
    sup = max(d for _, d in series)
    flagged = (not sign_match) or sup > 0.1 * np.sqrt(gs.mass + gs.grad_sq)
    return UniquenessReport(shift=shift, sup_mismatch=float(sup),
                            n_compared=len(series),
                            mismatch_flagged=bool(flagged), series=series)


# -- sweep --------------------------------------------------------------------------

@dataclass
class SweepCell:
    label: str
    kind: object
    dt: float


def default_sweep_cells(dts=(1e-4,)) -> list:
    cells = []
    for dt in dts:
        for a in (+1.0, -1.0):
            cells.append(SweepCell(label=f"profile_A{a:+.0f}_dt{dt:g}",
                                   kind=ProfileData(A=a), dt=dt))
    return cells


def sweep(cells, gs: GroundState, sd: SpectralData, lp: LinearizedPair,
          out_dir: str | None = None, max_workers: int = 2,
          opts: ClassifyOpts | None = None) -> dict:
    """Classify every cell; failures are recorded, the sweep continues."""
    base_opts = opts or ClassifyOpts()
    results = {}

    def run_cell(cell: SweepCell):
        u0, meta = prepare_threshold_data(cell.kind, gs, sd, lp)
        cell_opts = ClassifyOpts(**{**asdict(base_opts), "dt": cell.dt})
        verdict = classify_trajectory(u0, gs, sd, cell_opts, meta=meta)
        return verdict

    if not cells:
        report = {"cells": {}, "n_failed": 0}
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {pool.submit(run_cell, c): c for c in cells}
            for fut, cell in futures.items():
                try:
                    results[cell.label] = {"ok": True,
                                           "verdict": fut.result().as_dict()}
                except Exception as exc:   # recorded, sweep continues
                    results[cell.label] = {"ok": False, "error": repr(exc)}
        report = {"cells": results,
                  "n_failed": sum(1 for r in results.values() if not r["ok"])}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=float)
    return report

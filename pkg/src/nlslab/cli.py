"""Command-line entry point.

Subcommands: ground-state, spectrum, coercivity, profiles, evolve, modulate,
virial, classify, selftest.  JSON goes to stdout (deterministic 17-digit
floats, config hash and code version attached); series and fields go to CSV
files under --out.  Exit codes: 0 success, 1 computation error, 2 usage.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import LabConfig, load_golden_constants
from .errors import NLSLabError, UsageError
from .grid import RadialGrid, RadialField, norms
from .ground_state import solve_ground_state
from .linearized import assemble, solve_eigenpair, coercivity_minimum
from .profiles import (build_profiles, residual_decay_slope,
                       mass_energy_deviation)
from .evolve import EvolveOpts, integrate
from .modulation import frame_series
from .virial import (make_cutoff, localized_variance, localized_rate,
                     localized_remainder, variance, variance_rate,
                     virial_identity_check, cutoff_values)
from .classify import (ProfileData, ScaledOrbit, Perturbed, ClassifyOpts,
                       SweepCell, prepare_threshold_data, sweep)
from . import io as labio


class LabSession:
    """Lazily built (grid, ground state, operators, spectrum) stack."""

    def __init__(self, config: LabConfig):
        self.config = config
        self._grid = self._gs = self._lp = self._sd = None

    @property
    def grid(self):
        if self._grid is None:
            self._grid = RadialGrid(self.config.grid.n_points,
                                    self.config.grid.r_max)
        return self._grid

    @property
    def gs(self):
        if self._gs is None:
            self._gs = solve_ground_state(self.grid,
                                          tol=self.config.tolerances.shoot_tol)
        return self._gs

    @property
    def lp(self):
        if self._lp is None:
            self._lp = assemble(self.gs)
        return self._lp

    @property
    def sd(self):
        if self._sd is None:
            self._sd = solve_eigenpair(self.lp,
                                       tol=self.config.tolerances.eig_tol)
        return self._sd

    def stamp(self, record: dict) -> dict:
        record["config_hash"] = self.config.hash()
        record["code_version"] = __version__
        return record


def _emit(record: dict, out: str | None):
    text = labio.dumps_canonical(record)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_ground_state(session: LabSession, args) -> int:
    gs = session.gs
    rec = session.stamp({
        "q0": gs.q0, "mass": gs.mass, "grad_sq": gs.grad_sq,
        "l4_4": gs.l4_4, "energy": gs.energy, "c_gn": gs.c_gn,
        "residual": gs.residual,
    })
    _emit(rec, args.out_json)
    if args.csv:
        labio.write_series_csv(args.csv, {"r": gs.grid.nodes,
                                          "Q": gs.profile})
    return 0


def cmd_spectrum(session: LabSession, args) -> int:
    sd = session.sd
    cg = coercivity_minimum(session.lp, sd, "G_perp")
    cgp = coercivity_minimum(session.lp, sd, "G_perp_prime")
    rec = session.stamp({
        "e0": sd.e0,
        "b_norm": sd.b_norm,
        "residuals": {"minus": sd.residual_minus, "plus": 0.0},
        "grad_overlap": sd.grad_overlap,
        "coercivity": {"g_perp": cg.minimum, "g_perp_prime": cgp.minimum},
    })
    _emit(rec, args.out_json)
    if args.csv:
        labio.write_series_csv(args.csv, {
            "r": session.grid.nodes,
            "Y1": sd.y1.values.real,
            "Y2": sd.y2.values.real,
        })
    return 0


def cmd_coercivity(session: LabSession, args) -> int:
    reports = {w: coercivity_minimum(session.lp, session.sd, w)
               for w in ("G_perp", "G_perp_prime", "unconstrained")}
    rec = session.stamp({w: {"minimum": r.minimum, "blocks": r.block_minima}
                         for w, r in reports.items()})
    _emit(rec, args.out_json)
    return 0


def cmd_profiles(session: LabSession, args) -> int:
    sd, lp, gs = session.sd, session.lp, session.gs
    pe = build_profiles(args.A, args.k, sd, lp, gs)
    t0 = args.t0 if args.t0 is not None else \
        float(np.log(max(abs(args.A), 1e-300) / 1e-2) / sd.e0)
    t_lo, t_hi = np.log(1e2) / sd.e0, np.log(1e3) / sd.e0
    slope, r2 = residual_decay_slope(pe, gs, lp, t_lo, t_hi)
    rec = session.stamp({
        "A": args.A, "k": args.k, "t0": t0,
        "residual_slope": slope, "slope_r_squared": r2,
        "expected_slope": -(args.k + 1) * sd.e0,
        "mass_energy_deviation": mass_energy_deviation(pe, gs, t0),
    })
    _emit(rec, args.out_json)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for j, z in enumerate(pe.z, start=1):
            labio.write_series_csv(
                os.path.join(args.out, f"z{j}.csv"),
                {"r": gs.grid.nodes, "re": z.values.real, "im": z.values.imag})
    return 0


def _initial_data(session: LabSession, spec: str):
    gs = session.gs
    if spec == "ground":
        return gs.q.copy(), {"kind": "ground"}
    if spec.startswith("profile:"):
        parts = spec.split(":", 1)[1].split(",")
        a = float(parts[0])
        k = int(parts[1]) if len(parts) > 1 else 3
        t0 = float(parts[2]) if len(parts) > 2 else None
        return prepare_threshold_data(ProfileData(A=a, k=k, t0=t0),
                                      gs, session.sd, session.lp)
    if spec.startswith("file:"):
        return labio.read_field_csv(spec.split(":", 1)[1]), {"kind": "file"}
    raise UsageError(f"unknown --init spec {spec!r}")


def cmd_evolve(session: LabSession, args) -> int:
    u0, meta = _initial_data(session, args.init)
    t0, t1 = (float(x) for x in args.t_span.split(","))
    dt = args.dt or session.config.evolution.dt
    stride = session.config.evolution.record_stride
    if args.snapshot_every:
        lo, hi = min(t0, t1), max(t0, t1)
        snaps = tuple(np.round(np.arange(lo, hi + 1e-12,
                                         args.snapshot_every), 10))
    else:
        snaps = ()
    opts = EvolveOpts(dt=dt, record_stride=stride,
                      blowup_factor=session.config.evolution.blowup_factor,
                      cfl_safety=session.config.evolution.cfl_safety,
                      snapshot_times=snaps)
    trace = integrate(u0, t0, t1, dt, session.gs, opts)
    trace.meta.update(meta)
    out = args.out or os.path.join(session.config.paths.output_dir, "evolve")
    labio.write_trace(trace, out)
    _emit(session.stamp({
        "out": out,
        "mass_drift_rate": trace.mass_drift_rate(),
        "energy_drift_rate": trace.energy_drift_rate(),
        "blowup": None if trace.blowup is None else trace.blowup.reason,
    }), None)
    return 0


def cmd_modulate(session: LabSession, args) -> int:
    trace = labio.read_trace(args.trace)
    frames = frame_series(trace, session.gs)
    out = args.out or os.path.join(args.trace, "modulation.csv")
    labio.write_series_csv(out, {
        "t": [f.t for f in frames],
        "theta": [f.theta for f in frames],
        "alpha": [f.alpha for f in frames],
        "h_h1": [f.h_h1() for f in frames],
        "delta": [f.delta for f in frames],
        "valid": [int(f.valid) for f in frames],
    })
    _emit(session.stamp({"out": out, "n_frames": len(frames)}), None)
    return 0


def cmd_virial(session: LabSession, args) -> int:
    trace = labio.read_trace(args.trace)
    gs = session.gs
    items = sorted(trace.snapshots.items())
    if len(items) < 5:
        raise NLSLabError("trace has fewer than 5 snapshots; rerun evolve "
                          "with --snapshot-every")
    ts = np.array([t for t, _ in items])
    ys = np.array([variance(u) for _, u in items])
    rates = np.array([variance_rate(u) for _, u in items])
    deltas = np.array([abs(gs.grad_sq - norms(u)["grad_l2sq"])
                       for _, u in items])
    rep = virial_identity_check(ts, rates, deltas)
    cols = {"t": rep.times, "y": ys[2:-2], "y_rate": rates[2:-2],
            "y_rate_fd_accel": rep.fd_accel, "minus4delta": rep.minus_4delta}
    if args.R:
        cut = make_cutoff(gs.grid, args.R)
        cols["y_R"] = [localized_variance(u, cut) for _, u in items][2:-2]
        cols["A_R"] = [localized_remainder(u, cut, gs) for _, u in items][2:-2]
        cols["y_R_rate"] = [localized_rate(u, cut) for _, u in items][2:-2]
    out = args.out or os.path.join(args.trace, "virial.csv")
    labio.write_series_csv(out, cols)
    _emit(session.stamp({"out": out,
                         "max_rel_mismatch": rep.max_rel_mismatch}), None)
    return 0


def cmd_classify(session: LabSession, args) -> int:
    import json as _json
    with open(args.sweep_config) as fh:
        cfg = _json.load(fh)
    cells = []
    for cell in cfg.get("cells", []):
        kind_name = cell.get("kind", "profile")
        if kind_name == "profile":
            kind = ProfileData(A=float(cell["A"]), k=int(cell.get("k", 3)))
        elif kind_name == "scaled_orbit":
            kind = ScaledOrbit(theta=float(cell.get("theta", 0.0)))
        elif kind_name == "perturbed":
            kind = Perturbed(seed=int(cell.get("seed", 0)),
                             amplitude=float(cell.get("amplitude", 0.05)))
        else:
            raise UsageError(f"unknown cell kind {kind_name!r}")
        for dt in cfg.get("dt", [session.config.evolution.dt]):
            cells.append(SweepCell(
                label=f"{kind_name}_{cell.get('label', len(cells))}_dt{dt:g}",
                kind=kind, dt=float(dt)))
    opts = ClassifyOpts()
    if "horizon_fwd" in cfg:
        opts.horizon_fwd = float(cfg["horizon_fwd"])
    if "horizon_bwd" in cfg:
        opts.horizon_bwd = float(cfg["horizon_bwd"])
    out = args.out or os.path.join(session.config.paths.output_dir, "sweep")
    report = sweep(cells, session.gs, session.sd, session.lp,
                   out_dir=out, opts=opts,
                   max_workers=int(cfg.get("max_workers", 2)))
    _emit(session.stamp({"out": out, "n_cells": len(cells),
                         "n_failed": report["n_failed"]}), None)
    return 0 if report["n_failed"] == 0 else 1


def cmd_selftest(session: LabSession, args) -> int:
    checks = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    g = session.grid
    vol = g.integrate(np.ones(g.n_points)).real
    ball = 4.0 / 3.0 * np.pi * g.r_max**3
    check("quadrature_ball_volume", abs(vol - ball) / ball < 1e-10,
          f"rel err {abs(vol-ball)/ball:.2e}")
    gauss = g.integrate(np.exp(-g.nodes**2)).real
    check("quadrature_gaussian", abs(gauss - np.pi**1.5) / np.pi**1.5 < 1e-8)

    gs = session.gs
    check("pohozhaev_l4", abs(gs.l4_4 / gs.mass - 4.0) < 1e-6,
          f"{gs.l4_4 / gs.mass - 4.0:+.2e}")
    check("pohozhaev_grad", abs(gs.grad_sq / gs.mass - 3.0) < 1e-6,
          f"{gs.grad_sq / gs.mass - 3.0:+.2e}")
    check("energy_ratio", abs(gs.energy / gs.mass - 0.5) < 1e-6)

    golden = load_golden_constants(session.config.paths.golden_constants)
    check("golden_q0", abs(gs.q0 - golden["q0"]["value"]) < 1e-6)
    check("golden_mass",
          abs(gs.mass - golden["m_Q"]["value"]) / golden["m_Q"]["value"] < 1e-4)

    sd = session.sd
    check("eigen_residual", sd.residual_minus < 1e-8,
          f"{sd.residual_minus:.2e}")
    check("golden_e0",
          abs(sd.e0 - golden["e0"]["value"]) / golden["e0"]["value"] < 1e-4,
          f"e0={sd.e0:.9f}")
    from .linearized import bilinear, phi
    yp, ym = sd.y_plus(), sd.y_minus()
    check("b_normalization", abs(bilinear(yp, ym, session.lp) + 1.0) < 1e-9)
    check("phi_Y_plus", abs(phi(yp, session.lp)) < 1e-8 * norms(yp)["h1sq"])
    check("phi_Q", abs(phi(gs.q, session.lp) + 4.0 * gs.mass) / (4 * gs.mass) < 1e-6)

    cg = coercivity_minimum(session.lp, sd, "G_perp")
    cgp = coercivity_minimum(session.lp, sd, "G_perp_prime")
    cu = coercivity_minimum(session.lp, sd, "unconstrained")
    check("coercivity_G_perp", cg.minimum > 0, f"{cg.minimum:.4f}")
    check("coercivity_G_perp_prime", cgp.minimum > 0, f"{cgp.minimum:.4f}")
    check("unconstrained_negative", cu.minimum < 0, f"{cu.minimum:.4f}")

    s = np.linspace(0.0, 3.1, 20001)
    phi_c, _, d2, _, _ = cutoff_values(s)
    check("cutoff_constraints",
          phi_c.min() >= -1e-12 and d2.max() <= 2.0 + 1e-9)

    width = max(len(n) for n, _, _ in checks)
    n_fail = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        n_fail += not ok
        print(f"{name:<{width}}  {status}  {detail}")
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return 0 if n_fail == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlslab", description=__doc__)
    p.add_argument("--config", help="path to a JSON lab config "
                                    "(or set NLS_LAB_CONFIG)")
    sub = p.add_subparsers(dest="command")

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.set_defaults(fn=fn)
        sp.add_argument("--out-json", help="also write the JSON record here")
        return sp

    sp = add("ground-state", cmd_ground_state)
    sp.add_argument("--json", action="store_true", help="(default) JSON out")
    sp.add_argument("--csv", help="write (r, Q) samples to this CSV")

    sp = add("spectrum", cmd_spectrum)
    sp.add_argument("--csv", help="write (r, Y1, Y2) samples to this CSV")

    add("coercivity", cmd_coercivity)

    sp = add("profiles", cmd_profiles)
    sp.add_argument("--A", type=float, required=True)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--t0", type=float)
    sp.add_argument("--out", help="directory for Z_j CSVs")

    sp = add("evolve", cmd_evolve)
    sp.add_argument("--init", required=True,
                    help="ground | profile:A[,k[,t0]] | file:PATH")
    sp.add_argument("--t-span", required=True, help="a,b")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--snapshot-every", type=float)
    sp.add_argument("--out", help="trace output directory")

    sp = add("modulate", cmd_modulate)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--out")

    sp = add("virial", cmd_virial)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--R", type=float)
    sp.add_argument("--out")

    sp = add("classify", cmd_classify)
    sp.add_argument("--sweep-config", required=True,
                    help="JSON sweep description")
    sp.add_argument("--out", help="run directory")

    add("selftest", cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage()
        return 2
    try:
        config = LabConfig.from_environment(args.config)
        session = LabSession(config)
        return args.fn(session, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except NLSLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

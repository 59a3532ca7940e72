"""Acceptance criteria.

Each test exercises one numbered criterion at its stated tolerance and
prints a PASS line with the measured values (run pytest -s to see them).
All heavy objects come from the session fixtures in conftest.py; the
reference resolution is n = 4096, r_max = 30 with reference dt = 1e-4.
"""

import time

import numpy as np
import pytest

from nlslab.grid import RadialGrid, RadialField, norms
from nlslab.ground_state import solve_ground_state
from nlslab.linearized import (bilinear, coercivity_minimum,
                               mode_ode_residuals, phi)
from nlslab.profiles import build_profiles, residual_decay_slope
from nlslab.evolve import exp_rate_fit, gradient_separation_monitor
from nlslab.modulation import fit_frame, frame_series, theta_derivative_ratio
from nlslab.virial import (cauchy_schwarz_check, localized_rate,
                           localized_remainder, make_cutoff,
                           quadratic_phase_family, variance_rate,
                           virial_identity_check, _five_point_derivative)

from conftest import distance_series


def _report(criterion, detail):
    print(f"[criterion {criterion:>2}] PASS: {detail}")


def test_criterion_01_pohozhaev(golden):
    t0 = time.time()
    grid = RadialGrid(4096, 30.0)
    gs = solve_ground_state(grid, tol=1e-12)
    elapsed = time.time() - t0
    r_l4 = gs.l4_4 / gs.mass - 4.0
    r_grad = gs.grad_sq / gs.mass - 3.0
    assert abs(r_l4) < 1e-6
    assert abs(r_grad) < 1e-6
    assert elapsed < 10.0
    _report(1, f"|L4 ratio - 4| = {abs(r_l4):.2e}, "
               f"|grad ratio - 3| = {abs(r_grad):.2e}, {elapsed:.2f}s")


def test_criterion_02_linearized_energy_of_q(fine):
    val = phi(fine.gs.q, fine.lp)
    rel = abs(val + 4.0 * fine.gs.mass) / (4.0 * fine.gs.mass)
    assert rel < 1e-6
    _report(2, f"|Phi(Q) + 4 int Q^2| rel = {rel:.2e}")


def test_criterion_03_operator_identities(fine):
    gs, lp, grid = fine.gs, fine.lp, fine.grid
    bound = 10.0 * grid.spacing**2 * np.sqrt(gs.mass)
    n1 = np.sqrt(norms(lp.apply_minus(gs.q))["l2sq"])
    r2 = lp.apply_plus(gs.q).values.real + 2.0 * gs.profile**3
    n2 = np.sqrt(grid.integrate(r2**2).real)
    qt = grid.field(gs.q_tilde())
    r3 = lp.apply_plus(qt).values.real + 2.0 * gs.profile
    n3 = np.sqrt(grid.integrate(r3**2).real)
    assert max(n1, n2, n3) < bound
    _report(3, f"|L-Q| = {n1:.2e}, |L+Q + 2Q^3| = {n2:.2e}, "
               f"|L+Qt + 2Q| = {n3:.2e} < {bound:.2e}")


def test_criterion_04_eigenpair(fine, mid, golden):
    sd, lp = fine.sd, fine.lp
    vs = lp.vs
    y1v = vs.to_v(sd.y1.values.real)
    y2v = vs.to_v(sd.y2.values.real)
    scale = np.linalg.norm(y1v) + np.linalg.norm(y2v)
    res_p = np.linalg.norm(lp.a_plus @ y1v - sd.e0 * y2v) / scale
    res_m = np.linalg.norm(lp.a_minus @ y2v + sd.e0 * y1v) / scale
    assert res_p < 1e-8 and res_m < 1e-8
    e0_gold = golden["e0"]["value"]
    rel_gold = abs(sd.e0 - e0_gold) / e0_gold
    rel_refine = abs(mid.sd.e0 - sd.e0) / sd.e0
    assert rel_gold < 1e-4
    assert rel_refine < 1e-4
    dq = fine.gs.delta_q()
    num = abs(fine.grid.integrate(dq * sd.y1.values.real).real)
    den = np.sqrt(fine.grid.integrate(dq**2).real
                  * norms(sd.y1)["l2sq"])
    assert num > 1e-3 * den
    _report(4, f"residuals ({res_p:.1e}, {res_m:.1e}), e0 = {sd.e0:.8f}, "
               f"golden dev {rel_gold:.1e}, refinement dev {rel_refine:.1e}")


def test_criterion_05_coercivity(fine, mid):
    out = {}
    for which in ("G_perp", "G_perp_prime"):
        c_f = coercivity_minimum(fine.lp, fine.sd, which).minimum
        c_m = coercivity_minimum(mid.lp, mid.sd, which).minimum
        assert c_f > 0 and c_m > 0
        assert abs(c_m - c_f) <= 0.05 * c_f
        out[which] = c_f
    c_u = coercivity_minimum(fine.lp, fine.sd, "unconstrained").minimum
    assert c_u < 0
    _report(5, f"c_G = {out['G_perp']:.5f}, c_G' = {out['G_perp_prime']:.5f} "
               f"(refinement-stable), unconstrained {c_u:.3f} < 0")


def test_criterion_06_residual_ladder(fine):
    e0 = fine.sd.e0
    details = []
    for k in (1, 2, 3):
        t0 = time.time()
        pe = build_profiles(1.0, k, fine.sd, fine.lp, fine.gs)
        slope, r2 = residual_decay_slope(pe, fine.gs, fine.lp,
                                         np.log(1e2) / e0, np.log(1e3) / e0)
        elapsed = time.time() - t0
        target = -(k + 1) * e0
        assert abs(slope - target) <= 0.05 * abs(target)
        assert elapsed < 60.0
        details.append(f"k={k}: {slope:.3f}/{target:.3f} [{elapsed:.1f}s]")
    _report(6, "; ".join(details))


def _converging_window_fit(ts, ds):
    floor = ds.min()
    idx = np.where(ds < 4.0 * floor)[0]
    stop = max(idx[0] if idx.size else len(ds), 9)
    return exp_rate_fit(ts[:stop], ds[:stop])


def test_criterion_07_special_solution_convergence(fine, trace_fwd_plus,
                                                   trace_fwd_minus):
    e0 = fine.sd.e0
    details = []
    for label, tr in (("A=+1", trace_fwd_plus), ("A=-1", trace_fwd_minus)):
        ts, ds = distance_series(tr, fine.gs)
        fit = _converging_window_fit(ts, ds)
        assert abs(fit["rate"] + e0) <= 0.10 * e0, (label, fit)
        assert fit["r_squared"] > 0.99
        details.append(f"{label}: rate {fit['rate']:.3f} "
                       f"(r2={fit['r_squared']:.4f})")
    _report(7, f"-e0 = {-e0:.3f}; " + "; ".join(details))


def test_criterion_08_qpm_asymmetry(fine, trace_bwd_blowup, trace_bwd_scatter):
    e0 = fine.sd.e0
    assert trace_bwd_blowup.blowup is not None
    t_det = trace_bwd_blowup.blowup.detected_at
    assert abs(t_det) <= 6.0 / e0
    sc = trace_bwd_scatter
    assert sc.blowup is None
    pot_start = sc.pot_series[-1]       # chronological: start is at t = 0
    pot_tail = sc.pot_series[:max(2, len(sc.pot_series) // 10)]
    drop = pot_start / pot_tail.max()
    assert drop >= 100.0
    h1 = sc.mass_series + sc.grad_series
    assert h1.max() <= 2.0 * h1[-1]
    _report(8, f"blow-up at {t_det:.3f} (|t| <= {6/e0:.3f}); "
               f"pot drop {drop:.0f}x, H1 bounded")


def test_criterion_09_gradient_separation(fine, wide, trace_fwd_plus,
                                          trace_fwd_minus, trace_bwd_blowup,
                                          trace_bwd_scatter, trace_orbit):
    """No sign change above the numerical floor on any default-sweep trace.

    The floor is physical: the orbit run calibrates the scheme-noise seed of
    the unstable mode, which grows like exp(e0 * elapsed); sign information
    below that envelope is noise.
    """
    gs, e0 = fine.gs, fine.sd.e0
    # seed amplitude from the orbit trace (dt = 1e-5), rescaled to dt = 1e-4
    d_orb = trace_orbit.delta_series[-1]
    t_orb = trace_orbit.times[-1]
    seed = d_orb * np.exp(-e0 * t_orb) * (1e-4 / 1e-5)**2
    checked = []
    for label, ref, tr in (("fwd+", gs, trace_fwd_plus),
                           ("fwd-", gs, trace_fwd_minus),
                           ("bwd+", gs, trace_bwd_blowup),
                           ("bwd-", wide.gs, trace_bwd_scatter)):
        elapsed = np.abs(tr.times)          # all runs start at t = 0
        floor = 3.0 * seed * np.exp(e0 * elapsed)
        verdict = gradient_separation_monitor(tr, ref, floor=floor)
        assert verdict.invariant_held, (label, verdict)
        checked.append(f"{label}:{verdict.regime}")
    orbitV = gradient_separation_monitor(trace_orbit, gs,
                                         floor=3.0 * trace_orbit.delta_series.max())
    assert orbitV.regime == "on_threshold"
    _report(9, "sign invariant held: " + ", ".join(checked) + ", orbit on-threshold")


def _virial_mismatch(trace, gs, snaps_spacing=0.005):
    items = sorted(trace.snapshots.items())
    ts = np.array([t for t, _ in items])
    rates = np.array([variance_rate(u) for _, u in items])
    deltas = np.array([abs(gs.grad_sq - norms(u)["grad_l2sq"])
                       for _, u in items])
    return virial_identity_check(ts, rates, deltas), items, ts, deltas


def test_criterion_10_virial_identity(fine, virial_traces):
    from conftest import VIRIAL_DTS
    gs = fine.gs
    dt_ref, dt_half = VIRIAL_DTS
    rep_ref, items, ts, deltas = _virial_mismatch(virial_traces[dt_ref], gs)
    rep_half, _, _, _ = _virial_mismatch(virial_traces[dt_half], gs)
    assert rep_ref.max_rel_mismatch < 1e-2
    ratio = rep_ref.max_rel_mismatch / rep_half.max_rel_mismatch
    assert 2.5 < ratio < 6.0
    # localized variant at R = 5 on the finer-dt trace
    items_h = sorted(virial_traces[dt_half].snapshots.items())
    cut = make_cutoff(fine.grid, 5.0)
    ts_h = np.array([t for t, _ in items_h])
    lrates = np.array([localized_rate(u, cut) for _, u in items_h])
    deltas_h = np.array([abs(gs.grad_sq - norms(u)["grad_l2sq"])
                         for _, u in items_h])
    ars = np.array([localized_remainder(u, cut, gs) for _, u in items_h])
    accel = _five_point_derivative(lrates, ts_h[1] - ts_h[0])
    target = -4.0 * deltas_h + ars
    sl = slice(2, -2)
    rel_loc = np.max(np.abs(accel[sl] - target[sl]) / np.abs(target[sl]))
    assert rel_loc < 1e-2
    _report(10, f"max |FD(y') + 4 delta|/(4 delta) = "
                f"{rep_ref.max_rel_mismatch:.2e}, halving gain {ratio:.2f}x, "
                f"localized R=5 mismatch {rel_loc:.2e}")


def test_criterion_11_modulation_laws(fine, mid, trace_fwd_minus,
                                      trace_fwd_minus_mid):
    gs = fine.gs
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        theta0 = rng.uniform(-np.pi, np.pi)
        alpha0 = rng.uniform(-0.02, 0.02)
        t = rng.uniform(0.0, 5.0)
        u = RadialField(fine.grid, (1.0 + alpha0) * np.exp(1j * (t + theta0))
                        * gs.profile)
        fr = fit_frame(u, t, gs)
        wrapped = (fr.theta - theta0 + np.pi) % (2 * np.pi) - np.pi
        worst = max(worst, abs(wrapped), abs(fr.alpha - alpha0))
    assert worst < 1e-10

    target = 1.0 / (2.0 * gs.grad_sq)
    frames = frame_series(trace_fwd_minus, gs)
    sel = [f for f in frames if 1e-4 < f.delta < 3e-2]
    assert len(sel) >= 8
    ratios = np.array([abs(f.alpha) / f.delta for f in sel])
    dev = np.abs(ratios - target).max() / target
    assert dev < 0.05

    thr_fine = theta_derivative_ratio([f for f in frames if f.valid])
    frames_mid = frame_series(trace_fwd_minus_mid, mid.gs)
    thr_mid = theta_derivative_ratio([f for f in frames_mid if f.valid])
    assert np.isfinite(thr_fine).all() and thr_fine.max() < 10.0
    stability = thr_mid.max() / thr_fine.max()
    assert 0.5 < stability < 2.0
    _report(11, f"synthetic recovery {worst:.1e}; |alpha|/delta dev "
                f"{dev:.3f} of 1/(2|gradQ|^2); |theta'|/delta max "
                f"{thr_fine.max():.3f} (stability {stability:.2f})")


def test_criterion_12_mode_odes(fine, trace_mode):
    gs, sd, lp = fine.gs, fine.sd, fine.lp
    e0 = sd.e0
    samples = []
    for t, u in sorted(trace_mode.snapshots.items()):
        v = RadialField(fine.grid, np.exp(-1j * t) * u.values - gs.profile)
        samples.append((t, v))
    mr = mode_ode_residuals(samples, sd, lp, gs)

    def window_fit(r):
        floor = 5.0 * r.min()
        idx = np.where(r < floor)[0]
        stop = max(idx[0] if idx.size else len(r), 9)
        return exp_rate_fit(mr.times[:stop], r[:stop])

    fit_m = window_fit(np.abs(mr.res_minus))
    fit_p = window_fit(np.abs(mr.res_plus))
    assert fit_m["rate"] <= -1.5 * e0
    assert fit_p["rate"] <= -1.5 * e0
    _report(12, f"residual decay rates {fit_m['rate']:.2f}, "
                f"{fit_p['rate']:.2f} <= {-1.5 * e0:.2f}")


def test_criterion_13_cauchy_schwarz(fine, mid):
    lams = [0.003, 0.006, 0.01, 0.02, 0.03, -0.003, -0.01, -0.03]
    maxima = {}
    for label, stack in (("fine", fine), ("mid", mid)):
        reps = [cauchy_schwarz_check(quadratic_phase_family(stack.gs, lam),
                                     stack.gs) for lam in lams]
        maxima[label] = max(r.ratio for r in reps)
        if label == "fine":
            pos = [r for r in reps if r.delta > 0]
            ds = np.array([r.delta for r in pos])
            lh = np.array([r.lhs for r in pos])
            order = np.polyfit(np.log(ds), np.log(lh), 1)[0]
    assert np.isfinite(maxima["fine"]) and np.isfinite(maxima["mid"])
    assert maxima["fine"] / maxima["mid"] < 2.0
    assert maxima["mid"] / maxima["fine"] < 2.0
    assert order >= 1.9
    _report(13, f"ratio max {maxima['fine']:.4f} (stable across resolutions), "
                f"lhs order in delta {order:.3f} >= 1.9")


def test_criterion_14_conservation(trace_fwd_plus, trace_fwd_minus,
                                   trace_mode, trace_bwd_scatter,
                                   trace_orbit, virial_traces):
    traces = {
        "fwd+": trace_fwd_plus, "fwd-": trace_fwd_minus,
        "mode": trace_mode, "scatter": trace_bwd_scatter,
        "orbit": trace_orbit,
        "virial_ref": virial_traces[min(virial_traces)],
        "virial_half": virial_traces[max(virial_traces)],
    }
    worst_m, worst_e = 0.0, 0.0
    for label, tr in traces.items():
        assert tr.blowup is None, label
        m, e = tr.mass_drift_rate(), tr.energy_drift_rate()
        assert m < 1e-8, (label, m)
        assert e < 1e-7, (label, e)
        worst_m, worst_e = max(worst_m, m), max(worst_e, e)
    _report(14, f"worst drift per unit time: mass {worst_m:.2e} < 1e-8, "
                f"energy {worst_e:.2e} < 1e-7")


def test_cli_selftest_passes(capsys):
    from nlslab.cli import main
    code = main(["selftest"])
    out = capsys.readouterr().out
    assert code == 0
    assert "FAIL" not in out

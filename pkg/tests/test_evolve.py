import numpy as np
import pytest

from nlslab.errors import InsufficientDataError
from nlslab.grid import RadialField, h1_norm, norms
from nlslab.evolve import (EvolveOpts, distance_to_orbit, exp_rate_fit,
                           gradient_separation_monitor, integrate)
from nlslab.sampling import random_radial_field


def test_zero_data_stays_zero(small):
    tr = integrate(small.grid.zero_field(), 0.0, 0.1, 1e-3, small.gs)
    assert np.all(tr.mass_series == 0.0)
    final = sorted(tr.snapshots.items())[-1][1]
    assert np.abs(final.values).max() == 0.0


def test_phase_equivariance(small):
    rng = np.random.default_rng(2)
    u0 = random_radial_field(small.grid, rng)
    theta = 0.9
    o = EvolveOpts(record_stride=20)
    tr_a = integrate(u0, 0.0, 0.05, 1e-3, small.gs, o)
    tr_b = integrate(np.exp(1j * theta) * u0, 0.0, 0.05, 1e-3, small.gs, o)
    ua = sorted(tr_a.snapshots.items())[-1][1].values
    ub = sorted(tr_b.snapshots.items())[-1][1].values
    assert np.abs(ub - np.exp(1j * theta) * ua).max() < 1e-12 * np.abs(ua).max()


def test_time_reversal_symmetry(small):
    gs = small.gs
    u0 = RadialField(small.grid, gs.profile * (1.0 + 0.05j))
    t_span = 0.1
    tr = integrate(u0, 0.0, t_span, 1e-3, gs)
    u_fwd = sorted(tr.snapshots.items())[-1][1]
    tr2 = integrate(u_fwd.conj(), 0.0, t_span, 1e-3, gs)
    u_back = sorted(tr2.snapshots.items())[-1][1].conj()
    # interior nodes return to roundoff; the origin value is re-extrapolated
    # from the interior every step (zero quadrature weight) so it only
    # matches within the even-extension accuracy
    diff = np.abs(u_back.values - u0.values)
    assert diff[1:].max() < 1e-11 * np.abs(u0.values).max()
    assert diff[0] < 1e-4 * np.abs(u0.values).max()


def test_backward_equals_reversed_forward(small):
    gs = small.gs
    u0 = RadialField(small.grid, gs.profile * (1.0 + 0.02j))
    fwd = integrate(u0, 0.0, 0.08, 1e-3, gs)
    u1 = sorted(fwd.snapshots.items())[-1][1]
    bwd = integrate(u1, 0.08, 0.0, 1e-3, gs)
    u_round = sorted(bwd.snapshots.items())[0][1]
    assert bwd.times[0] < bwd.times[-1]  # chronological storage
    diff = np.abs(u_round.values - u0.values)
    assert diff[1:].max() < 1e-10 * np.abs(u0.values).max()
    assert diff[0] < 1e-4 * np.abs(u0.values).max()


def test_second_order_convergence(small):
    gs = small.gs
    u0 = RadialField(small.grid, gs.profile * np.exp(0.05j * small.grid.nodes**2))
    ref = integrate(u0, 0.0, 0.05, 6.25e-5, gs)
    u_ref = sorted(ref.snapshots.items())[-1][1].values
    errs = []
    for dt in (1e-3, 5e-4):
        tr = integrate(u0, 0.0, 0.05, dt, gs)
        u = sorted(tr.snapshots.items())[-1][1].values
        errs.append(np.abs(u - u_ref).max())
    ratio = errs[0] / errs[1]
    assert 3.2 < ratio < 4.8


def test_conservation_drift(mid):
    gs = mid.gs
    u0 = RadialField(mid.grid, gs.profile * np.exp(0.005j * mid.grid.nodes**2))
    tr = integrate(u0, 0.0, 0.3, 1e-4, gs, EvolveOpts(record_stride=50))
    assert tr.mass_drift_rate() < 1e-8
    # the strict 1e-7 energy budget is pinned at the reference resolution
    # (4096, checked in the acceptance suite); 2048 carries a spatial floor
    assert tr.energy_drift_rate() < 1e-6
    assert np.all(tr.delta_series >= 0.0)


def test_blowup_detection(small):
    gs = small.gs
    u0 = RadialField(small.grid, 1.6 * gs.profile)
    tr = integrate(u0, 0.0, 2.0, 5e-4, gs, EvolveOpts(record_stride=10))
    assert tr.blowup is not None
    assert tr.blowup.reason in ("grad_explosion", "nan")
    assert tr.times[-1] <= 2.0


def test_nan_detection(small):
    vals = small.gs.q.values.copy()
    vals[10] = np.nan
    tr = integrate(RadialField(small.grid, vals), 0.0, 0.05, 1e-3, small.gs,
                   EvolveOpts(record_stride=1))
    assert tr.blowup is not None and tr.blowup.reason == "nan"


def test_cfl_warning(small):
    with pytest.warns(UserWarning, match="dt is large"):
        integrate(small.gs.q, 0.0, 0.5, 0.25, small.gs,
                  EvolveOpts(record_stride=1))


def test_distance_to_orbit_exact(small):
    gs = small.gs
    u = RadialField(small.grid, np.exp(1j * (1.0 + 0.3)) * gs.profile)
    rep = distance_to_orbit(u, 1.0, gs)
    assert rep["dist_h1"] < 1e-10
    assert abs(rep["theta_star"] - 0.3) < 1e-12


def test_distance_to_orbit_tangent(small):
    gs = small.gs
    eps = 1e-3
    u = RadialField(small.grid, gs.profile * (1.0 + 1j * eps))
    rep = distance_to_orbit(u, 0.0, gs)
    # optimal phase absorbs the first order: distance is O(eps^2) * scale
    assert rep["dist_h1"] < 10.0 * eps**2 * np.sqrt(gs.mass + gs.grad_sq)


def test_exp_rate_fit_exact():
    t = np.linspace(0.0, 3.0, 40)
    rep = exp_rate_fit(t, np.exp(-2.0 * t))
    assert abs(rep["rate"] + 2.0) < 1e-8
    assert rep["r_squared"] > 1.0 - 1e-12


def test_exp_rate_fit_constant():
    t = np.linspace(0.0, 3.0, 20)
    rep = exp_rate_fit(t, np.full(20, 3.7))
    assert abs(rep["rate"]) < 1e-12


def test_exp_rate_fit_errors():
    t = np.linspace(0.0, 1.0, 20)
    with pytest.raises(ValueError):
        exp_rate_fit(t, np.linspace(-1, 1, 20))
    with pytest.raises(InsufficientDataError):
        exp_rate_fit(t[:5], np.exp(t[:5]))


def test_gradient_separation_on_threshold(small):
    tr = integrate(small.gs.q, 0.0, 0.05, 2e-4, small.gs,
                   EvolveOpts(record_stride=10))
    verdict = gradient_separation_monitor(tr, small.gs)
    assert verdict.regime == "on_threshold"
    assert verdict.invariant_held


def test_gradient_separation_sides(small):
    gs = small.gs
    for sign in (+1.0, -1.0):
        u0 = RadialField(small.grid, (1.0 + sign * 5e-3) * gs.profile)
        tr = integrate(u0, 0.0, 0.2, 2e-4, gs, EvolveOpts(record_stride=20))
        verdict = gradient_separation_monitor(tr, gs, floor=1e-4 * gs.grad_sq)
        assert verdict.regime == ("positive" if sign > 0 else "negative")
        assert verdict.invariant_held, verdict


def test_trace_times_chronological(small):
    tr = integrate(small.gs.q, 0.0, -0.05, 1e-3, small.gs)
    assert np.all(np.diff(tr.times) > 0)
    assert tr.times[0] == pytest.approx(-0.05)

import numpy as np
import pytest
from scipy.optimize import brentq

from nlslab.errors import AccuracyError, ResolutionError, SolverError
from nlslab.grid import RadialGrid, RadialField, norms
from nlslab.ground_state import (delta, energy, gn_constant, gn_functional,
                                 mass, rescale_to_threshold, resample,
                                 shoot_height, solve_ground_state)
from nlslab.sampling import random_radial_field


def test_golden_height(small, golden):
    assert abs(small.gs.q0 - golden["q0"]["value"]) < 1e-8


def test_golden_mass(mid, golden):
    m = golden["m_Q"]["value"]
    assert abs(mid.gs.mass - m) / m < 1e-5


def test_mass_refinement_stability(mid, fine, golden):
    m = golden["m_Q"]["value"]
    # stable to 4 digits under refinement
    assert abs(mid.gs.mass - fine.gs.mass) / m < 1e-4


def test_pohozhaev(mid):
    gs = mid.gs
    tol = 1e-6 * (mid.grid.spacing * 4095 / 30.0)**4
    assert abs(gs.l4_4 / gs.mass - 4.0) < tol
    assert abs(gs.grad_sq / gs.mass - 3.0) < tol
    assert abs(gs.energy / gs.mass - 0.5) < tol


def test_positive_decreasing(small):
    q = small.gs.profile
    assert q[0] > 0
    assert np.all(q[:-1] > 0)
    assert np.all(np.diff(q[:-1]) <= 1e-12 * q[0])


def test_uniqueness_proxy_two_tolerances():
    a10 = shoot_height(1e-10)
    a12 = shoot_height(1e-12)
    assert abs(a10 - a12) < 1e-9


def test_exponential_decay_law(fine):
    gs = fine.gs
    r = fine.grid.nodes
    sel = (r >= fine.grid.r_max / 2) & (r <= 0.9 * fine.grid.r_max)
    w = np.log(gs.profile[sel]) + r[sel] + np.log(r[sel])
    assert w.max() - w.min() < 1e-2


def test_energy_mass_invariances(small):
    gs = small.gs
    for theta in (0.0, 0.7, 2.9):
        u = RadialField(small.grid, np.exp(1j * theta) * gs.profile)
        assert abs(energy(u) - gs.energy) < 1e-10 * abs(gs.energy)
        assert abs(mass(u) - gs.mass) < 1e-10 * gs.mass
    u = small.gs.q.conj()
    assert abs(energy(u) - gs.energy) < 1e-10 * abs(gs.energy)


def test_energy_of_q(small):
    gs = small.gs
    tol = 1e-6 * (small.grid.spacing * 4095.0 / 30.0)**4
    assert abs(energy(gs.q) - gs.mass / 2.0) < tol * gs.mass
    assert energy(small.grid.zero_field()) == 0.0
    assert mass(small.grid.zero_field()) == 0.0


def test_delta_phase_invariance(small):
    gs = small.gs
    assert delta(gs.q, gs) == 0.0
    u = RadialField(small.grid, np.exp(0.4j) * gs.profile)
    assert delta(u, gs) < 1e-9 * gs.grad_sq


def test_delta_scaling_expansion(small):
    gs = small.gs
    for alpha in (1e-3, 0.05, -0.02):
        u = RadialField(small.grid, (1.0 + alpha) * gs.profile)
        expected = abs(2.0 * alpha + alpha**2) * gs.grad_sq
        assert abs(delta(u, gs) - expected) < 1e-10 * gs.grad_sq


def test_gn_constant_formula(mid):
    gs = mid.gs
    # C_GN = 4/(3^{3/2} m_Q) via the Pohozhaev ratios; h^4 anchor at n=4096
    tol = 1e-6 * (mid.grid.spacing * 4095.0 / 30.0)**4
    assert abs(gs.c_gn - 4.0 / (3.0**1.5 * gs.mass)) / gs.c_gn < tol
    assert abs(gn_functional(gs.q, gs)) < tol


def test_gn_inequality_random_fields(small):
    gs = small.gs
    rng = np.random.default_rng(42)
    worst = np.inf
    for _ in range(1000):
        u = random_radial_field(small.grid, rng)
        nm = norms(u)
        if nm["l2sq"] < 1e-12:
            continue
        worst = min(worst, gn_functional(u, gs))
    assert worst >= -1e-9


def test_rescale_identity(small):
    gs = small.gs
    u = rescale_to_threshold(small.gs.q, gs)
    assert np.abs(u.values - gs.profile).max() < 1e-8 * gs.q0


def test_rescale_doubled(mid):
    gs = mid.gs
    u0 = RadialField(mid.grid, 2.0 * gs.profile)
    u = rescale_to_threshold(u0, gs)          # lambda = 4
    assert abs(mass(u) - gs.mass) / gs.mass < 1e-6


def test_rescale_product_constraint(fine):
    # scalar root-find oracle: fix a perturbed profile Q + 0.1 b and tune the
    # overall amplitude mu so that M[u]E[u] lands on the threshold product
    gs = fine.gs
    bump = np.exp(-((fine.grid.nodes - 2.0) / 1.5)**2)
    base = gs.profile + 0.1 * bump

    def product_gap(mu):
        u = RadialField(fine.grid, mu * base)
        return mass(u) * energy(u) - gs.mass * gs.energy

    mu = brentq(product_gap, 1.0, 1.5, xtol=1e-14)
    u = RadialField(fine.grid, mu * base)
    assert abs(mass(u) * energy(u) - gs.mass * gs.energy) \
        < 1e-10 * abs(gs.mass * gs.energy)
    ut = rescale_to_threshold(u, gs)
    assert abs(energy(ut) - gs.energy) / abs(gs.energy) < 1e-6
    assert abs(mass(ut) - gs.mass) / gs.mass < 1e-6


def test_rescale_errors(small):
    with pytest.raises(ValueError):
        rescale_to_threshold(small.grid.zero_field(), small.gs)
    # huge mass -> lambda large -> resolution error
    u = RadialField(small.grid, 40.0 * small.gs.profile)
    with pytest.raises(ResolutionError):
        rescale_to_threshold(u, small.gs)


def test_solver_input_validation(small):
    with pytest.raises(ValueError):
        solve_ground_state(small.grid, tol=-1.0)
    with pytest.raises(SolverError):
        solve_ground_state(RadialGrid(512, 15.0), tol=1e-10)


def test_residual_contract(mid):
    gs = mid.gs
    bound = 16.0 * mid.grid.spacing**2 * np.sqrt(gs.mass)
    assert gs.residual < bound

"""Shared fixtures.

The heavy objects (ground states, spectra, evolution traces) are built once
per session and shared between the unit tests and the acceptance suite.
Resolutions: "small" (1024) for cheap unit checks, "mid" (2048) and "fine"
(4096, the pinned default) for refinement-sensitive criteria.
"""

import json
import os

import numpy as np
import pytest

from nlslab import RadialGrid, solve_ground_state
from nlslab.linearized import assemble, solve_eigenpair
from nlslab.profiles import build_profiles
from nlslab.classify import prepare_threshold_data, ProfileData
from nlslab.evolve import integrate, EvolveOpts

R_MAX = 30.0
REFERENCE_DT = 1e-4
SNAP_SPACING = 0.02


class Stack:
    """Grid + ground state + linearized operators + spectrum."""

    def __init__(self, n_points, r_max=R_MAX):
        self.grid = RadialGrid(n_points, r_max)
        self.gs = solve_ground_state(self.grid, tol=1e-12)
        self.lp = assemble(self.gs)
        self._sd = None

    @property
    def sd(self):
        if self._sd is None:
            self._sd = solve_eigenpair(self.lp)
        return self._sd


@pytest.fixture(scope="session")
def golden():
    path = os.path.join(os.path.dirname(__file__), "..", "src", "nlslab",
                        "data", "golden_constants.json")
    with open(path) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def small():
    return Stack(1024)


@pytest.fixture(scope="session")
def mid():
    return Stack(2048)


@pytest.fixture(scope="session")
def fine():
    return Stack(4096)


@pytest.fixture(scope="session")
def wide():
    """Same spacing as `fine` but a 45-radius box: the long dispersive run
    must not let the outgoing front reflect off the wall inside the horizon."""
    return Stack(6144, r_max=45.0)


def profile_run(stack, A, t_end, dt, snap_spacing=SNAP_SPACING,
                record_stride=50, eps=1e-2):
    """Prepare threshold profile data and integrate, snapshots attached."""
    u0, meta = prepare_threshold_data(ProfileData(A=A, eps=eps),
                                      stack.gs, stack.sd, stack.lp)
    lo, hi = (0.0, t_end) if t_end > 0 else (t_end, 0.0)
    snaps = tuple(np.round(np.arange(lo, hi + 1e-12, snap_spacing), 10))
    tr = integrate(u0, 0.0, t_end, dt, stack.gs,
                   EvolveOpts(dt=dt, record_stride=record_stride,
                              snapshot_times=snaps))
    tr.meta.update(meta)
    return tr


@pytest.fixture(scope="session")
def trace_fwd_plus(fine):
    return profile_run(fine, +1.0, 1.3, REFERENCE_DT)


@pytest.fixture(scope="session")
def trace_fwd_minus(fine):
    return profile_run(fine, -1.0, 1.3, REFERENCE_DT)


@pytest.fixture(scope="session")
def trace_fwd_minus_mid(mid):
    return profile_run(mid, -1.0, 1.3, REFERENCE_DT)


@pytest.fixture(scope="session")
def trace_mode(fine):
    # finer dt: the mode-ODE residuals sit on the scheme-defect floor ~ dt^2
    return profile_run(fine, +1.0, 0.8, 2.5e-5, snap_spacing=0.01,
                       record_stride=400)


@pytest.fixture(scope="session")
def trace_bwd_blowup(fine):
    horizon = 6.0 / fine.sd.e0
    return profile_run(fine, +1.0, -horizon, REFERENCE_DT)


@pytest.fixture(scope="session")
def trace_bwd_scatter(wide):
    # the departure transient of the dispersive run needs a finer dt than the
    # global reference (and the wide box) to stay inside the drift budget
    horizon = 6.0 / wide.sd.e0 + 5.0
    return profile_run(wide, -1.0, -horizon, 6.25e-5, record_stride=160)


@pytest.fixture(scope="session")
def trace_orbit(fine):
    """Quiet-window orbit run; doubles as the noise-floor calibration."""
    snaps = tuple(np.round(np.arange(0.0, 0.2501, 0.05), 10))
    return integrate(fine.gs.q, 0.0, 0.25, 1e-5, fine.gs,
                     EvolveOpts(dt=1e-5, record_stride=500,
                                snapshot_times=snaps))


VIRIAL_DTS = (6.25e-5, 3.125e-5)


@pytest.fixture(scope="session")
def virial_traces(fine):
    """Backward supercritical runs at two dts with dense variance sampling.

    The pair sits where the identity mismatch is still dt-dominated (the
    stencil/quadrature floors are ~1e-8) while the drift budgets hold.
    """
    u0, _ = prepare_threshold_data(ProfileData(A=+1.0), fine.gs, fine.sd,
                                   fine.lp)
    snaps = tuple(np.round(np.arange(-0.45, 1e-12, 0.005), 10))
    out = {}
    for dt in VIRIAL_DTS:
        out[dt] = integrate(u0, 0.0, -0.45, dt, fine.gs,
                            EvolveOpts(dt=dt, record_stride=1000,
                                       snapshot_times=snaps))
    return out


def distance_series(trace, gs):
    from nlslab.evolve import distance_to_orbit
    ts, ds = [], []
    for t, u in sorted(trace.snapshots.items()):
        ts.append(t)
        ds.append(distance_to_orbit(u, t, gs)["dist_h1"])
    return np.array(ts), np.array(ds)

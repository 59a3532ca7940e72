#!/usr/bin/env python3
"""Standalone shooting oracle for the golden constants q0 and m_Q.

Deliberately independent of the nlslab package: plain scipy shooting with
bisection on the initial height, mass accumulated as an extra ODE component
(no grid quadrature involved), analytic exp(-2r) tail completion.  Writes
its results into the golden-constants JSON consumed by the test suite.

Run from the repository root:

    python3 oracles/oracle_shoot.py [--out src/nlslab/data/golden_constants.json]
"""

from __future__ import annotations

import argparse
import json
import os

import numpy as np
from scipy.integrate import solve_ivp


def rhs(r, y):
    q, p, _m = y
    qpp = (q - q**3) / 3.0 if r < 1e-12 else q - q**3 - 2.0 * p / r
    return [p, qpp, 4.0 * np.pi * r * r * q * q]


def ev_cross(r, y):
    return y[0]


ev_cross.terminal = True
ev_cross.direction = -1.0


def ev_upturn(r, y):
    return y[1]


ev_upturn.terminal = True
ev_upturn.direction = 1.0


def classify(a, r_end=25.0, rtol=1e-12, dense=False):
    sol = solve_ivp(rhs, (0.0, r_end), [a, 0.0, 0.0], method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=dense,
                    events=[ev_cross, ev_upturn])
    if sol.t_events[0].size:
        return "over", sol
    if sol.t_events[1].size:
        return "under", sol
    return ("under" if sol.y[0, -1] > 0 else "over"), sol


def shoot(tol=1e-13, lo=1.0, hi=10.0):
    assert classify(lo)[0] == "under" and classify(hi)[0] == "over"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(mid)[0] == "under":
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ground_state_profile(a_star, r_end=25.0):
    """Dense solution for Q at the converged height."""
    _, sol = classify(a_star, r_end=r_end, dense=True)
    return sol


def mass_of_q(sol):
    """4 pi int Q^2 r^2 dr with analytic tail beyond a clean radius."""
    rb = min(12.0, sol.t[-1] - 1.0)
    rr = np.linspace(rb - 4.0, rb, 200)
    qq = sol.sol(rr)[0]
    c = np.exp(np.mean(np.log(rr * qq) + rr))
    inner = sol.sol(rb)[2]
    tail = 2.0 * np.pi * c * c * np.exp(-2.0 * rb)
    return inner + tail, c


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(
        os.path.dirname(__file__), "..", "src", "nlslab", "data",
        "golden_constants.json"))
    ap.add_argument("--tol", type=float, default=1e-13)
    args = ap.parse_args(argv)

    a_star = shoot(tol=args.tol)
    sol = ground_state_profile(a_star)
    m_q, c_tail = mass_of_q(sol)
    # stability probe: vary the tail-completion radius
    probes = []
    for rb in (10.0, 12.0, 14.0):
        rr = np.linspace(rb - 4.0, rb, 200)
        qq = sol.sol(rr)[0]
        c = np.exp(np.mean(np.log(rr * qq) + rr))
        probes.append(sol.sol(rb)[2] + 2.0 * np.pi * c * c * np.exp(-2.0 * rb))
    spread = max(probes) - min(probes)

    path = os.path.abspath(args.out)
    data = {}
    if os.path.exists(path):
        with open(path) as fh:
            data = json.load(fh)
    note = "oracles/oracle_shoot.py (bisection shooting, DOP853, tol=%g)" % args.tol
    data["q0"] = {"value": a_star, "oracle": note}
    data["m_Q"] = {"value": m_q, "oracle": note,
                   "tail_coefficient": c_tail, "tail_radius_spread": spread}
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"q0  = {a_star:.15g}")
    print(f"m_Q = {m_q:.15g}  (tail-radius spread {spread:.3g})")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()

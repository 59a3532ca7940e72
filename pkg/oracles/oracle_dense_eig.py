#!/usr/bin/env python3
"""Dense block-operator oracle for the golden eigenvalue e0.

Independent route: the full 2n x 2n real block operator

    [[ 0,  -L_-],
     [ L_+,  0 ]]

is assembled densely with a plain second-order stencil directly in Q-space
(no v = r*f substitution) on coarse uniform grids, and its largest real
eigenvalue is taken with scipy.linalg.eig.  Richardson extrapolation over
n = 1024 and n = 2048 removes the leading h^2 error; comparing against the
n = 512/1024 pair shows the golden value is good to ~3e-5 relative.

Run from the repository root:

    python3 oracles/oracle_dense_eig.py
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import scipy.linalg

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import oracle_shoot  # noqa: E402


def dense_minus_lap(n, r_max):
    """-Lap on nodes r_0..r_{n-2} (Dirichlet ghost at r_max), 2nd order."""
    h = r_max / (n - 1)
    r = np.linspace(0.0, r_max, n)[:-1]
    m = n - 1
    a = np.zeros((m, m))
    a[0, 0] = 6.0 / h**2
    a[0, 1] = -6.0 / h**2
    for i in range(1, m):
        a[i, i] = 2.0 / h**2
        a[i, i - 1] = -(1.0 / h**2 - 1.0 / (r[i] * h))
        if i + 1 < m:
            a[i, i + 1] = -(1.0 / h**2 + 1.0 / (r[i] * h))
    return a, r


def e0_on_grid(n, r_max, sol):
    a, r = dense_minus_lap(n, r_max)
    q = np.zeros_like(r)
    inside = r <= sol.t[-1]
    q[inside] = sol.sol(r[inside])[0]
    # analytic tail past the clean radius
    rb = min(12.0, sol.t[-1] - 1.0)
    rr = np.linspace(rb - 4.0, rb, 200)
    c = np.exp(np.mean(np.log(rr * sol.sol(rr)[0]) + rr))
    far = r > rb
    q[far] = c * np.exp(-r[far]) / r[far]
    m = len(r)
    lp = a + np.diag(1.0 - 3.0 * q * q)
    lm = a + np.diag(1.0 - q * q)
    block = np.zeros((2 * m, 2 * m))
    block[:m, m:] = -lm
    block[m:, :m] = lp
    ev = scipy.linalg.eigvals(block)
    real = ev[np.abs(ev.imag) < 1e-8].real
    return float(real.max())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(
        os.path.dirname(__file__), "..", "src", "nlslab", "data",
        "golden_constants.json"))
    ap.add_argument("--r-max", type=float, default=30.0)
    args = ap.parse_args(argv)

    a_star = oracle_shoot.shoot(tol=1e-13)
    sol = oracle_shoot.ground_state_profile(a_star)

    e512 = e0_on_grid(512, args.r_max, sol)
    e1024 = e0_on_grid(1024, args.r_max, sol)
    e2048 = e0_on_grid(2048, args.r_max, sol)
    e0 = (4.0 * e2048 - e1024) / 3.0  # h^2 Richardson
    check = (4.0 * e1024 - e512) / 3.0

    path = os.path.abspath(args.out)
    data = {}
    if os.path.exists(path):
        with open(path) as fh:
            data = json.load(fh)
    data["e0"] = {
        "value": e0,
        "oracle": "oracles/oracle_dense_eig.py (dense 2n x 2n block eig, "
                  "n=1024/2048 + Richardson)",
        "raw_n512": e512,
        "raw_n1024": e1024,
        "raw_n2048": e2048,
        "richardson_512_1024": check,
    }
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"e0(n=512)  = {e512:.12g}")
    print(f"e0(n=1024) = {e1024:.12g}")
    print(f"e0(n=2048) = {e2048:.12g}")
    print(f"e0 (Richardson 1024/2048) = {e0:.12g}")
    print(f"   cross-check 512/1024   = {check:.12g}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()

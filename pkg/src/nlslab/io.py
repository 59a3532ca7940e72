"""Canonical JSON/CSV emission and the on-disk trace format.

JSON summaries print floats at 17 significant digits so identical inputs
give byte-identical outputs.  Evolution traces are persisted as a run
directory:

    <dir>/summary.json     meta, drift rates, blowup record
    <dir>/series.csv       t, mass, energy, grad_sq, delta, pot
    <dir>/snap_<t>.csv     r, re_u, im_u   (one file per stored snapshot)
"""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np

from .evolve import EvolutionTrace, BlowupRecord
from .grid import RadialGrid, RadialField


def _fmt(x) -> str:
    return format(float(x), ".17g")


def dumps_canonical(obj) -> str:
    """JSON text with deterministic key order and 17-digit floats."""
    def render(o):
        if isinstance(o, dict):
            items = sorted(o.items(), key=lambda kv: str(kv[0]))
            inner = ",".join(f"{json.dumps(str(k))}:{render(v)}"
                             for k, v in items)
            return "{" + inner + "}"
        if isinstance(o, (list, tuple)) or isinstance(o, np.ndarray):
            return "[" + ",".join(render(v) for v in list(o)) + "]"
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (float, np.floating)):
            return _fmt(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        return json.dumps(str(o))
    return render(obj)


def config_hash(obj) -> str:
    return hashlib.sha256(dumps_canonical(obj).encode()).hexdigest()[:16]


def write_json(path: str, obj):
    with open(path, "w") as fh:
        fh.write(dumps_canonical(obj))
        fh.write("\n")


def write_series_csv(path: str, columns: dict):
    keys = list(columns)
    rows = zip(*[columns[k] for k in keys])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_field_csv(path: str, field: RadialField):
    write_series_csv(path, {
        "r": field.grid.nodes,
        "re_u": field.values.real,
        "im_u": field.values.imag,
    })


def read_field_csv(path: str) -> RadialField:
    data = np.genfromtxt(path, delimiter=",", names=True)
    r = data["r"]
    grid = RadialGrid(len(r), float(r[-1]))
    return RadialField(grid, data["re_u"] + 1j * data["im_u"])


def write_trace(trace: EvolutionTrace, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    write_series_csv(os.path.join(out_dir, "series.csv"), {
        "t": trace.times,
        "mass": trace.mass_series,
        "energy": trace.energy_series,
        "grad_sq": trace.grad_series,
        "delta": trace.delta_series,
        "pot": trace.pot_series,
    })
    snap_index = {}
    for t, field in sorted(trace.snapshots.items()):
        name = f"snap_{t:+.6f}.csv"
        write_field_csv(os.path.join(out_dir, name), field)
        snap_index[_fmt(t)] = name
    summary = {
        "meta": trace.meta,
        "mass_drift_rate": trace.mass_drift_rate(),
        "energy_drift_rate": trace.energy_drift_rate(),
        "blowup": None if trace.blowup is None else {
            "detected_at": trace.blowup.detected_at,
            "reason": trace.blowup.reason,
        },
        "snapshots": snap_index,
    }
    write_json(os.path.join(out_dir, "summary.json"), summary)


def read_trace(out_dir: str) -> EvolutionTrace:
    with open(os.path.join(out_dir, "summary.json")) as fh:
        summary = json.load(fh)
    data = np.genfromtxt(os.path.join(out_dir, "series.csv"),
                         delimiter=",", names=True)
    snapshots = {}
    for t_str, name in summary.get("snapshots", {}).items():
        snapshots[float(t_str)] = read_field_csv(os.path.join(out_dir, name))
    blow = summary.get("blowup")
    return EvolutionTrace(
        times=np.atleast_1d(data["t"]),
        mass_series=np.atleast_1d(data["mass"]),
        energy_series=np.atleast_1d(data["energy"]),
        grad_series=np.atleast_1d(data["grad_sq"]),
        delta_series=np.atleast_1d(data["delta"]),
        pot_series=np.atleast_1d(data["pot"]),
        blowup=None if blow is None else BlowupRecord(**blow),
        snapshots=snapshots,
        meta=summary.get("meta", {}),
    )

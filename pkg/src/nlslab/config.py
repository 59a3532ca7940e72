"""Lab configuration and golden-constant management.

The golden constants (q0, m_Q, e0) are produced by the standalone oracle
scripts in oracles/ and checked in as package data; the library refuses to
fabricate them, so a missing file is an error rather than a silent refit.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from importlib import resources

from .errors import UsageError
from .io import config_hash

ENV_CONFIG = "NLS_LAB_CONFIG"


@dataclass
class GridConfig:
    n_points: int = 4096
    r_max: float = 30.0


@dataclass
class ToleranceConfig:
    shoot_tol: float = 1e-12
    eig_tol: float = 1e-12
    newton_tol: float = 1e-9
    mass_drift_budget: float = 1e-8     # relative per unit time
    energy_drift_budget: float = 1e-7


@dataclass
class EvolutionConfig:
    dt: float = 1e-4
    record_stride: int = 50
    blowup_factor: float = 10.0
    cfl_safety: float = 50.0


@dataclass
class PathsConfig:
    golden_constants: str = ""          # empty: use the packaged file
    output_dir: str = "runs"


@dataclass
class LabConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def __post_init__(self):
        if self.grid.n_points < 256:
            raise UsageError("n_points must be >= 256")
        if self.grid.r_max < 20:
            raise UsageError("r_max must be >= 20")
        for name in ("shoot_tol", "eig_tol", "newton_tol",
                     "mass_drift_budget", "energy_drift_budget"):
            if getattr(self.tolerances, name) <= 0:
                raise UsageError(f"tolerance {name} must be positive")
        if self.evolution.dt <= 0:
            raise UsageError("dt must be positive")

    def as_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        return config_hash(self.as_dict())

    @classmethod
    def from_file(cls, path: str) -> "LabConfig":
        with open(path) as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "LabConfig":
        known = {"grid": GridConfig, "tolerances": ToleranceConfig,
                 "evolution": EvolutionConfig, "paths": PathsConfig}
        kwargs = {}
        for key, typ in known.items():
            sub = raw.get(key, {})
            unknown = set(sub) - set(typ.__dataclass_fields__)
            if unknown:
                raise UsageError(f"unknown config keys in {key}: {unknown}")
            kwargs[key] = typ(**sub)
        extra = set(raw) - set(known)
        if extra:
            raise UsageError(f"unknown config sections: {extra}")
        return cls(**kwargs)

    @classmethod
    def from_environment(cls, explicit_path: str | None = None) -> "LabConfig":
        path = explicit_path or os.environ.get(ENV_CONFIG)
        return cls.from_file(path) if path else cls()


def load_golden_constants(path: str = "") -> dict:
    """Golden scalars {q0, m_Q, e0} with their oracle provenance notes."""
    if path:
        with open(path) as fh:
            data = json.load(fh)
    else:
        ref = resources.files("nlslab").joinpath("data/golden_constants.json")
        data = json.loads(ref.read_text())
    for key in ("q0", "m_Q", "e0"):
        if key not in data or "value" not in data[key] \
                or "oracle" not in data[key]:
            raise UsageError(
                f"golden constant {key!r} missing or lacks provenance; "
                "run the oracle scripts in oracles/ to regenerate")
    return data

"""Random smooth radial test fields for property checks."""

from __future__ import annotations

import numpy as np

from .grid import RadialGrid, RadialField


def random_radial_field(grid: RadialGrid, rng: np.random.Generator,
                        n_bumps: int = 4, complex_valued: bool = True,
                        max_center: float = 8.0) -> RadialField:
    """Sum of randomly placed Gaussians, exponentially localized in r."""
    r = grid.nodes
    vals = np.zeros_like(r, dtype=complex)
    for _ in range(n_bumps):
        amp = rng.normal() + (1j * rng.normal() if complex_valued else 0.0)
        center = rng.uniform(0.0, max_center)
        width = rng.uniform(0.5, 2.0)
        vals += amp * np.exp(-((r - center) / width)**2)
    vals[-1] = 0.0
    return RadialField(grid, vals)

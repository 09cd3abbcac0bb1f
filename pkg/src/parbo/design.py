"""Space-filling initial designs."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist


def lhs(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube sample of n points in [0, 1]^d.

    Each column has exactly one point in each of the n equal strata.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    out = np.empty((n, d))
    for j in range(d):
        out[:, j] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return out


def nearest_grid(points: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Snap each point to its Euclidean-nearest grid row (lowest index on ties)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] < 1:
        raise ValueError("grid must be nonempty")
    idx = np.argmin(cdist(points, grid, metric="sqeuclidean"), axis=1)
    return grid[idx].copy()

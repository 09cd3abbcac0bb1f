"""Objective functions: synthetic GP draws, analytic benchmarks, tabular data.

All objectives are maximized.  The analytic benchmarks are the standard
minimization test functions, negated, with their standard boxes mapped
affinely from the unit cube.
"""

from __future__ import annotations

import csv
import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .kernel import KernelSpec, kernel_matrix
from .sampling import _factor_psd, build_feature_map

OBJECTIVE_KINDS = ("synthetic_grid", "analytic", "tabular")

# name -> (dim, standard box lower, upper)
BENCHMARK_BOXES = {
    "ackley4": (4, -32.768, 32.768),
    "hartmann6": (6, 0.0, 1.0),
    "shekel4": (4, 0.0, 10.0),
    "styblinski_tang3": (3, -5.0, 5.0),
}

# Catalog optimizer coordinates in the standard box, used as polish starts
# for the known optima.
_BENCHMARK_ARGMIN = {
    "ackley4": np.zeros(4),
    "hartmann6": np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]),
    "shekel4": np.full(4, 4.0),
    "styblinski_tang3": np.full(3, -2.903534),
}

_HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)

_SHEKEL_BETA = 0.1 * np.array([1, 2, 2, 4, 4, 6, 3, 7, 5, 5], dtype=float)
_SHEKEL_C = np.array(
    [
        [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
        [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
        [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
        [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
    ]
)


def _ackley_std(z: np.ndarray) -> float:
    d = z.size
    return float(
        -20.0 * math.exp(-0.2 * math.sqrt(np.sum(z * z) / d))
        - math.exp(np.sum(np.cos(2.0 * math.pi * z)) / d)
        + 20.0
        + math.e
    )


def _hartmann6_std(z: np.ndarray) -> float:
    inner = np.sum(_HARTMANN6_A * (z[None, :] - _HARTMANN6_P) ** 2, axis=1)
    return float(-np.sum(_HARTMANN6_ALPHA * np.exp(-inner)))


def _shekel_std(z: np.ndarray) -> float:
    denom = np.sum((z[:, None] - _SHEKEL_C) ** 2, axis=0) + _SHEKEL_BETA
    return float(-np.sum(1.0 / denom))


def _styblinski_tang_std(z: np.ndarray) -> float:
    return float(0.5 * np.sum(z**4 - 16.0 * z**2 + 5.0 * z))


_BENCHMARK_FUNCS = {
    "ackley4": _ackley_std,
    "hartmann6": _hartmann6_std,
    "shekel4": _shekel_std,
    "styblinski_tang3": _styblinski_tang_std,
}


def benchmark_eval(name: str, x) -> float:
    """Negated standard benchmark at a unit-cube point (so larger is better)."""
    if name not in BENCHMARK_BOXES:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARK_BOXES)}")
    d, lo, hi = BENCHMARK_BOXES[name]
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"{name} expects a point of dimension {d}, got shape {x.shape}")
    z = lo + (hi - lo) * x
    return -_BENCHMARK_FUNCS[name](z)


@functools.lru_cache(maxsize=None)
def benchmark_optimum(name: str) -> float:
    """Maximum of the negated benchmark, polished from the catalog optimizer."""
    d, lo, hi = BENCHMARK_BOXES[name]
    u0 = (_BENCHMARK_ARGMIN[name] - lo) / (hi - lo)
    res = minimize(
        lambda u: -benchmark_eval(name, u),
        u0,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000},
    )
    return float(max(-res.fun, benchmark_eval(name, u0)))


@dataclass
class Objective:
    """A maximization target over the unit cube or a finite grid inside it."""

    kind: str
    dim: int
    known_optimum: float | None = None
    grid: np.ndarray | None = None
    values: np.ndarray | None = None
    argmax_id: int | None = None
    name: str | None = None
    _row_index: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.grid is not None:
            self.grid = np.atleast_2d(np.asarray(self.grid, dtype=float))
            self.values = np.asarray(self.values, dtype=float)
            if self.values.shape != (self.grid.shape[0],):
                raise ValueError("values length must match the grid")
            self._row_index = {
                row.tobytes(): i for i, row in enumerate(np.ascontiguousarray(self.grid))
            }


def grid_points(levels: int, dim: int) -> np.ndarray:
    """Regular grid {1/L, 2/L, ..., 1}^dim flattened to (L^dim, dim) rows."""
    if levels < 1 or dim < 1:
        raise ValueError("levels and dim must be positive")
    axis = np.arange(1, levels + 1) / levels
    return np.array(list(itertools.product(axis, repeat=dim)), dtype=float)


def synthetic_gp(
    spec: KernelSpec,
    grid: np.ndarray,
    rng: np.random.Generator,
    method: str = "auto",
    rff_features: int = 4096,
) -> Objective:
    """Objective drawn from a zero-mean GP over a finite grid.

    Grids up to 2000 points get an exact joint draw; larger ones use a
    random-feature path by default (``method='exact'`` forces the dense
    factorization for verification runs).
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    M = grid.shape[0]
    if M < 1:
        raise ValueError("grid must be nonempty")
    if method not in ("auto", "exact", "rff"):
        raise ValueError("method must be auto, exact, or rff")
    exact = method == "exact" or (method == "auto" and M <= 2000)
    if exact:
        factor = _factor_psd(kernel_matrix(spec, grid))
        values = factor @ rng.standard_normal(M)
    else:
        fmap = build_feature_map(spec, rff_features, rng)
        w = rng.standard_normal(rff_features)
        values = np.empty(M)
        for start in range(0, M, 2048):
            block = grid[start : start + 2048]
            values[start : start + len(block)] = fmap.features(block) @ w
    best = int(np.argmax(values))
    return Objective(
        kind="synthetic_grid",
        dim=grid.shape[1],
        known_optimum=float(values[best]),
        grid=grid,
        values=values,
        argmax_id=best,
    )


def true_value(obj: Objective, x) -> float:
    """Noiseless objective value; grid objectives require an exact grid row."""
    x = np.asarray(x, dtype=float)
    if obj.kind == "analytic":
        return benchmark_eval(obj.name, x)
    key = np.ascontiguousarray(x).tobytes()
    idx = obj._row_index.get(key)
    if idx is None:
        raise ValueError("input is not a grid point of this objective")
    return float(obj.values[idx])


def observe(obj: Objective, x, noise_variance: float, rng: np.random.Generator) -> float:
    """f(x) plus Gaussian observation noise (none drawn when variance is 0)."""
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    y = true_value(obj, x)
    if noise_variance > 0:
        y += float(rng.normal(0.0, math.sqrt(noise_variance)))
    return y


def analytic_objective(name: str) -> Objective:
    d, _, _ = BENCHMARK_BOXES.get(name, (None, None, None))
    if d is None:
        raise ValueError(f"unknown benchmark {name!r}")
    return Objective(kind="analytic", dim=d, known_optimum=benchmark_optimum(name), name=name)


def load_tabular(path) -> Objective:
    """Read a grid objective from CSV: d input columns, one output, header row."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        if len(header) < 2:
            raise ValueError(f"{path}: need at least one input column and one output column")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValueError(f"{path}: row {lineno} has {len(row)} cells, expected {width}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ValueError(f"{path}: row {lineno} contains a non-numeric cell")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    grid, values = data[:, :-1], data[:, -1]
    seen = set()
    for i, row in enumerate(np.ascontiguousarray(grid)):
        key = row.tobytes()
        if key in seen:
            raise ValueError(f"{path}: duplicated grid row at data row {i + 2}")
        seen.add(key)
    return Objective(
        kind="tabular",
        dim=grid.shape[1],
        known_optimum=float(values.max()),
        grid=grid,
        values=values,
    )


def save_tabular(obj: Objective, path) -> None:
    """Write a grid objective in the ``load_tabular`` CSV format."""
    if obj.grid is None:
        raise ValueError("only grid objectives can be saved as tables")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{j + 1}" for j in range(obj.dim)] + ["y"])
        for row, val in zip(obj.grid, obj.values):
            writer.writerow([format(v, ".17g") for v in row] + [format(val, ".17g")])

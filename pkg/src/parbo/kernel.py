"""Covariance kernels, Gram matrices, and the variance-Lipschitz constant."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

FAMILIES = ("linear", "gaussian", "matern")

# Closed forms only; general nu would need Bessel-function evaluation.
SUPPORTED_NU = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with per-dimension lengthscales and an output variance.

    The linear kernel ignores ``lengthscales`` beyond using its length as the
    input dimension.  ``nu`` is only meaningful for the Matern family.
    An isotropic kernel is just a spec whose lengthscales are all equal.
    """

    family: str
    lengthscales: tuple[float, ...]
    output_variance: float = 1.0
    nu: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        if len(ls) == 0 or any(v <= 0 or not math.isfinite(v) for v in ls):
            raise ValueError("lengthscales must be positive and finite")
        if self.output_variance <= 0:
            raise ValueError("output_variance must be positive")
        if self.family == "matern":
            if self.nu is None or self.nu <= 0:
                raise ValueError("Matern kernel requires nu > 0")
            if self.nu not in SUPPORTED_NU:
                raise ValueError(f"Matern nu must be one of {SUPPORTED_NU}")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def isotropic_lengthscale(self) -> float:
        """Common lengthscale, or an error if the spec is anisotropic."""
        ls = self.lengthscales
        if any(v != ls[0] for v in ls):
            raise ValueError("requires an isotropic lengthscale")
        return ls[0]

    def to_dict(self) -> dict:
        out = {
            "family": self.family,
            "lengthscales": list(self.lengthscales),
            "variance": self.output_variance,
        }
        if self.nu is not None:
            out["nu"] = self.nu
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(
            family=d["family"],
            lengthscales=tuple(float(v) for v in d["lengthscales"]),
            output_variance=float(d.get("variance", 1.0)),
            nu=float(d["nu"]) if d.get("nu") is not None else None,
        )


def _check_points(spec: KernelSpec, X: np.ndarray, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.dim:
        raise ValueError(
            f"{name} has shape {X.shape}, expected (*, {spec.dim}) to match lengthscales"
        )
    return X


def _matern_from_r(r: np.ndarray, nu: float) -> np.ndarray:
    if nu == 0.5:
        return np.exp(-r)
    if nu == 1.5:
        a = math.sqrt(3.0) * r
        return (1.0 + a) * np.exp(-a)
    a = math.sqrt(5.0) * r
    return (1.0 + a + a * a / 3.0) * np.exp(-a)


def eval_kernel(spec: KernelSpec, x: np.ndarray, x2: np.ndarray) -> float:
    """Evaluate k(x, x2) for a single pair of points."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != (spec.dim,) or x2.shape != (spec.dim,):
        raise ValueError(
            f"inputs of shape {x.shape}, {x2.shape} do not match dimension {spec.dim}"
        )
    if spec.family == "linear":
        return spec.output_variance * float(np.dot(x, x2))
    delta = (x - x2) / np.asarray(spec.lengthscales)
    r2 = float(np.dot(delta, delta))
    if spec.family == "gaussian":
        return spec.output_variance * math.exp(-0.5 * r2)
    return spec.output_variance * float(_matern_from_r(np.sqrt(r2), spec.nu))


def kernel_cross(spec: KernelSpec, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Cross-covariance matrix k(X, X2) of shape (n, m)."""
    X = _check_points(spec, X, "X")
    X2 = _check_points(spec, X2, "X2")
    if X.shape[0] == 0 or X2.shape[0] == 0:
        return np.zeros((X.shape[0], X2.shape[0]))
    if spec.family == "linear":
        return spec.output_variance * (X @ X2.T)
    ls = np.asarray(spec.lengthscales)
    d2 = cdist(X / ls, X2 / ls, metric="sqeuclidean")
    if spec.family == "gaussian":
        return spec.output_variance * np.exp(-0.5 * d2)
    return spec.output_variance * _matern_from_r(np.sqrt(d2), spec.nu)


def kernel_matrix(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    """Symmetric Gram matrix over the rows of X."""
    K = kernel_cross(spec, X, X)
    if spec.family == "linear" and K.size:
        # BLAS products are not guaranteed bit-symmetric; the stationary
        # families come out symmetric from cdist already.
        K = 0.5 * (K + K.T)
    return K


def kernel_diag(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    """Vector of k(x, x) over the rows of X."""
    X = _check_points(spec, X, "X")
    if spec.family == "linear":
        return spec.output_variance * np.einsum("ij,ij->i", X, X)
    return np.full(X.shape[0], spec.output_variance)


def lipschitz_sigma(spec: KernelSpec) -> float:
    """Lipschitz constant of the posterior standard deviation.

    Defined for the linear kernel, isotropic Gaussian kernels, and isotropic
    Matern kernels with nu > 1.
    """
    if spec.family == "linear":
        return 1.0
    ell = spec.isotropic_lengthscale()
    if spec.family == "gaussian":
        return math.sqrt(2.0) / ell
    if spec.nu <= 1.0:
        raise ValueError("Matern variance-Lipschitz constant needs nu > 1")
    return (math.sqrt(2.0) / ell) * math.sqrt(spec.nu / (spec.nu - 1.0))

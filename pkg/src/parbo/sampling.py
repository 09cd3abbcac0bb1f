"""Posterior sample paths.

Two representations: exact joint Gaussian draws over a finite candidate set,
and random-Fourier-feature pathwise draws (a prior feature-space path plus an
exact data-fit correction through the GP solve) that can be evaluated
anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .gp import GpModel, model_fingerprint, posterior_cov, posterior_mean
from .kernel import KernelSpec, kernel_cross


def _factor_psd(cov: np.ndarray) -> np.ndarray:
    """Factor F with cov = F F^T for a (numerically) PSD matrix.

    Cholesky first; on failure fall back to an eigendecomposition with
    negative eigenvalues clamped to zero, which keeps degenerate directions
    (e.g. candidates coinciding with noiseless training points) exactly
    degenerate instead of inflating them with jitter.
    """
    if cov.shape[0] == 0:
        return cov.copy()
    try:
        return cholesky(cov, lower=True)
    except LinAlgError:
        w, U = np.linalg.eigh(cov)
        if not np.all(np.isfinite(w)):
            raise LinAlgError("covariance factorization failed: non-finite eigenvalues")
        return U * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class FeatureMap:
    """Random trigonometric features approximating a Gaussian kernel."""

    frequencies: np.ndarray  # (m, d)
    phases: np.ndarray  # (m,)
    scale: float

    def features(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.scale * np.cos(X @ self.frequencies.T + self.phases)


@dataclass(frozen=True)
class DiscreteSample:
    """Joint draw over a fixed candidate set; defined only on those rows."""

    candidates: np.ndarray
    values: np.ndarray
    source_model_fingerprint: str

    def values_at(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape != self.candidates.shape or not np.array_equal(X, self.candidates):
            raise ValueError("discrete sample is only defined on its original candidate set")
        return self.values


@dataclass(frozen=True)
class RffPathSample:
    """Pathwise draw: feature-space prior path plus exact data correction."""

    feature_map: FeatureMap
    prior_weights: np.ndarray  # (m,)
    correction_weights: np.ndarray  # (n,)
    train_inputs: np.ndarray  # (n, d)
    spec: KernelSpec
    source_model_fingerprint: str

    def values_at(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        vals = self.feature_map.features(X) @ self.prior_weights
        if self.train_inputs.shape[0]:
            vals = vals + kernel_cross(self.spec, self.train_inputs, X).T @ self.correction_weights
        return vals


PosteriorSample = DiscreteSample | RffPathSample


def sample_path_discrete(model: GpModel, candidates: np.ndarray, rng: np.random.Generator) -> DiscreteSample:
    """Exact joint posterior draw over the rows of ``candidates``."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] < 1:
        raise ValueError("need at least one candidate")
    mu = np.atleast_1d(posterior_mean(model, candidates))
    cov = posterior_cov(model, candidates)
    factor = _factor_psd(cov)
    z = rng.standard_normal(candidates.shape[0])
    return DiscreteSample(candidates.copy(), mu + factor @ z, model_fingerprint(model))


def build_feature_map(spec: KernelSpec, m: int, rng: np.random.Generator) -> FeatureMap:
    """Draw m random Fourier features for a Gaussian kernel.

    Frequencies follow the kernel's spectral density (per-dimension scale
    1/lengthscale), phases are uniform on [0, 2*pi), and the amplitude makes
    phi(x)^T phi(x2) an unbiased estimate of k(x, x2).
    """
    if spec.family != "gaussian":
        raise ValueError("random Fourier features are only supported for the Gaussian family")
    if m < 1:
        raise ValueError("need at least one feature")
    freqs = rng.standard_normal((m, spec.dim)) / np.asarray(spec.lengthscales)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=m)
    scale = math.sqrt(2.0 * spec.output_variance / m)
    return FeatureMap(freqs, phases, scale)


def sample_path_rff(model: GpModel, fmap: FeatureMap, rng: np.random.Generator) -> RffPathSample:
    """Pathwise posterior draw evaluable at arbitrary points.

    Draws a feature-space prior path, then corrects it through the exact GP
    solve so the path interpolates the data up to noise: the correction
    weights are (K + noise I)^{-1} (y - prior(X) - eps) with fresh noise eps.
    """
    m = fmap.frequencies.shape[0]
    w = rng.standard_normal(m)
    X = model.data.inputs
    if model.data.n == 0:
        v = np.zeros(0)
    else:
        prior_at_train = fmap.features(X) @ w
        resid = model.data.outputs - prior_at_train
        if model.noise_variance > 0:
            resid = resid - rng.normal(0.0, math.sqrt(model.noise_variance), size=model.data.n)
        v = solve_triangular(model.chol.T, solve_triangular(model.chol, resid, lower=True), lower=False)
    return RffPathSample(fmap, w, v, X.copy(), model.spec, model_fingerprint(model))


def sample_max(sample: PosteriorSample, candidates: np.ndarray) -> tuple[int, float]:
    """Index and value of the sample's maximum over the candidate rows.

    Ties break toward the lowest candidate index.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] < 1:
        raise ValueError("need at least one candidate")
    values = sample.values_at(candidates)
    idx = int(np.argmax(values))
    return idx, float(values[idx])

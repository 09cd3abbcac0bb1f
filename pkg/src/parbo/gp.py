"""Exact Gaussian-process regression with incremental fantasy conditioning.

A fitted model stores the lower Cholesky factor of K + (noise + jitter) I and
the solved weight vector, so posterior queries cost O(n) per point and
appending fantasy observations is a rank-m factor extension instead of a
refit from scratch.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .kernel import KernelSpec, kernel_cross, kernel_diag, kernel_matrix

# Escalation ladder used when the noiseless Gram matrix is too ill-conditioned
# to factor; the jitter actually applied is recorded on the model.
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class Dataset:
    """Observed input-output pairs with global iteration labels.

    ``index_labels`` track which optimization iterations produced each row
    (initial-design rows use nonpositive labels) and must be strictly
    increasing.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    index_labels: np.ndarray

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        outputs = np.asarray(self.outputs, dtype=float)
        labels = np.asarray(self.index_labels, dtype=int)
        if inputs.ndim != 2:
            raise ValueError("inputs must be a 2-D array of shape (n, d)")
        if outputs.shape != (inputs.shape[0],) or labels.shape != (inputs.shape[0],):
            raise ValueError("inputs, outputs and index_labels must have matching length")
        if labels.size > 1 and not np.all(np.diff(labels) > 0):
            raise ValueError("index_labels must be strictly increasing")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "index_labels", labels)

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros(0, dtype=int))

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def extended(self, inputs, outputs, labels) -> "Dataset":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        return Dataset(
            np.vstack([self.inputs, inputs]),
            np.concatenate([self.outputs, np.atleast_1d(np.asarray(outputs, dtype=float))]),
            np.concatenate([self.index_labels, np.atleast_1d(np.asarray(labels, dtype=int))]),
        )


@dataclass(frozen=True)
class GpModel:
    """Immutable fitted posterior: dataset, noise level, and factorization."""

    spec: KernelSpec
    noise_variance: float
    data: Dataset
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0


def _solve_chol(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(L.T, solve_triangular(L, b, lower=True), lower=False)


def fit(spec: KernelSpec, noise_variance: float, data: Dataset) -> GpModel:
    """Fit an exact GP posterior, escalating diagonal jitter if needed."""
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    if data.n and data.dim != spec.dim:
        raise ValueError("dataset dimension does not match kernel spec")
    if data.n == 0:
        return GpModel(spec, noise_variance, data, np.zeros((0, 0)), np.zeros(0))
    K = kernel_matrix(spec, data.inputs)
    for jitter in JITTER_LADDER:
        try:
            L = cholesky(K + (noise_variance + jitter) * np.eye(data.n), lower=True)
        except LinAlgError:
            continue
        alpha = _solve_chol(L, data.outputs)
        return GpModel(spec, noise_variance, data, L, alpha, jitter)
    raise LinAlgError(
        "covariance matrix is too ill-conditioned to factor even with "
        f"jitter up to {JITTER_LADDER[-1]:g} (n={data.n}, noise={noise_variance:g})"
    )


def _as_batch(model: GpModel, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.spec.dim:
        raise ValueError(f"input dimension {X.shape[1]} does not match kernel ({model.spec.dim})")
    return X, single


def posterior_mean(model: GpModel, x):
    """Posterior mean at a point (float) or at rows of a matrix (vector)."""
    X, single = _as_batch(model, x)
    if model.data.n == 0:
        mean = np.zeros(X.shape[0])
    else:
        kx = kernel_cross(model.spec, model.data.inputs, X)
        mean = kx.T @ model.alpha
    return float(mean[0]) if single else mean


def posterior_var(model: GpModel, x):
    """Posterior variance, clamped to [0, k(x, x)]."""
    X, single = _as_batch(model, x)
    prior = kernel_diag(model.spec, X)
    if model.data.n == 0:
        var = prior.copy()
    else:
        kx = kernel_cross(model.spec, model.data.inputs, X)
        v = solve_triangular(model.chol, kx, lower=True)
        var = prior - np.einsum("ij,ij->j", v, v)
        var = np.clip(var, 0.0, prior)
    return float(var[0]) if single else var


def posterior_cov(model: GpModel, X: np.ndarray) -> np.ndarray:
    """Joint posterior covariance over the rows of X (symmetrized)."""
    X, _ = _as_batch(model, np.atleast_2d(X))
    K = kernel_matrix(model.spec, X)
    if model.data.n:
        kx = kernel_cross(model.spec, model.data.inputs, X)
        v = solve_triangular(model.chol, kx, lower=True)
        K = K - v.T @ v
    return 0.5 * (K + K.T)


def condition_fantasy(model: GpModel, new_inputs, new_outputs, new_labels=None) -> GpModel:
    """Return the posterior conditioned on m extra (possibly imputed) rows.

    Equivalent to refitting on the concatenated dataset but costs
    O(n * m * (n + m)) by extending the existing Cholesky factor.  Labels for
    the new rows default to continuing past the current maximum so the
    dataset invariant holds regardless of the callers' bookkeeping.
    """
    new_inputs = np.atleast_2d(np.asarray(new_inputs, dtype=float))
    new_outputs = np.atleast_1d(np.asarray(new_outputs, dtype=float))
    m = new_inputs.shape[0]
    if m < 1:
        raise ValueError("condition_fantasy needs at least one new row")
    if new_labels is None:
        start = int(model.data.index_labels.max()) + 1 if model.data.n else 1
        new_labels = np.arange(start, start + m)
    data = model.data.extended(new_inputs, new_outputs, new_labels)
    if model.data.n == 0:
        return fit(model.spec, model.noise_variance, data)
    diag = model.noise_variance + model.jitter
    k_on = kernel_cross(model.spec, model.data.inputs, new_inputs)
    B = solve_triangular(model.chol, k_on, lower=True)
    S = kernel_matrix(model.spec, new_inputs) + diag * np.eye(m) - B.T @ B
    try:
        L_s = cholesky(0.5 * (S + S.T), lower=True)
    except LinAlgError:
        # Schur complement lost definiteness; fall back to a full refit,
        # which re-runs the jitter ladder.
        return fit(model.spec, model.noise_variance, data)
    n = model.data.n
    L = np.zeros((n + m, n + m))
    L[:n, :n] = model.chol
    L[n:, :n] = B.T
    L[n:, n:] = L_s
    alpha = _solve_chol(L, data.outputs)
    return GpModel(model.spec, model.noise_variance, data, L, alpha, model.jitter)


def log_marginal_likelihood(model: GpModel) -> float:
    """Log p(y | X, spec, noise) for the fitted model."""
    n = model.data.n
    if n < 1:
        raise ValueError("log marginal likelihood needs at least one observation")
    return float(
        -0.5 * model.data.outputs @ model.alpha
        - np.sum(np.log(np.diag(model.chol)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def model_fingerprint(model: GpModel) -> str:
    """Stable short hash of the model state, for tagging derived samples."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(model.spec).encode())
    h.update(np.float64(model.noise_variance).tobytes())
    h.update(np.float64(model.jitter).tobytes())
    h.update(np.ascontiguousarray(model.data.inputs).tobytes())
    h.update(np.ascontiguousarray(model.data.outputs).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class HyperSearchConfig:
    """Settings for marginal-likelihood hyperparameter search.

    The search runs coordinate-wise golden-section refinement in log space
    from ``n_starts`` log-uniform starting points.  ``initial_spec``, when
    given, is prepended to the start list (counting toward ``n_starts``).
    """

    noise_variance: float = 1e-8
    n_starts: int = 16
    seed: int = 0
    lengthscale_bounds: tuple[float, float] = (1e-2, 1e1)
    variance_bounds: tuple[float, float] = (1e-6, 1e6)
    sweeps: int = 2
    golden_iters: int = 18
    initial_spec: KernelSpec | None = None


def _golden_max(f, a: float, b: float, iters: int) -> tuple[float, float]:
    """Golden-section maximization on [a, b]; returns the best point seen."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    best = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
            if fc > best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
            if fd > best[1]:
                best = (d, fd)
    return best


def fit_hyperparameters(data: Dataset, search: HyperSearchConfig = HyperSearchConfig()) -> KernelSpec:
    """Pick Gaussian-kernel lengthscales and variance by maximizing the LML.

    Deterministic given ``search.seed``.  Raises if every candidate fails to
    factor.
    """
    if data.n < 2:
        raise ValueError("hyperparameter fitting needs at least two observations")
    d = data.dim
    log_lo = np.array([math.log(search.lengthscale_bounds[0])] * d + [math.log(search.variance_bounds[0])])
    log_hi = np.array([math.log(search.lengthscale_bounds[1])] * d + [math.log(search.variance_bounds[1])])

    def lml(theta: np.ndarray) -> float:
        spec = KernelSpec("gaussian", tuple(np.exp(theta[:d])), float(np.exp(theta[d])))
        try:
            return log_marginal_likelihood(fit(spec, search.noise_variance, data))
        except LinAlgError:
            return -np.inf

    rng = np.random.default_rng(search.seed)
    starts = []
    if search.initial_spec is not None:
        init = search.initial_spec
        if init.family != "gaussian" or init.dim != d:
            raise ValueError("initial_spec must be a Gaussian kernel of matching dimension")
        starts.append(np.log(np.array(list(init.lengthscales) + [init.output_variance])))
    while len(starts) < search.n_starts:
        starts.append(rng.uniform(log_lo, log_hi))

    best_theta, best_val = None, -np.inf
    for theta0 in starts:
        theta = np.array(theta0, dtype=float)
        val = lml(theta)
        if val > best_val:
            best_theta, best_val = theta.copy(), val
        for _ in range(search.sweeps):
            for j in range(d + 1):
                def along(v, j=j):
                    t = theta.copy()
                    t[j] = v
                    return lml(t)

                xj, vj = _golden_max(along, log_lo[j], log_hi[j], search.golden_iters)
                if vj > val:
                    theta[j], val = xj, vj
                if val > best_val:
                    best_theta, best_val = theta.copy(), val
    if best_theta is None or not np.isfinite(best_val):
        raise LinAlgError("all hyperparameter candidates failed to factor")
    return KernelSpec("gaussian", tuple(np.exp(best_theta[:d])), float(np.exp(best_theta[d])))

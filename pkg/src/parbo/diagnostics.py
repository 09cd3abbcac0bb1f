"""Executable theory checks and benchmarking metrics.

Information-gain identities, greedy maximum-information-gain estimates, the
cumulative-regret bound constants, the pending-variance ratio, normal-tail
bounds, and trace aggregation for regret curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cholesky
from scipy.special import ndtr

from .acquisition import BetaSchedule, beta_value
from .gp import Dataset, GpModel, condition_fantasy, fit, posterior_var
from .kernel import KernelSpec

CONDITION_METHODS = ("ucb", "irgp_ucb", "pims", "eims", "ts")


@dataclass(frozen=True)
class RegretRecord:
    """One evaluated input: identity, observation, and running regret."""

    t: int
    batch: int
    x: np.ndarray
    y: float
    best_so_far: float
    simple_regret: float | None


@dataclass(frozen=True)
class Trace:
    """Per-iteration records of a single optimization trial."""

    records: list[RegretRecord]

    def __len__(self) -> int:
        return len(self.records)


def information_gain(K: np.ndarray, noise_variance: float) -> float:
    """Mutual information 0.5 log det(I + K / noise) between y and f."""
    if noise_variance <= 0:
        raise ValueError("noise_variance must be positive")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.size == 0:
        return 0.0
    A = np.eye(K.shape[0]) + K / noise_variance
    try:
        L = cholesky(A, lower=True)
    except LinAlgError as exc:
        raise LinAlgError(f"information gain factorization failed: {exc}")
    return float(np.sum(np.log(np.diag(L))))


def greedy_mig(
    spec: KernelSpec, candidates: np.ndarray, T: int, noise_variance: float
) -> float:
    """Greedy lower bound on the maximum information gain over T points.

    Iteratively picks the not-yet-chosen candidate with the largest current
    posterior variance (conditioning on the picks with dummy observations;
    variance does not depend on the values) and sums the per-step gains.
    Selection is without replacement so T equal to the candidate count
    recovers the full log-determinant value.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if not 1 <= T <= candidates.shape[0]:
        raise ValueError("need 1 <= T <= number of candidates")
    if noise_variance <= 0:
        raise ValueError("noise_variance must be positive")
    model = fit(spec, noise_variance, Dataset.empty(candidates.shape[1]))
    remaining = np.ones(candidates.shape[0], dtype=bool)
    total = 0.0
    for _ in range(T):
        var = np.atleast_1d(posterior_var(model, candidates))
        var[~remaining] = -np.inf
        j = int(np.argmax(var))
        remaining[j] = False
        total += 0.5 * math.log(1.0 + var[j] / noise_variance)
        model = condition_fantasy(model, candidates[j][None, :], [0.0])
    return total


@dataclass(frozen=True)
class ConditionConstants:
    """Per-round constants (zeta_t, xi_t) certifying a base rule's regret."""

    method: str
    zeta: Callable[[int], float]
    xi: Callable[[int], float]


def condition_constants(
    method: str,
    domain_size: int,
    beta_schedule: BetaSchedule | None = None,
    noise_variance: float | None = None,
) -> ConditionConstants:
    """Finite-domain constants for the supported base selection rules."""
    if method not in CONDITION_METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {CONDITION_METHODS}")
    if domain_size < 1:
        raise ValueError("domain_size must be positive")
    c2 = 2.0 + 2.0 * math.log(domain_size / 2.0)
    if method == "ucb":
        if beta_schedule is None:
            raise ValueError("ucb constants need a beta schedule")
        if beta_schedule.kind == "irgp_random":
            raise ValueError("use method='irgp_ucb' for the randomized schedule")

        def zeta(t: int) -> float:
            return beta_value(beta_schedule, t)

        def xi(t: int) -> float:
            return domain_size / math.sqrt(2.0 * math.pi) * math.exp(-beta_value(beta_schedule, t) / 2.0)

        return ConditionConstants(method, zeta, xi)
    if method == "eims":
        if noise_variance is None or noise_variance <= 0:
            raise ValueError("eims constants need a positive noise_variance")

        def zeta(t: int) -> float:
            return math.log((noise_variance + t - 1) / noise_variance) + c2 + math.sqrt(2.0 * math.pi * c2)

        return ConditionConstants(method, zeta, lambda t: 0.0)
    # irgp_ucb, pims, and ts share the same finite-domain constants
    return ConditionConstants(method, lambda t: c2, lambda t: 0.0)


def bcr_bound(
    gamma_T: float, constants: ConditionConstants, T: int, noise_variance: float
) -> float:
    """Cumulative-regret bound sqrt(C1 gamma_T sum zeta_t) + sum xi_t."""
    if T < 1:
        raise ValueError("T must be >= 1")
    c1 = 2.0 / math.log(1.0 + 1.0 / noise_variance)
    sum_zeta = sum(constants.zeta(t) for t in range(1, T + 1))
    sum_xi = sum(constants.xi(t) for t in range(1, T + 1))
    return math.sqrt(c1 * gamma_T * sum_zeta) + sum_xi


def variance_ratio(obs_model: GpModel, full_model: GpModel, x) -> float:
    """Posterior-variance ratio between a lagged and a fully updated model.

    Callers compare against (Q + noise) / noise where Q is the number of
    extra rows in the full model.
    """
    if full_model.data.n < obs_model.data.n:
        raise ValueError("full_model must extend obs_model")
    num = posterior_var(obs_model, x)
    den = posterior_var(full_model, x)
    if den <= 0:
        raise ValueError("fully updated posterior variance is zero at this input")
    return float(num / den)


def normal_tail_check(c: float) -> tuple[float, float]:
    """Exact standard-normal survival value and its exp bound at c > 0."""
    if c <= 0:
        raise ValueError("c must be positive")
    exact = float(ndtr(-c))
    bound = 0.5 * math.exp(-0.5 * c * c)
    return exact, bound


def aggregate_traces(traces: list[Trace], f_stars: list[float | None]) -> list[tuple[int, float, float, int]]:
    """Per-batch mean and standard error across trials.

    With known optima the aggregated measure is the simple regret at each
    batch boundary; with ``f_stars`` all None it is the best value so far.
    Returns rows (batch, mean, stderr, n_trials).
    """
    if not traces:
        raise ValueError("need at least one trace")
    if len(f_stars) != len(traces):
        raise ValueError("need one f_star entry per trace")
    known = [f is not None for f in f_stars]
    if any(known) and not all(known):
        raise ValueError("f_stars must be all known or all unknown")

    per_trace = []
    batch_keys = None
    for trace, f_star in zip(traces, f_stars):
        ends: dict[int, RegretRecord] = {}
        for rec in trace.records:
            cur = ends.get(rec.batch)
            if cur is None or rec.t > cur.t:
                ends[rec.batch] = rec
        keys = tuple(sorted(ends))
        if batch_keys is None:
            batch_keys = keys
        elif keys != batch_keys:
            raise ValueError("traces cover different batch ranges")
        if f_star is None:
            per_trace.append([ends[b].best_so_far for b in keys])
        else:
            per_trace.append([f_star - ends[b].best_so_far for b in keys])

    values = np.asarray(per_trace)  # (trials, batches)
    n = values.shape[0]
    means = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(values.shape[1])
    return [
        (int(b), float(m), float(s), n) for b, m, s in zip(batch_keys, means, stderr)
    ]

"""Scalar acquisition functions, confidence-width schedules, and argmax."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .gp import GpModel, posterior_mean, posterior_var

BETA_KINDS = ("theoretical_finite", "heuristic", "irgp_random", "fixed")


@dataclass(frozen=True)
class BetaSchedule:
    """Confidence-width schedule for UCB-style rules.

    kinds:
      theoretical_finite  2 log(|X| t^2 / sqrt(2 pi)), needs domain_size
      heuristic           0.2 d log(2 t), needs dim
      irgp_random         2 log(|X|/2) plus an exponential draw of mean 2
      fixed               a constant
    """

    kind: str
    domain_size: int | None = None
    dim: int | None = None
    value: float | None = None

    def __post_init__(self):
        if self.kind not in BETA_KINDS:
            raise ValueError(f"unknown beta schedule kind {self.kind!r}")
        if self.kind in ("theoretical_finite", "irgp_random"):
            if self.domain_size is None or self.domain_size < 1:
                raise ValueError(f"{self.kind} schedule needs a positive domain_size")
        if self.kind == "heuristic" and (self.dim is None or self.dim < 1):
            raise ValueError("heuristic schedule needs a positive dim")
        if self.kind == "fixed" and (self.value is None or self.value < 0):
            raise ValueError("fixed schedule needs a nonnegative value")


def beta_value(schedule: BetaSchedule, t: int, rng: np.random.Generator | None = None) -> float:
    """Evaluate the schedule at iteration t >= 1."""
    if t < 1:
        raise ValueError("iteration index must be >= 1")
    if schedule.kind == "theoretical_finite":
        return 2.0 * math.log(schedule.domain_size * t * t / math.sqrt(2.0 * math.pi))
    if schedule.kind == "heuristic":
        return 0.2 * schedule.dim * math.log(2.0 * t)
    if schedule.kind == "irgp_random":
        if rng is None:
            raise ValueError("irgp_random schedule needs a generator")
        return 2.0 * math.log(schedule.domain_size / 2.0) + float(rng.exponential(2.0))
    return float(schedule.value)


def _norm_pdf(s):
    return np.exp(-0.5 * np.square(s)) / math.sqrt(2.0 * math.pi)


def ei_from_moments(mu, sigma, tau: float):
    """Expected improvement over tau for a Gaussian with given moments.

    With sigma == 0 the closed form degenerates to max(mu - tau, 0).
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (mu - tau) / sigma
        ei = sigma * (s * ndtr(s) + _norm_pdf(s))
    out = np.where(sigma > 0, ei, np.maximum(mu - tau, 0.0))
    return float(out) if out.ndim == 0 else out


def pims_from_moments(mu, sigma, gstar: float):
    """P(f(x) > gstar) under a Gaussian with given moments, in [0, 1]."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        # ndtr(-z) rather than 1 - ndtr(z) keeps precision in the tail
        val = ndtr((mu - gstar) / sigma)
    out = np.where(sigma > 0, val, (mu >= gstar).astype(float))
    return float(out) if out.ndim == 0 else out


def ucb(model: GpModel, x, beta: float):
    """mu(x) + sqrt(beta) * sigma(x); accepts a point or a batch of rows."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return posterior_mean(model, x) + math.sqrt(beta) * np.sqrt(posterior_var(model, x))


def ei_threshold(model: GpModel, x, tau: float):
    """Expected improvement of f(x) over the threshold tau."""
    return ei_from_moments(posterior_mean(model, x), np.sqrt(posterior_var(model, x)), tau)


def pims(model: GpModel, x, gstar: float):
    """Probability of improvement over a sampled-path maximum gstar."""
    return pims_from_moments(posterior_mean(model, x), np.sqrt(posterior_var(model, x)), gstar)


def argmax_over(af, candidates: np.ndarray) -> int:
    """Lowest-index maximizer of a vectorized acquisition over candidate rows.

    ``af`` must map an (M, d) matrix to a length-M vector.  Any NaN value is
    an error: it means the acquisition itself is broken.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] < 1:
        raise ValueError("need at least one candidate")
    values = np.asarray(af(candidates), dtype=float)
    if values.shape != (candidates.shape[0],):
        raise ValueError(f"acquisition returned shape {values.shape}, expected ({candidates.shape[0]},)")
    if np.isnan(values).any():
        raise ValueError("acquisition returned NaN")
    return int(np.argmax(values))

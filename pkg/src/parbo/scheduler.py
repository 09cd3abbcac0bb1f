"""Parallel point-selection strategies and worker-loop simulators.

Strategies select one input at a time while up to Q earlier queries are still
being evaluated.  The believer-style strategies condition the model on
imputed observations at those pending inputs; the randomized variant imputes
values of one posterior sample path (plus fresh observation noise) instead of
the posterior mean, which keeps the fantasized dataset distributed like a
real one.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .acquisition import (
    BetaSchedule,
    beta_value,
    ei_from_moments,
    ei_threshold,
    pims,
    pims_from_moments,
    ucb,
)
from .design import lhs, nearest_grid
from .diagnostics import RegretRecord, Trace, variance_ratio
from .gp import (
    Dataset,
    GpModel,
    HyperSearchConfig,
    condition_fantasy,
    fit,
    fit_hyperparameters,
    posterior_mean,
    posterior_var,
)
from .kernel import KernelSpec, kernel_cross, kernel_diag, kernel_matrix
from .objectives import Objective, observe, true_value
from .sampling import (
    _factor_psd,
    build_feature_map,
    sample_max,
    sample_path_discrete,
    sample_path_rff,
)

STRATEGY_KINDS = ("rkb", "kb", "bucb", "pts", "us", "rs")
BASE_AFS = ("ucb", "ei", "pims")


@dataclass(frozen=True)
class Strategy:
    """A parallel selection rule, possibly wrapping a base acquisition.

    ``path_sampler`` picks how posterior sample paths are drawn: "exact"
    joint draws on the needed points, or "rff" feature-space paths (cheaper
    when paths must be evaluated on large fresh candidate pools).
    """

    kind: str
    base_af: str | None = None
    beta: BetaSchedule | None = None
    path_sampler: str = "exact"
    rff_features: int = 1024

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind in ("rkb", "kb"):
            if self.base_af not in BASE_AFS:
                raise ValueError(f"{self.kind} needs a base acquisition from {BASE_AFS}")
            if self.base_af == "ucb" and self.beta is None:
                raise ValueError("ucb base needs a beta schedule")
        if self.kind == "bucb" and self.beta is None:
            raise ValueError("bucb needs a beta schedule")
        if self.path_sampler not in ("exact", "rff"):
            raise ValueError("path_sampler must be 'exact' or 'rff'")

    @property
    def name(self) -> str:
        if self.kind in ("rkb", "kb"):
            return f"{self.kind.upper()}-{self.base_af.upper()}"
        return self.kind.upper()

    @classmethod
    def parse(cls, name: str, beta: BetaSchedule | None = None, path_sampler: str = "exact", rff_features: int = 1024) -> "Strategy":
        parts = name.strip().lower().replace("_", "-").split("-")
        kind = parts[0]
        base = parts[1] if len(parts) > 1 else None
        return cls(kind=kind, base_af=base, beta=beta, path_sampler=path_sampler, rff_features=rff_features)


@dataclass
class SchedulerState:
    """Everything a selection call sees: data, pending inputs, and the model.

    ``candidates`` is the pool the acquisition is maximized over (the full
    grid for finite domains, a fresh random pool for continuous ones);
    ``continuous`` switches on local refinement of the pool maximizer.
    """

    observed: Dataset
    pending_inputs: np.ndarray
    pending_labels: list[int]
    t: int
    capacity_q: int
    model: GpModel
    candidates: np.ndarray
    continuous: bool = False

    def __post_init__(self):
        self.pending_inputs = np.asarray(self.pending_inputs, dtype=float).reshape(
            -1, self.observed.dim
        )
        p = self.pending_inputs.shape[0]
        if p > self.capacity_q:
            raise ValueError(f"{p} pending inputs exceed capacity Q={self.capacity_q}")
        if len(self.pending_labels) != p:
            raise ValueError("pending_labels must match pending_inputs")
        iteration_labels = set(int(v) for v in self.observed.index_labels if v > 0)
        expected = set(range(1, self.t))
        if iteration_labels | set(self.pending_labels) != expected or (
            iteration_labels & set(self.pending_labels)
        ):
            raise ValueError("observed and pending labels must partition 1..t-1")

    @property
    def n_pending(self) -> int:
        return self.pending_inputs.shape[0]


class GridCache:
    """Precomputed prior structure over a fixed candidate grid.

    Holds the Gram matrix and one prior factorization so that posterior
    moments over the whole grid are matrix slices and a joint posterior draw
    is a prior path plus a data correction through the model's solve.  All
    shortcuts are exact as long as every training row is a grid row; anything
    else falls back to fresh kernel evaluations.
    """

    def __init__(self, spec: KernelSpec, grid: np.ndarray):
        self.spec = spec
        self.grid = np.ascontiguousarray(grid, dtype=float)
        self.K = kernel_matrix(spec, self.grid)
        self.diag = kernel_diag(spec, self.grid)
        self.prior_factor = _factor_psd(self.K)
        self._index = {row.tobytes(): i for i, row in enumerate(self.grid)}

    def _ids(self, X: np.ndarray) -> np.ndarray | None:
        ids = []
        for row in np.ascontiguousarray(X, dtype=float):
            i = self._index.get(row.tobytes())
            if i is None:
                return None
            ids.append(i)
        return np.asarray(ids, dtype=int)

    def cross(self, X: np.ndarray) -> np.ndarray:
        """k(X, grid) of shape (n, M)."""
        ids = self._ids(X)
        if ids is None:
            return kernel_cross(self.spec, X, self.grid)
        return self.K[ids]

    def moments(self, model: GpModel) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance vectors over the grid.

        Mirrors posterior_mean / posterior_var expression for expression so
        cached and direct evaluations agree bitwise.
        """
        if model.data.n == 0:
            return np.zeros(self.grid.shape[0]), self.diag.copy()
        kx = self.cross(model.data.inputs)
        mean = kx.T @ model.alpha
        v = solve_triangular(model.chol, kx, lower=True)
        var = np.clip(self.diag - np.einsum("ij,ij->j", v, v), 0.0, self.diag)
        return mean, var

    def draw(self, model: GpModel, rng) -> np.ndarray:
        """Exact joint posterior draw over the grid.

        A prior path from the cached factor is corrected through the model's
        factorization; the resulting joint law is the exact posterior over
        the grid (matching the dense construction in sample_path_discrete).
        """
        f_prior = self.prior_factor @ rng.standard_normal(self.grid.shape[0])
        if model.data.n == 0:
            return f_prior
        ids = self._ids(model.data.inputs)
        prior_at_train = (
            f_prior[ids] if ids is not None else np.zeros(model.data.n)
        )
        if ids is None:
            # training rows off the grid: no shortcut, draw the dense way
            return sample_path_discrete(model, self.grid, rng).values
        resid = model.data.outputs - prior_at_train
        if model.noise_variance > 0:
            resid = resid - rng.normal(0.0, math.sqrt(model.noise_variance), model.data.n)
        w = solve_triangular(
            model.chol.T, solve_triangular(model.chol, resid, lower=True), lower=False
        )
        return f_prior + w @ self.cross(model.data.inputs)


def _path_values(model: GpModel, X: np.ndarray, rng, sampler: str, rff_features: int) -> np.ndarray:
    """Values of one fresh posterior sample path at the rows of X."""
    if sampler == "rff":
        fmap = build_feature_map(model.spec, rff_features, rng)
        return sample_path_rff(model, fmap, rng).values_at(X)
    return sample_path_discrete(model, X, rng).values


def _rkb_fantasy(state: SchedulerState, rng, sampler: str, rff_features: int) -> GpModel:
    if state.n_pending == 0:
        return state.model
    g = _path_values(state.model, state.pending_inputs, rng, sampler, rff_features)
    y = np.asarray(g, dtype=float)
    nv = state.model.noise_variance
    if nv > 0:
        y = y + rng.normal(0.0, math.sqrt(nv), size=state.n_pending)
    return condition_fantasy(state.model, state.pending_inputs, y)


def _kb_fantasy(state: SchedulerState) -> GpModel:
    if state.n_pending == 0:
        return state.model
    y = np.atleast_1d(posterior_mean(state.model, state.pending_inputs))
    return condition_fantasy(state.model, state.pending_inputs, y)


def _maximize(af, candidates: np.ndarray, refine: bool) -> np.ndarray:
    """Return the best input: pool argmax, plus coordinate refinement if asked."""
    values = np.asarray(af(candidates), dtype=float)
    if np.isnan(values).any():
        raise ValueError("acquisition returned NaN")
    order = np.argsort(-values)
    best_x = candidates[int(order[0])].copy()
    best_v = float(values[int(order[0])])
    if not refine:
        return best_x
    for idx in order[:5]:
        x = candidates[int(idx)].copy()
        v = float(values[int(idx)])
        step = 0.1
        for _ in range(20):
            improved = False
            for j in range(x.size):
                proposals = np.tile(x, (2, 1))
                proposals[0, j] = min(1.0, x[j] + step)
                proposals[1, j] = max(0.0, x[j] - step)
                pv = np.asarray(af(proposals), dtype=float)
                k = int(np.argmax(pv))
                if pv[k] > v:
                    x, v = proposals[k].copy(), float(pv[k])
                    improved = True
            if not improved:
                step *= 0.5
        if v > best_v:
            best_x, best_v = x, v
    return best_x


def _base_af_argmax(
    fantasy: GpModel,
    base_af: str,
    state: SchedulerState,
    rng,
    beta: BetaSchedule | None,
    sampler: str,
    rff_features: int,
    cache: GridCache | None = None,
) -> np.ndarray:
    cands = state.candidates
    if cache is not None and cands is cache.grid and not state.continuous:
        mean, var = cache.moments(fantasy)
        sd = np.sqrt(var)
        if base_af == "ucb":
            vals = mean + math.sqrt(beta_value(beta, state.t, rng)) * sd
        elif base_af == "ei":
            vals = ei_from_moments(mean, sd, float(np.max(mean)))
        elif base_af == "pims":
            vals = pims_from_moments(mean, sd, float(np.max(cache.draw(fantasy, rng))))
        else:
            raise ValueError(f"unknown base acquisition {base_af!r}")
        if np.isnan(vals).any():
            raise ValueError("acquisition returned NaN")
        return cands[int(np.argmax(vals))].copy()
    if base_af == "ucb":
        b = beta_value(beta, state.t, rng)
        af = lambda X: ucb(fantasy, X, b)
    elif base_af == "ei":
        tau = float(np.max(np.atleast_1d(posterior_mean(fantasy, cands))))
        af = lambda X: ei_threshold(fantasy, X, tau)
    elif base_af == "pims":
        # the threshold is the max of a second, independent path drawn from
        # the fantasy posterior: the base rule's own randomness
        gstar = float(np.max(_path_values(fantasy, cands, rng, sampler, rff_features)))
        af = lambda X: pims(fantasy, X, gstar)
    else:
        raise ValueError(f"unknown base acquisition {base_af!r}")
    return _maximize(af, cands, state.continuous)


def select_rkb(
    state: SchedulerState,
    base_af: str,
    rng: np.random.Generator,
    beta: BetaSchedule | None = None,
    sampler: str = "exact",
    rff_features: int = 1024,
    cache: GridCache | None = None,
) -> np.ndarray:
    """Randomized believer: impute one posterior path (plus fresh noise) at
    the pending inputs, then run the base acquisition on the fantasy model."""
    fantasy = _rkb_fantasy(state, rng, sampler, rff_features)
    return _base_af_argmax(fantasy, base_af, state, rng, beta, sampler, rff_features, cache)


def select_kb(
    state: SchedulerState,
    base_af: str,
    rng: np.random.Generator | None = None,
    beta: BetaSchedule | None = None,
    sampler: str = "exact",
    rff_features: int = 1024,
    cache: GridCache | None = None,
) -> np.ndarray:
    """Believer: impute the posterior mean at pending inputs, then select."""
    fantasy = _kb_fantasy(state)
    return _base_af_argmax(fantasy, base_af, state, rng, beta, sampler, rff_features, cache)


def select_bucb(
    state: SchedulerState,
    beta_schedule: BetaSchedule,
    rng: np.random.Generator,
    cache: GridCache | None = None,
) -> np.ndarray:
    """Batched UCB: observed-data mean, fantasy-shrunk deviation, widened beta.

    The width multiplier is ((t-1) mod workers) / noise_variance while
    anything is pending; with an empty pending set the multiplier would be
    zero exactly, so plain UCB is used there instead.
    """
    nv = state.model.noise_variance
    p = state.n_pending
    if p > 0 and nv == 0:
        raise ValueError("BUCB width multiplier is undefined with zero noise variance")
    workers = state.capacity_q + 1
    mult = ((state.t - 1) % workers) / nv if p > 0 else 1.0
    b = beta_value(beta_schedule, state.t, rng) * mult
    if p > 0:
        shrunk = condition_fantasy(state.model, state.pending_inputs, np.zeros(p))
    else:
        shrunk = state.model
    root_b = math.sqrt(b)
    if cache is not None and state.candidates is cache.grid and not state.continuous:
        mean, _ = cache.moments(state.model)
        _, var = cache.moments(shrunk)
        vals = mean + root_b * np.sqrt(var)
        if np.isnan(vals).any():
            raise ValueError("acquisition returned NaN")
        return state.candidates[int(np.argmax(vals))].copy()
    af = lambda X: posterior_mean(state.model, X) + root_b * np.sqrt(posterior_var(shrunk, X))
    return _maximize(af, state.candidates, state.continuous)


def select_pts(
    state: SchedulerState,
    rng: np.random.Generator,
    sampler: str = "exact",
    rff_features: int = 1024,
    cache: GridCache | None = None,
) -> np.ndarray:
    """Thompson selection: argmax of an independent posterior sample path,
    ignoring pending inputs entirely."""
    if cache is not None and state.candidates is cache.grid:
        values = cache.draw(state.model, rng)
        return state.candidates[int(np.argmax(values))].copy()
    if sampler == "rff":
        fmap = build_feature_map(state.model.spec, rff_features, rng)
        sample = sample_path_rff(state.model, fmap, rng)
    else:
        sample = sample_path_discrete(state.model, state.candidates, rng)
    idx, _ = sample_max(sample, state.candidates)
    return state.candidates[idx].copy()


def select_us(state: SchedulerState, cache: GridCache | None = None) -> np.ndarray:
    """Uncertainty sampling on the fantasy-shrunk variance so batches repel."""
    p = state.n_pending
    if p > 0:
        shrunk = condition_fantasy(state.model, state.pending_inputs, np.zeros(p))
    else:
        shrunk = state.model
    if cache is not None and state.candidates is cache.grid and not state.continuous:
        _, var = cache.moments(shrunk)
        return state.candidates[int(np.argmax(var))].copy()
    af = lambda X: np.atleast_1d(posterior_var(shrunk, X))
    return _maximize(af, state.candidates, state.continuous)


def select_rs(state: SchedulerState, rng: np.random.Generator) -> np.ndarray:
    """Uniform choice among the candidates."""
    return state.candidates[int(rng.integers(state.candidates.shape[0]))].copy()


def select(
    strategy: Strategy,
    state: SchedulerState,
    rng: np.random.Generator,
    cache: GridCache | None = None,
) -> np.ndarray:
    """Dispatch a selection call to the strategy's rule."""
    if strategy.kind == "rkb":
        return select_rkb(
            state, strategy.base_af, rng, strategy.beta, strategy.path_sampler,
            strategy.rff_features, cache,
        )
    if strategy.kind == "kb":
        return select_kb(
            state, strategy.base_af, rng, strategy.beta, strategy.path_sampler,
            strategy.rff_features, cache,
        )
    if strategy.kind == "bucb":
        return select_bucb(state, strategy.beta, rng, cache)
    if strategy.kind == "pts":
        return select_pts(state, rng, strategy.path_sampler, strategy.rff_features, cache)
    if strategy.kind == "us":
        return select_us(state, cache)
    return select_rs(state, rng)


@dataclass(frozen=True)
class InitConfig:
    """Initial design: Latin hypercube points, snapped onto finite grids."""

    n_points: int = 8

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("need at least one initial point")


@dataclass
class _Run:
    """Shared bookkeeping for the synchronous and asynchronous loops."""

    strategy: Strategy
    objective: Objective
    workers: int
    rng: np.random.Generator
    kernel_spec: KernelSpec | None
    model_noise_variance: float
    observation_noise_variance: float
    refit_every: int | None
    hyper_search: HyperSearchConfig
    candidate_pool: int
    debug_checks: bool
    observed: Dataset = field(init=False)
    spec: KernelSpec = field(init=False)
    model: GpModel = field(init=False)
    cache: GridCache | None = field(init=False, default=None)
    chosen: dict[int, np.ndarray] = field(init=False, default_factory=dict)
    observed_y: dict[int, float] = field(init=False, default_factory=dict)
    init_inputs: np.ndarray = field(init=False)

    def initialize(self, init: InitConfig) -> None:
        d = self.objective.dim
        X0 = lhs(init.n_points, d, self.rng)
        if self.objective.grid is not None:
            X0 = nearest_grid(X0, self.objective.grid)
        y0 = [
            observe(self.objective, x, self.observation_noise_variance, self.rng)
            for x in X0
        ]
        labels = np.arange(-(init.n_points - 1), 1)
        self.observed = Dataset(X0, y0, labels)
        self.init_inputs = X0
        if self.kernel_spec is not None:
            self.spec = self.kernel_spec
        elif self.strategy.kind == "rs":
            # random search never consults the model; a placeholder spec
            # avoids pointless likelihood optimizations
            self.spec = KernelSpec("gaussian", (0.5,) * d)
        else:
            self.spec = fit_hyperparameters(self.observed, self.hyper_search)
        if self.objective.grid is not None and self.strategy.kind != "rs":
            self.cache = GridCache(self.spec, self.objective.grid)
        self.model = fit(self.spec, self.model_noise_variance, self.observed)

    def candidates(self) -> np.ndarray:
        if self.cache is not None:
            return self.cache.grid
        if self.objective.grid is not None:
            return self.objective.grid
        return self.rng.uniform(size=(self.candidate_pool, self.objective.dim))

    def state(self, t: int, pending: list[tuple[int, np.ndarray]]) -> SchedulerState:
        pend_x = np.asarray([x for _, x in pending], dtype=float).reshape(-1, self.objective.dim)
        return SchedulerState(
            observed=self.observed,
            pending_inputs=pend_x,
            pending_labels=[lab for lab, _ in pending],
            t=t,
            capacity_q=self.workers - 1,
            model=self.model,
            candidates=self.candidates(),
            continuous=self.objective.grid is None,
        )

    def select_one(self, t: int, pending: list[tuple[int, np.ndarray]]) -> np.ndarray:
        state = self.state(t, pending)
        if self.debug_checks and state.n_pending and self.model_noise_variance > 0:
            self._check_variance_ratio(state)
        x = select(self.strategy, state, self.rng, self.cache)
        self.chosen[t] = x
        return x

    def _check_variance_ratio(self, state: SchedulerState) -> None:
        nv = self.model_noise_variance
        # the printed constant (p + noise)/noise assumes prior variance at
        # most one; scale it up when a fitted kernel exceeds that
        k_max = max(1.0, float(np.max(kernel_diag(self.spec, state.candidates))))
        bound = (state.n_pending * k_max + nv) / nv + 1e-6
        shrunk = condition_fantasy(
            state.model, state.pending_inputs, np.zeros(state.n_pending)
        )
        for x in state.candidates[:: max(1, state.candidates.shape[0] // 8)]:
            if posterior_var(shrunk, x) <= 0:
                continue
            ratio = variance_ratio(state.model, shrunk, x)
            if ratio > bound:
                raise AssertionError(
                    f"pending-variance ratio {ratio:.6g} exceeds bound {bound:.6g}"
                )

    def absorb(self, pending: list[tuple[int, np.ndarray]]) -> None:
        ys = []
        for label, x in pending:
            y = observe(self.objective, x, self.observation_noise_variance, self.rng)
            ys.append(y)
            self.observed_y[label] = y
        # asynchronous completions can arrive out of label order; keep the
        # dataset sorted so its label invariant holds
        inputs = np.vstack([self.observed.inputs, [x for _, x in pending]])
        outputs = np.concatenate([self.observed.outputs, ys])
        labels = np.concatenate([self.observed.index_labels, [lab for lab, _ in pending]])
        order = np.argsort(labels)
        self.observed = Dataset(inputs[order], outputs[order], labels[order])

    def refit(self, iterations_done: int) -> None:
        if (
            self.refit_every
            and iterations_done % self.refit_every == 0
            and self.strategy.kind != "rs"
            and self.kernel_spec is None
        ):
            self.spec = fit_hyperparameters(self.observed, self.hyper_search)
            if self.cache is not None and self.cache.spec != self.spec:
                self.cache = GridCache(self.spec, self.objective.grid)
        self.model = fit(self.spec, self.model_noise_variance, self.observed)

    def trace(self, total: int) -> Trace:
        f_star = self.objective.known_optimum
        best = max(true_value(self.objective, x) for x in self.init_inputs)
        records = []
        for t in range(1, total + 1):
            x = self.chosen[t]
            best = max(best, true_value(self.objective, x))
            regret = None if f_star is None else max(f_star - best, 0.0)
            records.append(
                RegretRecord(
                    t=t,
                    batch=(t - 1) // self.workers + 1,
                    x=x,
                    y=self.observed_y[t],
                    best_so_far=best,
                    simple_regret=regret,
                )
            )
        return Trace(records)


def run_synchronous(
    strategy: Strategy,
    objective: Objective,
    workers: int,
    batches: int,
    init: InitConfig,
    rng: np.random.Generator,
    *,
    kernel_spec: KernelSpec | None = None,
    model_noise_variance: float = 1e-8,
    observation_noise_variance: float = 0.0,
    refit_every: int | None = None,
    hyper_search: HyperSearchConfig = HyperSearchConfig(),
    candidate_pool: int = 2000,
    debug_checks: bool = False,
) -> Trace:
    """Batch-synchronous loop: one point per iteration, all pending
    evaluations complete together at every multiple of ``workers``."""
    if workers < 1 or batches < 1:
        raise ValueError("workers and batches must be positive")
    run = _Run(
        strategy, objective, workers, rng, kernel_spec, model_noise_variance,
        observation_noise_variance, refit_every, hyper_search, candidate_pool, debug_checks,
    )
    run.initialize(init)
    pending: list[tuple[int, np.ndarray]] = []
    total = workers * batches
    for t in range(1, total + 1):
        x = run.select_one(t, pending)
        pending.append((t, x))
        if t % workers == 0:
            run.absorb(pending)
            pending = []
            run.refit(t)
    return run.trace(total)


def run_asynchronous(
    strategy: Strategy,
    objective: Objective,
    workers: int,
    horizon_T: int,
    duration_model=None,
    rng: np.random.Generator | None = None,
    *,
    duration_seed: int = 0,
    init: InitConfig = InitConfig(),
    kernel_spec: KernelSpec | None = None,
    model_noise_variance: float = 1e-8,
    observation_noise_variance: float = 0.0,
    refit_every: int | None = None,
    hyper_search: HyperSearchConfig = HyperSearchConfig(),
    candidate_pool: int = 2000,
    debug_checks: bool = False,
) -> Trace:
    """Event-driven loop: each completed evaluation frees a worker, which
    immediately receives a point selected from the current state.

    Job durations come from ``duration_model(rng)`` on a dedicated generator
    seeded by ``duration_seed`` so the algorithm's random stream matches the
    synchronous runner under shared seeds.  Simultaneous completions are
    absorbed together, lowest worker id first, before any new selections.
    """
    if workers < 1 or horizon_T < 1:
        raise ValueError("workers and horizon_T must be positive")
    if duration_model is None:
        duration_model = lambda drng: float(drng.exponential(1.0))
    if rng is None:
        raise ValueError("an explicit generator is required")
    drng = np.random.default_rng(duration_seed)
    run = _Run(
        strategy, objective, workers, rng, kernel_spec, model_noise_variance,
        observation_noise_variance, refit_every, hyper_search, candidate_pool, debug_checks,
    )
    run.initialize(init)

    def draw_duration() -> float:
        dur = float(duration_model(drng))
        if not dur > 0:
            raise ValueError("duration_model must yield positive durations")
        return dur

    events: list[tuple[float, int]] = []  # (completion time, worker id)
    jobs: dict[int, tuple[int, np.ndarray]] = {}
    pending: list[tuple[int, np.ndarray]] = []
    t = 1
    now = 0.0
    for wid in range(workers):
        if t > horizon_T:
            break
        x = run.select_one(t, pending)
        jobs[wid] = (t, x)
        pending.append((t, x))
        heapq.heappush(events, (now + draw_duration(), wid))
        t += 1
    absorbed = 0
    while events:
        now = events[0][0]
        freed: list[int] = []
        while events and events[0][0] == now:
            _, wid = heapq.heappop(events)
            freed.append(wid)
        freed.sort()
        done = sorted((jobs.pop(wid) for wid in freed), key=lambda job: job[0])
        run.absorb(done)
        done_labels = {lab for lab, _ in done}
        pending = [(lab, x) for lab, x in pending if lab not in done_labels]
        absorbed += len(done)
        run.refit(absorbed)
        for wid in freed:
            if t > horizon_T:
                continue
            x = run.select_one(t, pending)
            jobs[wid] = (t, x)
            pending.append((t, x))
            heapq.heappush(events, (now + draw_duration(), wid))
            t += 1
    return run.trace(horizon_T)

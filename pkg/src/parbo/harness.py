"""Experiment configuration, orchestration, CSV emission, and the CLI.

A JSON config describes one experiment: an objective, a model, a list of
selection methods, and trial/worker counts.  Every (method, trial) pair runs
on its own generator seeded from a stable hash, so traces are reproducible
byte for byte and independent of the order methods are listed in.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisition import BetaSchedule
from .design import lhs, nearest_grid  # re-exported: the CLI surface owns the design helpers
from .diagnostics import (
    Trace,
    aggregate_traces,
    bcr_bound,
    condition_constants,
    greedy_mig,
    information_gain,
    normal_tail_check,
    variance_ratio,
)
from .gp import Dataset, HyperSearchConfig, condition_fantasy, fit, posterior_var
from .kernel import KernelSpec, kernel_matrix
from .objectives import (
    Objective,
    analytic_objective,
    grid_points,
    load_tabular,
    synthetic_gp,
)
from .scheduler import InitConfig, Strategy, run_asynchronous, run_synchronous

__all__ = [
    "ExperimentConfig",
    "cli_main",
    "lhs",
    "main",
    "nearest_grid",
    "run_experiment",
]

TRACE_COLUMNS = ("method", "trial", "t", "batch")  # then x_1..x_d, y, best_so_far, simple_regret
SUMMARY_HEADER = ("batch", "method", "mean", "stderr", "n_trials")


def _hash64(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode())
        h.update(b"|")
    return int.from_bytes(h.digest(), "big") & (2**63 - 1)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see README for the JSON schema."""

    objective: dict
    kernel: dict | str = "fit"
    refit_every: int | None = None
    model_noise_variance: float = 1e-8
    observation_noise_variance: float = 0.0
    workers: int = 8
    batches: int = 8
    init_points: int = 8
    methods: tuple[str, ...] = ("RKB-UCB",)
    beta: dict = field(default_factory=lambda: {"kind": "heuristic"})
    trials: int = 100
    base_seed: int = 0
    mode: str = "synchronous"
    out_dir: str = "results"
    sampler: str = "exact"
    rff_features: int = 1024
    candidate_pool: int = 2000
    measure: str = "simple_regret"
    hyper_search: dict = field(default_factory=dict)
    duration_mean: float = 1.0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.batches < 1:
            raise ValueError("batches must be >= 1")
        if self.mode not in ("synchronous", "asynchronous"):
            raise ValueError("mode must be synchronous or asynchronous")
        if self.measure not in ("simple_regret", "best_value"):
            raise ValueError("measure must be simple_regret or best_value")
        if not self.methods:
            raise ValueError("methods must be nonempty")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "methods" in d:
            d = dict(d, methods=tuple(d["methods"]))
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _build_objective(config: ExperimentConfig, rng: np.random.Generator) -> Objective:
    spec = dict(config.objective)
    kind = spec.pop("type", None)
    if kind == "synthetic_grid":
        levels = int(spec.pop("levels"))
        dim = int(spec.pop("dim"))
        gen_kernel = spec.pop("kernel", None)
        if gen_kernel is None:
            if isinstance(config.kernel, str):
                raise ValueError("synthetic_grid objective needs a generation kernel")
            gen_kernel = config.kernel
        method = spec.pop("method", "auto")
        rff_features = int(spec.pop("rff_features", 4096))
        if spec:
            raise ValueError(f"unknown synthetic_grid fields: {sorted(spec)}")
        return synthetic_gp(
            KernelSpec.from_dict(gen_kernel), grid_points(levels, dim), rng,
            method=method, rff_features=rff_features,
        )
    if kind == "benchmark":
        name = spec.pop("name")
        if spec:
            raise ValueError(f"unknown benchmark fields: {sorted(spec)}")
        return analytic_objective(name)
    if kind == "tabular":
        path = spec.pop("path")
        if spec:
            raise ValueError(f"unknown tabular fields: {sorted(spec)}")
        return load_tabular(path)
    raise ValueError("objective.type must be synthetic_grid, benchmark, or tabular")


def _resolve_beta(config: ExperimentConfig, objective: Objective) -> BetaSchedule:
    spec = dict(config.beta)
    kind = spec.get("kind", "heuristic")
    if kind in ("theoretical_finite", "irgp_random") and "domain_size" not in spec:
        if objective.grid is None:
            raise ValueError(f"{kind} beta needs a finite domain or explicit domain_size")
        spec["domain_size"] = objective.grid.shape[0]
    if kind == "heuristic" and "dim" not in spec:
        spec["dim"] = objective.dim
    return BetaSchedule(**spec)


def _run_one(config: ExperimentConfig, method: str, trial: int) -> tuple[Trace, float | None]:
    seed = config.base_seed ^ _hash64(method, trial)
    rng = np.random.default_rng(seed)
    objective = _build_objective(config, rng)
    strategy = Strategy.parse(
        method,
        beta=_resolve_beta(config, objective),
        path_sampler=config.sampler,
        rff_features=config.rff_features,
    )
    kernel_spec = None if config.kernel == "fit" else KernelSpec.from_dict(config.kernel)
    search = HyperSearchConfig(
        **{"noise_variance": config.model_noise_variance, **config.hyper_search}
    )
    common = dict(
        kernel_spec=kernel_spec,
        model_noise_variance=config.model_noise_variance,
        observation_noise_variance=config.observation_noise_variance,
        refit_every=config.refit_every,
        hyper_search=search,
        candidate_pool=config.candidate_pool,
    )
    init = InitConfig(config.init_points)
    if config.mode == "synchronous":
        trace = run_synchronous(
            strategy, objective, config.workers, config.batches, init, rng, **common
        )
    else:
        trace = run_asynchronous(
            strategy,
            objective,
            config.workers,
            config.workers * config.batches,
            lambda drng: float(drng.exponential(config.duration_mean)),
            rng,
            duration_seed=_hash64("durations", method, trial) ^ config.base_seed,
            init=init,
            **common,
        )
    f_star = objective.known_optimum if config.measure == "simple_regret" else None
    return trace, f_star


def _write_traces(path: Path, dim: int, results: dict) -> None:
    header = (
        list(TRACE_COLUMNS)
        + [f"x_{j + 1}" for j in range(dim)]
        + ["y", "best_so_far", "simple_regret"]
    )
    lines = [",".join(header)]
    for method, trial in sorted(results):
        trace, _ = results[(method, trial)]
        for rec in trace.records:
            row = [method, str(trial), str(rec.t), str(rec.batch)]
            row += [_fmt(v) for v in rec.x]
            row += [_fmt(rec.y), _fmt(rec.best_so_far)]
            row.append("" if rec.simple_regret is None else _fmt(rec.simple_regret))
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def _write_summary(path: Path, results: dict, methods) -> None:
    lines = [",".join(SUMMARY_HEADER)]
    for method in sorted(set(methods)):
        pairs = sorted(t for m, t in results if m == method)
        traces = [results[(method, t)][0] for t in pairs]
        f_stars = [results[(method, t)][1] for t in pairs]
        for batch, mean, stderr, n in aggregate_traces(traces, f_stars):
            lines.append(
                ",".join([str(batch), method, _fmt(mean), _fmt(stderr), str(n)])
            )
    path.write_text("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig) -> int:
    """Run every (method, trial) pair and write trace and summary CSVs.

    Returns 0 on success; a nonzero status means at least one trial failed
    (failures are reported on stderr and the rest still run).  Concurrency is
    capped by the PARBO_THREADS environment variable (default 1); output
    bytes do not depend on it because rows are canonically ordered.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(m, t) for m in config.methods for t in range(config.trials)]
    results: dict[tuple[str, int], tuple[Trace, float | None]] = {}
    failures: list[tuple[str, int, str]] = []
    threads = max(1, int(os.environ.get("PARBO_THREADS", "1")))
    if threads == 1:
        for method, trial in tasks:
            try:
                results[(method, trial)] = _run_one(config, method, trial)
            except Exception as exc:
                failures.append((method, trial, repr(exc)))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {
                pool.submit(_run_one, config, method, trial): (method, trial)
                for method, trial in tasks
            }
            for fut in concurrent.futures.as_completed(futs):
                method, trial = futs[fut]
                try:
                    results[(method, trial)] = fut.result()
                except Exception as exc:
                    failures.append((method, trial, repr(exc)))
    for method, trial, err in sorted(failures):
        print(f"trial failed: method={method} trial={trial}: {err}", file=sys.stderr)
    if results:
        dim = len(next(iter(results.values()))[0].records[0].x)
        _write_traces(out / "traces.csv", dim, results)
        ok_methods = [m for m in config.methods if any(k[0] == m for k in results)]
        _write_summary(out / "summary.csv", results, ok_methods)
    return 1 if failures else 0


def _selftest() -> int:
    """Quick numerical invariant suite; prints one line per check."""
    rng = np.random.default_rng(7)
    checks: list[tuple[str, bool]] = []

    ok = True
    for _ in range(5):
        X = rng.uniform(size=(12, 2))
        spec = KernelSpec("gaussian", (0.4, 0.6), 1.0)
        nv = 0.05
        K = kernel_matrix(spec, X)
        total = information_gain(K, nv)
        seq = 0.0
        model = fit(spec, nv, Dataset.empty(2))
        for i in range(12):
            seq += 0.5 * np.log(1.0 + posterior_var(model, X[i]) / nv)
            model = condition_fantasy(model, X[i][None, :], [0.0])
        ok &= abs(total - seq) < 1e-8
    checks.append(("information-gain identity (log-det vs sequential sum)", ok))

    ok = True
    for _ in range(100):
        q = int(rng.integers(1, 8))
        nv = 10.0 ** rng.uniform(-3, 0)
        spec = KernelSpec("gaussian", (float(rng.uniform(0.2, 1.0)),), 1.0)
        X = rng.uniform(size=(5, 1))
        model = fit(spec, nv, Dataset(X, rng.standard_normal(5), np.arange(5)))
        extra = rng.uniform(size=(q, 1))
        full = condition_fantasy(model, extra, np.zeros(q))
        x = rng.uniform(size=1)
        ok &= variance_ratio(model, full, x) <= (q + nv) / nv + 1e-6
    checks.append(("pending-variance ratio bound", ok))

    grid = np.exp(np.linspace(np.log(1e-3), np.log(8.0), 60))
    ok = all(exact <= bound for exact, bound in map(normal_tail_check, grid))
    checks.append(("normal-tail bound on log grid", ok))

    const = condition_constants("pims", domain_size=100)
    ok = bcr_bound(1.0, const, 4, 1.0) > 0
    checks.append(("regret bound evaluates", ok))

    mig = greedy_mig(KernelSpec("gaussian", (0.5,), 1.0), rng.uniform(size=(20, 1)), 5, 0.1)
    checks.append(("greedy information gain positive and finite", bool(np.isfinite(mig) and mig > 0)))

    failed = 0
    for name, passed in checks:
        print(("ok" if passed else "FAIL") + f": {name}")
        failed += 0 if passed else 1
    return 1 if failed else 0


def cli_main(argv) -> int:
    """Entry point for the ``parbo`` command; returns an exit status."""
    parser = argparse.ArgumentParser(
        prog="parbo",
        description="Parallel Bayesian optimization benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run the experiment described by a JSON config")
    run_p.add_argument("config", help="path to the experiment config (JSON)")
    run_p.add_argument("--seed", type=int, default=None, help="override base_seed")
    run_p.add_argument("--out", default=None, help="override out_dir")
    run_p.add_argument("--trials", type=int, default=None, help="override trials")

    sub.add_parser("selftest", help="run the numerical invariant suite")

    mig_p = sub.add_parser("mig", help="print a greedy information-gain estimate and regret bound")
    mig_p.add_argument("--family", default="gaussian")
    mig_p.add_argument("--lengthscale", type=float, default=1.0)
    mig_p.add_argument("--variance", type=float, default=1.0)
    mig_p.add_argument("--nu", type=float, default=None)
    mig_p.add_argument("--noise-variance", type=float, default=1.0)
    mig_p.add_argument("--T", type=int, required=True)
    mig_p.add_argument("--points", type=int, default=256)
    mig_p.add_argument("--dim", type=int, default=1)
    mig_p.add_argument("--method", default="pims", help="constants for the regret bound")
    mig_p.add_argument("--seed", type=int, default=0)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "run":
        path = Path(args.config)
        if not path.exists():
            print(f"error: config file not found: {path}", file=sys.stderr)
            return 1
        try:
            config = ExperimentConfig.from_json(path)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            print(f"error: invalid config {path}: {exc}", file=sys.stderr)
            return 1
        overrides = {}
        if args.seed is not None:
            overrides["base_seed"] = args.seed
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.trials is not None:
            overrides["trials"] = args.trials
        if overrides:
            merged = {f: getattr(config, f) for f in config.__dataclass_fields__}
            merged.update(overrides)
            config = ExperimentConfig.from_dict(merged)
        return run_experiment(config)

    if args.command == "selftest":
        return _selftest()

    if args.command == "mig":
        try:
            spec = KernelSpec(
                args.family, (args.lengthscale,) * args.dim, args.variance, nu=args.nu
            )
            candidates = lhs(args.points, args.dim, np.random.default_rng(args.seed))
            gamma = greedy_mig(spec, candidates, args.T, args.noise_variance)
            schedule = (
                BetaSchedule("theoretical_finite", domain_size=args.points)
                if args.method == "ucb"
                else None
            )
            const = condition_constants(
                args.method,
                domain_size=args.points,
                beta_schedule=schedule,
                noise_variance=args.noise_variance,
            )
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"greedy_mig {gamma:.5f}")
        print(f"bcr_bound {bcr_bound(gamma, const, args.T, args.noise_variance):.5f}")
        return 0

    parser.print_usage()
    return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))

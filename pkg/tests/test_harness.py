import json

import numpy as np
import pytest

from parbo.design import lhs, nearest_grid
from parbo.harness import ExperimentConfig, cli_main, run_experiment
from parbo.objectives import grid_points


def small_config(tmp_path, **overrides):
    base = {
        "objective": {
            "type": "synthetic_grid",
            "levels": 5,
            "dim": 2,
            "kernel": {"family": "gaussian", "lengthscales": [0.3, 0.3], "variance": 1.0},
        },
        "kernel": {"family": "gaussian", "lengthscales": [0.3, 0.3], "variance": 1.0},
        "model_noise_variance": 1e-3,
        "observation_noise_variance": 1e-3,
        "workers": 4,
        "batches": 2,
        "init_points": 4,
        "methods": ["RKB-UCB", "RS"],
        "beta": {"kind": "theoretical_finite"},
        "trials": 2,
        "base_seed": 11,
        "out_dir": str(tmp_path / "out"),
    }
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


class TestLhs:
    def test_single_point(self):
        pts = lhs(1, 3, np.random.default_rng(0))
        assert pts.shape == (1, 3)
        assert np.all((pts >= 0) & (pts < 1))

    def test_stratification(self):
        pts = lhs(4, 2, np.random.default_rng(1))
        for j in range(2):
            strata = np.floor(pts[:, j] * 4).astype(int)
            assert sorted(strata) == [0, 1, 2, 3]

    def test_stratification_many(self):
        for seed in range(5):
            n = 16
            pts = lhs(n, 3, np.random.default_rng(seed))
            for j in range(3):
                assert sorted(np.floor(pts[:, j] * n).astype(int)) == list(range(n))

    def test_seed_determinism(self):
        a = lhs(8, 2, np.random.default_rng(3))
        b = lhs(8, 2, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            lhs(0, 2, np.random.default_rng(0))


class TestNearestGrid:
    def test_matches_scan_oracle(self):
        rng = np.random.default_rng(2)
        grid = grid_points(6, 2)
        pts = rng.uniform(size=(20, 2))
        snapped = nearest_grid(pts, grid)
        for p, s in zip(pts, snapped):
            dists = [np.sum((p - g) ** 2) for g in grid]
            np.testing.assert_array_equal(s, grid[int(np.argmin(dists))])

    def test_grid_points_are_fixed(self):
        grid = grid_points(5, 2)
        np.testing.assert_array_equal(nearest_grid(grid, grid), grid)


class TestRunExperiment:
    def test_csv_shapes(self, tmp_path):
        config = small_config(tmp_path, methods=["RS"], trials=1, workers=1, batches=1)
        assert run_experiment(config) == 0
        lines = (tmp_path / "out" / "traces.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 1  # header plus workers * batches rows
        header = lines[0].split(",")
        assert header == [
            "method", "trial", "t", "batch", "x_1", "x_2", "y", "best_so_far", "simple_regret",
        ]
        summary = (tmp_path / "out" / "summary.csv").read_text().strip().splitlines()
        assert summary[0] == "batch,method,mean,stderr,n_trials"
        assert len(summary) == 2

    def test_rerun_is_byte_identical(self, tmp_path):
        config = small_config(tmp_path)
        run_experiment(config)
        first_traces = (tmp_path / "out" / "traces.csv").read_bytes()
        first_summary = (tmp_path / "out" / "summary.csv").read_bytes()
        run_experiment(config)
        assert (tmp_path / "out" / "traces.csv").read_bytes() == first_traces
        assert (tmp_path / "out" / "summary.csv").read_bytes() == first_summary

    def test_method_order_does_not_change_traces(self, tmp_path):
        config = small_config(tmp_path, out_dir=str(tmp_path / "a"))
        run_experiment(config)
        flipped = small_config(
            tmp_path, methods=["RS", "RKB-UCB"], out_dir=str(tmp_path / "b")
        )
        run_experiment(flipped)
        a = (tmp_path / "a" / "traces.csv").read_text()
        b = (tmp_path / "b" / "traces.csv").read_text()
        assert a == b  # canonical row order plus method-keyed seeds

    def test_thread_count_does_not_change_bytes(self, tmp_path, monkeypatch):
        config = small_config(tmp_path, out_dir=str(tmp_path / "serial"))
        run_experiment(config)
        monkeypatch.setenv("PARBO_THREADS", "4")
        config2 = small_config(tmp_path, out_dir=str(tmp_path / "threaded"))
        run_experiment(config2)
        assert (tmp_path / "serial" / "traces.csv").read_bytes() == (
            tmp_path / "threaded" / "traces.csv"
        ).read_bytes()

    def test_benchmark_objective_runs(self, tmp_path):
        config = small_config(
            tmp_path,
            objective={"type": "benchmark", "name": "styblinski_tang3"},
            kernel="fit",
            refit_every=4,
            model_noise_variance=1e-8,
            observation_noise_variance=0.0,
            beta={"kind": "heuristic"},
            methods=["KB-EI"],
            trials=1,
            workers=2,
            batches=2,
            init_points=6,
            candidate_pool=200,
        )
        assert run_experiment(config) == 0
        lines = (tmp_path / "out" / "traces.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 4

    def test_asynchronous_mode_runs(self, tmp_path):
        config = small_config(tmp_path, mode="asynchronous", methods=["RKB-UCB"], trials=1)
        assert run_experiment(config) == 0
        lines = (tmp_path / "out" / "traces.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 8

    def test_catalog_scale_synthetic_config(self, tmp_path):
        # the four-dimensional ten-level grid yields 10^4 candidates and the
        # theoretical schedule picks its domain size up from the grid
        from parbo.harness import _build_objective, _resolve_beta

        config = small_config(
            tmp_path,
            objective={
                "type": "synthetic_grid", "levels": 10, "dim": 4,
                "kernel": {"family": "gaussian", "lengthscales": [0.1] * 4, "variance": 1.0},
            },
            workers=8,
            init_points=8,
            methods=["RKB-UCB"],
        )
        obj = _build_objective(config, np.random.default_rng(0))
        assert obj.grid.shape == (10_000, 4)
        sched = _resolve_beta(config, obj)
        assert sched.domain_size == 10_000
        assert config.workers == 8 and config.init_points == 8

    def test_tabular_best_value_flow(self, tmp_path):
        from parbo.kernel import KernelSpec
        from parbo.objectives import save_tabular, synthetic_gp

        table = tmp_path / "emulator.csv"
        spec = KernelSpec("gaussian", (0.3, 0.3), 1.0)
        save_tabular(synthetic_gp(spec, grid_points(5, 2), np.random.default_rng(3)), table)
        config = small_config(
            tmp_path,
            objective={"type": "tabular", "path": str(table)},
            measure="best_value",
            methods=["KB-UCB"],
            trials=2,
        )
        assert run_experiment(config) == 0
        summary = (tmp_path / "out" / "summary.csv").read_text().strip().splitlines()
        assert len(summary) == 1 + 2  # two batches aggregated
        # best-value aggregation: the summary means are best-so-far values,
        # the mean over trials of the last record of each batch
        import csv as csv_mod

        finals = {}
        with open(tmp_path / "out" / "traces.csv") as fh:
            for row in csv_mod.DictReader(fh):
                key = (int(row["batch"]), int(row["trial"]))
                finals[key] = float(row["best_so_far"])
        with open(tmp_path / "out" / "summary.csv") as fh:
            for row in csv_mod.DictReader(fh):
                batch = int(row["batch"])
                expect = np.mean([v for (b, _), v in finals.items() if b == batch])
                assert float(row["mean"]) == pytest.approx(expect, rel=1e-12)

    def test_failure_reported_nonzero(self, tmp_path, capsys):
        config = small_config(tmp_path, objective={"type": "tabular", "path": str(tmp_path / "missing.csv")})
        assert run_experiment(config) == 1
        err = capsys.readouterr().err
        assert "trial failed" in err


class TestConfigValidation:
    def test_unknown_field_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown config fields"):
            small_config(tmp_path, grandiosity=9)

    def test_bad_workers(self, tmp_path):
        with pytest.raises(ValueError):
            small_config(tmp_path, workers=0)

    def test_bad_mode(self, tmp_path):
        with pytest.raises(ValueError):
            small_config(tmp_path, mode="quantum")


class TestCli:
    def test_selftest_exits_zero(self, capsys):
        assert cli_main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "ok" in out and "FAIL" not in out

    def test_run_missing_config(self, capsys, tmp_path):
        missing = tmp_path / "nope.json"
        assert cli_main(["run", str(missing)]) == 1
        assert str(missing) in capsys.readouterr().err

    def test_unknown_subcommand_usage(self, capsys):
        code = cli_main(["frobnicate"])
        assert code != 0
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand_usage(self, capsys):
        assert cli_main([]) == 2
        assert "usage" in capsys.readouterr().out.lower()

    def test_mig_single_candidate(self, capsys):
        code = cli_main(
            [
                "mig", "--T", "1", "--points", "1", "--dim", "1",
                "--lengthscale", "1.0", "--variance", "1.0", "--noise-variance", "1.0",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "greedy_mig 0.34657" in out
        assert "bcr_bound" in out

    def test_run_with_overrides(self, tmp_path, capsys):
        cfg = {
            "objective": {
                "type": "synthetic_grid", "levels": 4, "dim": 1,
                "kernel": {"family": "gaussian", "lengthscales": [0.3], "variance": 1.0},
            },
            "kernel": {"family": "gaussian", "lengthscales": [0.3], "variance": 1.0},
            "model_noise_variance": 1e-3,
            "observation_noise_variance": 1e-3,
            "workers": 2,
            "batches": 1,
            "init_points": 2,
            "methods": ["RS"],
            "beta": {"kind": "fixed", "value": 4.0},
            "trials": 3,
            "base_seed": 0,
            "out_dir": str(tmp_path / "ignored"),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "cli_out"
        code = cli_main(["run", str(path), "--trials", "1", "--out", str(out_dir), "--seed", "5"])
        assert code == 0
        lines = (out_dir / "traces.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 2  # one trial, workers * batches = 2 rows

    def test_invalid_config_naming_problem(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"objective": {"type": "benchmark", "name": "hartmann6"}, "workers": 0}))
        assert cli_main(["run", str(path)]) == 1
        assert "workers" in capsys.readouterr().err

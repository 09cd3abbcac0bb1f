import numpy as np
import pytest

from parbo.gp import Dataset, condition_fantasy, fit, posterior_cov, posterior_mean, posterior_var
from parbo.kernel import KernelSpec, eval_kernel
from parbo.sampling import (
    DiscreteSample,
    build_feature_map,
    sample_max,
    sample_path_discrete,
    sample_path_rff,
)


def simple_model(noise=0.1, n=5, seed=0, ell=0.5):
    rng = np.random.default_rng(seed)
    spec = KernelSpec("gaussian", (ell,), 1.0)
    X = rng.uniform(size=(n, 1))
    y = rng.standard_normal(n)
    return fit(spec, noise, Dataset(X, y, np.arange(n)))


class TestDiscreteSampler:
    def test_seed_determinism(self):
        model = simple_model()
        cands = np.linspace(0, 1, 7)[:, None]
        a = sample_path_discrete(model, cands, np.random.default_rng(42))
        b = sample_path_discrete(model, cands, np.random.default_rng(42))
        np.testing.assert_array_equal(a.values, b.values)

    def test_prior_single_candidate_mean(self):
        spec = KernelSpec("gaussian", (1.0,), 1.0)
        model = fit(spec, 0.0, Dataset.empty(1))
        cands = np.array([[0.2]])
        draws = np.array(
            [
                sample_path_discrete(model, cands, np.random.default_rng(s)).values[0]
                for s in range(10_000)
            ]
        )
        # standard-normal draws: the mean estimate has stderr 0.01
        assert abs(draws.mean()) < 0.03
        assert abs(draws.var() - 1.0) < 0.05

    def test_zero_variance_at_training_point(self):
        model = simple_model(noise=0.0)
        x = model.data.inputs[2]
        samp = sample_path_discrete(model, x[None, :], np.random.default_rng(5))
        assert samp.values[0] == pytest.approx(model.data.outputs[2], abs=1e-5)

    def test_empirical_covariance(self):
        # clustered candidates keep all pairwise correlations strong, so an
        # entrywise 5% check is well inside the Monte Carlo error at 5e4 draws
        spec = KernelSpec("gaussian", (0.8,), 1.0)
        data = Dataset(np.array([[0.0], [1.0]]), np.array([0.5, -0.3]), np.arange(2))
        model = fit(spec, 0.05, data)
        cands = np.array([[0.45], [0.5], [0.55]])
        true_cov = posterior_cov(model, cands)
        rng = np.random.default_rng(99)
        draws = np.array(
            [sample_path_discrete(model, cands, rng).values for _ in range(50_000)]
        )
        emp = np.cov(draws.T)
        assert np.max(np.abs(emp - true_cov) / np.abs(true_cov)) < 0.05

    def test_marginals_match_posterior(self):
        model = simple_model(noise=0.1, n=6)
        cands = np.array([[0.25], [0.75]])
        rng = np.random.default_rng(7)
        draws = np.array(
            [sample_path_discrete(model, cands, rng).values for _ in range(20_000)]
        )
        mu = np.atleast_1d(posterior_mean(model, cands))
        var = np.atleast_1d(posterior_var(model, cands))
        assert np.all(np.abs(draws.mean(axis=0) - mu) < 4 * np.sqrt(var / 20_000))
        np.testing.assert_allclose(draws.var(axis=0), var, rtol=0.05)

    def test_rejects_empty_candidates(self):
        model = simple_model()
        with pytest.raises(ValueError):
            sample_path_discrete(model, np.zeros((0, 1)), np.random.default_rng(0))


class TestFeatureMap:
    def test_kernel_approximation(self):
        spec = KernelSpec("gaussian", (0.5, 0.5), 1.0)
        fmap = build_feature_map(spec, 2048, np.random.default_rng(3))
        rng = np.random.default_rng(4)
        X = rng.uniform(size=(100, 2))
        X2 = rng.uniform(size=(100, 2))
        approx = np.einsum("ij,ij->i", fmap.features(X), fmap.features(X2))
        exact = np.array([eval_kernel(spec, a, b) for a, b in zip(X, X2)])
        assert np.max(np.abs(approx - exact)) < 0.05

    def test_self_product_near_output_variance(self):
        spec = KernelSpec("gaussian", (0.5,), 1.5)
        fmap = build_feature_map(spec, 2048, np.random.default_rng(8))
        x = np.array([[0.3]])
        phi = fmap.features(x)[0]
        assert phi @ phi == pytest.approx(1.5, abs=0.05 * 1.5)

    def test_deterministic_under_seed(self):
        spec = KernelSpec("gaussian", (1.0,), 1.0)
        a = build_feature_map(spec, 64, np.random.default_rng(1))
        b = build_feature_map(spec, 64, np.random.default_rng(1))
        np.testing.assert_array_equal(a.frequencies, b.frequencies)
        np.testing.assert_array_equal(a.phases, b.phases)

    def test_non_gaussian_rejected(self):
        with pytest.raises(ValueError):
            build_feature_map(KernelSpec("linear", (1.0,), 1.0), 16, np.random.default_rng(0))


class TestRffPath:
    def test_empty_data_is_prior_path(self):
        spec = KernelSpec("gaussian", (0.5,), 1.0)
        model = fit(spec, 0.1, Dataset.empty(1))
        fmap = build_feature_map(spec, 128, np.random.default_rng(0))
        path = sample_path_rff(model, fmap, np.random.default_rng(1))
        assert path.correction_weights.size == 0
        X = np.linspace(0, 1, 5)[:, None]
        np.testing.assert_allclose(
            path.values_at(X), fmap.features(X) @ path.prior_weights, atol=1e-14
        )

    def test_mean_matches_posterior(self):
        model = simple_model(noise=0.1, n=6, ell=0.5)
        x = np.array([[0.4]])
        mu = posterior_mean(model, x[0])
        sd = np.sqrt(posterior_var(model, x[0]))
        vals = []
        for s in range(2000):
            fmap = build_feature_map(model.spec, 2048, np.random.default_rng(1000 + s))
            path = sample_path_rff(model, fmap, np.random.default_rng(5000 + s))
            vals.append(path.values_at(x)[0])
        vals = np.array(vals)
        assert abs(vals.mean() - mu) < 3 * (sd / np.sqrt(2000) + 0.05)
        assert abs(vals.var() - sd**2) < 0.15 * sd**2

    def test_deterministic_under_seed(self):
        model = simple_model()
        fmap = build_feature_map(model.spec, 256, np.random.default_rng(2))
        a = sample_path_rff(model, fmap, np.random.default_rng(3))
        b = sample_path_rff(model, fmap, np.random.default_rng(3))
        X = np.linspace(0, 1, 4)[:, None]
        np.testing.assert_array_equal(a.values_at(X), b.values_at(X))


class TestSampleMax:
    def test_single_candidate(self):
        samp = DiscreteSample(np.array([[0.5]]), np.array([1.25]), "x")
        assert sample_max(samp, np.array([[0.5]])) == (0, 1.25)

    def test_tie_breaks_low_index(self):
        cands = np.array([[0.0], [1.0], [2.0]])
        samp = DiscreteSample(cands, np.array([3.0, 1.0, 2.0]), "x")
        assert sample_max(samp, cands) == (0, 3.0)
        samp = DiscreteSample(cands, np.array([2.0, 2.0, 1.0]), "x")
        assert sample_max(samp, cands)[0] == 0

    def test_matches_scan_oracle(self):
        rng = np.random.default_rng(17)
        cands = rng.uniform(size=(30, 2))
        for _ in range(10):
            vals = rng.standard_normal(30)
            samp = DiscreteSample(cands, vals, "x")
            idx, val = sample_max(samp, cands)
            best, best_v = 0, vals[0]
            for i, v in enumerate(vals):
                if v > best_v:
                    best, best_v = i, v
            assert (idx, val) == (best, best_v)

    def test_discrete_sample_bound_to_candidates(self):
        cands = np.array([[0.0], [1.0]])
        samp = DiscreteSample(cands, np.array([1.0, 2.0]), "x")
        with pytest.raises(ValueError):
            samp.values_at(np.array([[0.5], [1.0]]))


class TestFantasyTotalExpectation:
    def test_fantasy_posterior_mean_is_unbiased(self):
        # conditioning on sampled path values (plus fresh noise) must leave
        # the expected posterior mean at any test point unchanged
        model = simple_model(noise=0.2, n=6, ell=0.6)
        pend = np.array([[0.15], [0.55], [0.9]])
        x_test = np.array([0.4])
        rng = np.random.default_rng(123)
        means = []
        for _ in range(2000):
            g = sample_path_discrete(model, pend, rng).values
            y = g + rng.normal(0.0, np.sqrt(model.noise_variance), size=3)
            fab = condition_fantasy(model, pend, y)
            means.append(posterior_mean(fab, x_test))
        means = np.array(means)
        se = means.std(ddof=1) / np.sqrt(len(means))
        assert abs(means.mean() - posterior_mean(model, x_test)) < 3 * se

import numpy as np
import pytest
from scipy.integrate import quad

from flowbench.targets import (CMoGSpec, SampleBatch, log_prob_base,
                               log_prob_cmog, make_cmog, sample_base,
                               sample_cmog)


def single_gaussian_spec(mean=0.0, std=1.0, dim=1):
    return CMoGSpec(dim=dim, n_components=1,
                    means=np.full((1, dim), mean), stds=np.full((1, dim), std),
                    mixture_probs=np.array([1.0]), seed=0)


def test_make_cmog_shapes_and_ranges():
    spec = make_cmog(4, 3, 7)
    assert spec.means.shape == (3, 4) and spec.stds.shape == (3, 4)
    assert spec.mixture_probs.shape == (3,)
    assert np.all((spec.means >= 0) & (spec.means <= 10))
    assert np.all((spec.stds > 0) & (spec.stds <= 1))
    assert spec.mixture_probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_make_cmog_deterministic():
    a, b = make_cmog(4, 3, 7), make_cmog(4, 3, 7)
    assert np.array_equal(a.means, b.means)
    assert np.array_equal(a.stds, b.stds)
    assert np.array_equal(a.mixture_probs, b.mixture_probs)


def test_make_cmog_degenerate_single_component():
    spec = make_cmog(1, 1, 0)
    assert np.array_equal(spec.mixture_probs, np.array([1.0]))


def test_spec_validation_rejects_bad_probs():
    with pytest.raises(ValueError):
        CMoGSpec(dim=1, n_components=2, means=np.zeros((2, 1)),
                 stds=np.ones((2, 1)), mixture_probs=np.array([0.6, 0.5]), seed=0)
    with pytest.raises(ValueError):
        CMoGSpec(dim=1, n_components=1, means=np.zeros((1, 1)),
                 stds=np.zeros((1, 1)), mixture_probs=np.array([1.0]), seed=0)


def test_sample_standard_normal_moments():
    spec = single_gaussian_spec()
    n = 40_000
    x = sample_cmog(spec, n, 5).data
    tol = 5.0 / np.sqrt(n)
    assert abs(x.mean()) < tol
    assert abs(x.std() - 1.0) < tol


def test_sample_degenerate_categorical():
    spec = CMoGSpec(dim=1, n_components=3,
                    means=np.array([[0.0], [100.0], [200.0]]),
                    stds=np.full((3, 1), 0.1),
                    mixture_probs=np.array([1.0, 0.0, 0.0]), seed=0)
    x = sample_cmog(spec, 500, 3).data
    assert np.all(np.abs(x) < 10.0)


def test_two_mode_fraction():
    spec = CMoGSpec(dim=1, n_components=2,
                    means=np.array([[0.0], [10.0]]), stds=np.full((2, 1), 0.5),
                    mixture_probs=np.array([0.5, 0.5]), seed=0)
    x = sample_cmog(spec, 10_000, 9).data
    frac = float(np.mean(x < 5.0))
    assert abs(frac - 0.5) < 0.02


def test_sampling_deterministic():
    spec = make_cmog(3, 2, 1)
    assert np.array_equal(sample_cmog(spec, 100, 2).data,
                          sample_cmog(spec, 100, 2).data)


def test_log_prob_standard_normal_origin():
    spec = single_gaussian_spec()
    lp = log_prob_cmog(spec, np.array([[0.0]]))
    assert lp[0] == pytest.approx(-0.9189385332046727, abs=1e-12)


def test_log_prob_mode_density():
    spec = single_gaussian_spec(mean=3.0, std=0.25)
    lp = log_prob_cmog(spec, np.array([[3.0]]))
    assert lp[0] == pytest.approx(-np.log(0.25 * np.sqrt(2 * np.pi)), abs=1e-12)


def test_log_prob_matches_naive_summation():
    spec = CMoGSpec(dim=2, n_components=2,
                    means=np.array([[0.0, 1.0], [2.0, 3.0]]),
                    stds=np.array([[1.0, 0.5], [0.8, 0.6]]),
                    mixture_probs=np.array([0.3, 0.7]), seed=0)
    x = np.array([[0.5, 1.5], [2.0, 2.5]])
    dens = np.zeros(2)
    for k in range(2):
        comp = np.prod(
            np.exp(-0.5 * ((x - spec.means[k]) / spec.stds[k]) ** 2)
            / (spec.stds[k] * np.sqrt(2 * np.pi)), axis=1)
        dens += spec.mixture_probs[k] * comp
    assert np.allclose(log_prob_cmog(spec, x), np.log(dens), atol=1e-12)


def test_normalization_quadrature_1d():
    spec = make_cmog(1, 3, 11)
    total, _ = quad(lambda v: float(np.exp(log_prob_cmog(spec, np.array([[v]]))[0])),
                    -10.0, 20.0, limit=200)
    assert abs(total - 1.0) < 1e-6


def test_mixture_moments_analytic():
    spec = make_cmog(3, 3, 13)
    n = 100_000
    x = sample_cmog(spec, n, 17).data
    pi, mu, sd = spec.mixture_probs, spec.means, spec.stds
    mean = pi @ mu
    second = np.zeros((3, 3))
    for k in range(3):
        second += pi[k] * (np.diag(sd[k] ** 2) + np.outer(mu[k], mu[k]))
    cov = second - np.outer(mean, mean)
    se_mean = np.sqrt(np.diag(cov) / n)
    assert np.all(np.abs(x.mean(axis=0) - mean) < 5 * se_mean)
    # 5 standard errors on covariance entries (normal approximation)
    emp_cov = np.cov(x.T, bias=True)
    se_cov = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / n)
    assert np.all(np.abs(emp_cov - cov) < 5 * se_cov)


def test_base_log_prob_origin_2d():
    lp = log_prob_base(np.zeros((1, 2)))
    assert lp[0] == pytest.approx(-np.log(2 * np.pi), abs=1e-12)


def test_base_sample_variance():
    n = 40_000
    x = sample_base(3, n, 23).data
    assert np.all(np.abs(x.var(axis=0) - 1.0) < 5.0 / np.sqrt(n))


def test_base_equals_unit_cmog():
    spec = single_gaussian_spec(dim=3)
    x = np.random.default_rng(0).standard_normal((50, 3))
    assert np.allclose(log_prob_base(x), log_prob_cmog(spec, x), atol=1e-12)


def test_spec_json_roundtrip(tmp_path):
    spec = make_cmog(4, 3, 7)
    path = tmp_path / "spec.json"
    spec.save(path)
    loaded = CMoGSpec.load(path)
    assert np.array_equal(spec.means, loaded.means)
    assert np.array_equal(spec.stds, loaded.stds)
    assert np.array_equal(spec.mixture_probs, loaded.mixture_probs)
    assert loaded.seed == spec.seed


def test_sample_csv_roundtrip(tmp_path):
    batch = sample_cmog(make_cmog(3, 2, 1), 20, 2)
    path = tmp_path / "sample.csv"
    batch.to_csv(path)
    loaded = SampleBatch.from_csv(path)
    assert np.array_equal(batch.data, loaded.data)
    assert loaded.columns == batch.columns


def test_sample_batch_requires_2d():
    with pytest.raises(ValueError):
        SampleBatch(data=np.zeros(5))

import numpy as np
import pytest

from tensorprior.baseline import tucker_als_complete
from tensorprior.errors import ConfigError
from tensorprior.observation import ObservationSet
from tensorprior.synth import (MaskSpec, NoiseSpec, RadioMapSpec, add_noise, apply_mask,
                               emitter_psd, gen_radio_map, gen_smooth_field, sample_shadowing)


def _rank(m, tol=1e-9):
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol * s[0]))


def test_radio_map_is_positive_and_seeded():
    spec = RadioMapSpec(dims=(12, 12, 8), R=2, seed=3)
    X = gen_radio_map(spec)
    assert X.shape == (12, 12, 8) and np.all(X > 0)
    assert np.array_equal(X, gen_radio_map(RadioMapSpec(dims=(12, 12, 8), R=2, seed=3)))


def test_no_shadowing_gives_pure_path_loss():
    spec = RadioMapSpec(dims=(9, 9, 4), R=1, eta=0.0, gamma=2.0, locations=[[4, 4]], flat_psd=True)
    X = gen_radio_map(spec)
    i, j = np.meshgrid(np.arange(9.0), np.arange(9.0), indexing="ij")
    d = np.maximum(np.hypot(i - 4, j - 4), 1.0)
    for k in range(4):
        np.testing.assert_allclose(X[:, :, k], d ** -2.0, rtol=1e-14)


def test_single_emitter_flat_psd_is_rank_one_in_frequency():
    X = gen_radio_map(RadioMapSpec(dims=(10, 10, 6), R=1, flat_psd=True, seed=1))
    assert _rank(X.reshape(100, 6)) == 1


def test_emitter_psd_shape_and_positivity():
    psd = emitter_psd(16, 10, np.random.default_rng(0))
    assert psd.shape == (16,) and np.all(psd >= 0) and psd.max() > 0


def test_shadowing_covariance_monte_carlo():
    coords = np.stack(np.meshgrid(np.arange(12), np.arange(12), indexing="ij"), -1).reshape(-1, 2)
    eta, d_corr = 4.0, 3.0
    v = sample_shadowing(coords.astype(float), eta, d_corr, np.random.default_rng(0), size=200)
    # pool all pairs at lag d along mode 1 to average over the 200 realizations
    grid = v.reshape(200, 12, 12)
    for d in (1, 3):
        emp = np.mean(grid[:, d:, :] * grid[:, :-d, :])
        assert emp == pytest.approx(eta * np.exp(-d / d_corr), rel=0.10)


def test_radio_spec_validation():
    with pytest.raises(ConfigError):
        RadioMapSpec(R=0)
    with pytest.raises(ConfigError):
        RadioMapSpec(d_corr=0)
    with pytest.raises(ConfigError):
        RadioMapSpec(R=2, gammas=[2.0])
    with pytest.raises(ConfigError):
        gen_radio_map(RadioMapSpec(dims=(5, 5, 2), R=1, locations=[[7, 1]]))


def test_smooth_field_rank_and_seed():
    X1 = gen_smooth_field((9, 8, 7), seed=2, components=1)
    for mode in range(3):
        assert _rank(np.moveaxis(X1, mode, 0).reshape(X1.shape[mode], -1)) == 1
    assert np.max(np.abs(X1)) == pytest.approx(1.0)
    assert np.array_equal(X1, gen_smooth_field((9, 8, 7), seed=2, components=1))


def test_smooth_field_recovered_by_rank5_tucker():
    X = gen_smooth_field((20, 20, 20), seed=0, components=5)
    obs = ObservationSet.from_arrays(X, np.ones_like(X))
    fit = tucker_als_complete(obs, (5, 5, 5), iters=50)
    assert np.linalg.norm(fit.X - X) / np.linalg.norm(X) <= 1e-6


@pytest.mark.parametrize("rate", [0.1, 0.37, 1.0])
def test_element_mask_has_exact_count(rate):
    x = np.arange(1.0, 1.0 + 1000).reshape(10, 10, 10)
    Y, O = apply_mask(x, MaskSpec("element", rate, seed=4))
    assert O.sum() == np.floor(rate * 1000 + 1e-9)
    assert np.array_equal(Y, O * x)


def test_full_rate_observes_everything():
    x = np.random.default_rng(0).standard_normal((4, 5, 6))
    noisy = add_noise(x, NoiseSpec("gaussian", 0.1, 1))
    Y, O = apply_mask(noisy, MaskSpec("element", 1.0, 0))
    assert np.all(O == 1) and np.array_equal(Y, noisy)


def test_fiber_mask_structure():
    Y, O = apply_mask(np.ones((31, 31, 16)), MaskSpec("fiber", 0.15, seed=2))
    per_fiber = O.sum(axis=2)
    assert set(np.unique(per_fiber)) <= {0.0, 16.0}
    assert (per_fiber == 16).sum() == int(np.floor(0.15 * 961))


def test_mask_validation():
    with pytest.raises(ConfigError):
        MaskSpec("random", 0.1)
    with pytest.raises(ConfigError):
        MaskSpec("element", 0.0)
    with pytest.raises(ConfigError):
        apply_mask(np.ones((2, 2, 2)), MaskSpec("element", 0.1))


@pytest.mark.parametrize("kind", ["gaussian", "laplace"])
def test_noise_variance(kind):
    x = np.zeros((50, 50, 40))
    n = add_noise(x, NoiseSpec(kind, 0.2, seed=9))
    assert n.var() == pytest.approx(0.04, rel=0.03)
    assert abs(n.mean()) < 0.01


def test_noise_none_and_validation():
    x = np.ones((2, 2, 2))
    assert np.array_equal(add_noise(x, NoiseSpec()), x)
    assert NoiseSpec("laplace", 0.2).laplace_scale == pytest.approx(0.2 / np.sqrt(2))
    with pytest.raises(ConfigError):
        NoiseSpec("uniform", 0.1)
    with pytest.raises(ConfigError):
        NoiseSpec("gaussian", -0.1)

import struct
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tensorprior.errors import ConfigError, ShapeError
from tensorprior.ft3d import FT3DError, read_ft3d, write_ft3d
from tensorprior.metrics import evaluate_reconstruction, rmse, slice_rmse, slnre
from tensorprior.observation import ObservationSet


def test_rmse_cases(rng):
    x = rng.standard_normal((3, 4, 5))
    assert rmse(x, x) == 0.0
    assert rmse(x + 1.0, x) == pytest.approx(1.0, rel=1e-14)
    y = rng.standard_normal((3, 4, 5))
    acc = 0.0
    for idx in np.ndindex(x.shape):
        acc += (x[idx] - y[idx]) ** 2
    assert rmse(x, y) == pytest.approx((acc / x.size) ** 0.5, abs=1e-12)
    with pytest.raises(ShapeError):
        rmse(x, y[:2])


def test_slnre_cases(rng):
    t = rng.uniform(0.1, 5.0, (4, 4, 4))
    assert slnre(t, t) == 0.0
    expected = 100.0 * t.size / np.sum(np.log(t) ** 2)
    assert slnre(np.e * t, t) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([2.0, 10.0, 7.5]))
def test_slnre_base_invariance(seed, base):
    g = np.random.default_rng(seed)
    t = g.uniform(0.01, 10, (3, 3, 3))
    x = g.uniform(0.01, 10, (3, 3, 3))
    assert slnre(x, t, base=base) == pytest.approx(slnre(x, t), rel=1e-10)


def test_slnre_warns_on_non_positive_truth():
    t = np.ones((2, 2, 2))
    t[0, 0, 0] = 0.0
    with pytest.warns(RuntimeWarning):
        slnre(np.ones_like(t), t)
    res = evaluate_reconstruction(np.ones_like(t), t)
    assert res.warnings and res.slnre >= 0 and res.rmse >= 0


def test_slice_rmse(rng):
    x, y = rng.standard_normal((2, 3, 3, 4))
    s = slice_rmse(x, y)
    assert len(s) == 4
    assert s[2] == pytest.approx(np.sqrt(np.mean((x[:, :, 2] - y[:, :, 2]) ** 2)))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(allow_nan=True, allow_infinity=True)))
def test_ft3d_round_trip_is_bit_identical(tmp_path_factory, t):
    path = tmp_path_factory.mktemp("ft") / "t.ft3d"
    write_ft3d(path, t)
    back = read_ft3d(path)
    assert back.shape == t.shape
    assert back.tobytes() == np.ascontiguousarray(t).tobytes()


def test_ft3d_layout(tmp_path):
    t = np.arange(24.0).reshape(2, 3, 4)
    path = tmp_path / "t.ft3d"
    write_ft3d(path, t)
    raw = path.read_bytes()
    assert raw[:4] == b"FT3D"
    assert struct.unpack("<IQQQ", raw[4:32]) == (1, 2, 3, 4)
    # mode-3 index fastest: second value is t[0, 0, 1]
    assert struct.unpack("<2d", raw[32:48]) == (0.0, 1.0)


def test_ft3d_errors(tmp_path):
    bad = tmp_path / "bad.ft3d"
    bad.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(FT3DError):
        read_ft3d(bad)
    short = tmp_path / "short.ft3d"
    write_ft3d(short, np.ones((2, 2, 2)))
    short.write_bytes(short.read_bytes()[:-8])
    with pytest.raises(FT3DError):
        read_ft3d(short)
    with pytest.raises(FT3DError):
        write_ft3d(tmp_path / "m.ft3d", np.ones((2, 2)))


def test_observation_set_invariants(rng):
    X = rng.uniform(2.0, 5.0, (3, 3, 3))
    O = (rng.random((3, 3, 3)) < 0.5).astype(float)
    obs = ObservationSet.from_arrays(X, O)
    assert np.all(obs.Y[O == 0] == 0)
    assert obs.norm_lo == X[O == 1].min() and obs.norm_hi == X[O == 1].max()
    Yn = obs.normalized()
    assert Yn[O == 1].min() == pytest.approx(-0.95) and Yn[O == 1].max() == pytest.approx(0.95)
    np.testing.assert_allclose(obs.denormalize(Yn)[O == 1], X[O == 1])
    logged = obs.log_domain()
    np.testing.assert_allclose(logged.Y[O == 1], np.log(X[O == 1]))


def test_observation_set_validation():
    with pytest.raises(ConfigError):
        ObservationSet.from_arrays(np.ones((2, 2, 2)), np.full((2, 2, 2), 0.5))
    with pytest.raises(ConfigError):
        ObservationSet.from_arrays(np.ones((2, 2, 2)), np.zeros((2, 2, 2)))
    with pytest.raises(ShapeError):
        ObservationSet.from_arrays(np.ones((2, 2, 2)), np.ones((2, 2, 3)))
    obs = ObservationSet.from_arrays(-np.ones((2, 2, 2)), np.ones((2, 2, 2)))
    with pytest.raises(ConfigError):
        obs.log_domain()


def test_constant_observations_map_to_mid_range():
    obs = ObservationSet.from_arrays(np.full((2, 2, 2), 3.0), np.ones((2, 2, 2)))
    np.testing.assert_allclose(obs.normalized((0.025, 0.975)), 0.5)
    np.testing.assert_allclose(obs.denormalize(np.full((2, 2, 2), 0.5), (0.025, 0.975)), 3.0)

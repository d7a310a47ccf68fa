import json
import time

import numpy as np
import pytest

from tensorprior.cli import main
from tensorprior.ft3d import read_ft3d, write_ft3d


def _run(*args):
    return main([str(a) for a in args])


def _pipeline(d, seed=1):
    assert _run("generate", "--preset", "smoke", "--out", d / "f.ft3d") == 0
    assert _run("mask", "--in", d / "f.ft3d", "--rate", 0.3, "--noise", "gaussian:0.01",
                "--seed", seed, "--out", d / "y.ft3d", "--mask", d / "o.ft3d") == 0
    assert _run("reconstruct", "--obs", d / "y.ft3d", "--mask", d / "o.ft3d",
                "--window", "2,2,2", "--stride", "2,2,2", "--embed", 8, "--epochs", 150,
                "--seed", seed, "--out", d / "r.ft3d", "--trace", d / "t.csv",
                "--checkpoint", d / "m.bin") == 0
    assert _run("evaluate", "--recon", d / "r.ft3d", "--truth", d / "f.ft3d",
                "--json", d / "e.json") == 0


def test_smoke_round_trip(tmp_path):
    t0 = time.perf_counter()
    _pipeline(tmp_path)
    assert time.perf_counter() - t0 < 60
    res = json.loads((tmp_path / "e.json").read_text())
    assert res["rmse"] >= 0 and len(res["slice_rmse"]) == 8
    assert (tmp_path / "t.csv").read_text().count("\n") == 151


def test_pipeline_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    _pipeline(a)
    _pipeline(b)
    for name in ("f.ft3d", "y.ft3d", "o.ft3d", "r.ft3d", "m.bin"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_baseline_and_log_domain(tmp_path):
    assert _run("generate", "--kind", "radio", "--spec", _spec(tmp_path), "--out", tmp_path / "f.ft3d") == 0
    assert _run("mask", "--in", tmp_path / "f.ft3d", "--rate", 0.5, "--pattern", "fiber",
                "--out", tmp_path / "y.ft3d", "--mask", tmp_path / "o.ft3d") == 0
    assert _run("baseline", "--obs", tmp_path / "y.ft3d", "--mask", tmp_path / "o.ft3d",
                "--ranks", "2,2,2", "--log-domain", "--out", tmp_path / "b.ft3d") == 0
    assert np.all(read_ft3d(tmp_path / "b.ft3d") > 0)


def _spec(d):
    p = d / "spec.json"
    p.write_text(json.dumps({"dims": [8, 8, 4], "R": 2, "d_corr": 5.0, "seed": 2}))
    return p


def test_evaluate_dim_mismatch_exits_2(tmp_path):
    write_ft3d(tmp_path / "a.ft3d", np.ones((2, 2, 2)))
    write_ft3d(tmp_path / "b.ft3d", np.ones((2, 2, 3)))
    assert _run("evaluate", "--recon", tmp_path / "a.ft3d", "--truth", tmp_path / "b.ft3d") == 2


def test_non_tiling_window_exits_2_with_suggestion(tmp_path, capsys):
    write_ft3d(tmp_path / "y.ft3d", np.ones((8, 8, 8)))
    write_ft3d(tmp_path / "o.ft3d", np.ones((8, 8, 8)))
    code = _run("reconstruct", "--obs", tmp_path / "y.ft3d", "--mask", tmp_path / "o.ft3d",
                "--window", "3,3,3", "--stride", "2,2,2", "--out", tmp_path / "r.ft3d")
    assert code == 2
    err = capsys.readouterr().err
    assert "mode 1" in err and "window=" in err


def test_bad_inputs_exit_2(tmp_path):
    assert _run("evaluate", "--recon", tmp_path / "missing.ft3d", "--truth", tmp_path / "x") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run("generate", "--spec", bad, "--kind", "smooth", "--out", tmp_path / "f.ft3d") == 2
    bad.write_text(json.dumps({"dims": [4, 4, 4], "bogus": 1}))
    assert _run("generate", "--spec", bad, "--kind", "smooth", "--out", tmp_path / "f.ft3d") == 2
    with pytest.raises(SystemExit) as exc:
        _run("mask", "--in", "x", "--rate", 0.1, "--noise", "cauchy:1", "--out", "y", "--mask", "z")
    assert exc.value.code == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exits_3(tmp_path):
    write_ft3d(tmp_path / "y.ft3d", np.random.default_rng(0).uniform(-1, 1, (4, 4, 4)))
    write_ft3d(tmp_path / "o.ft3d", np.ones((4, 4, 4)))
    code = _run("reconstruct", "--obs", tmp_path / "y.ft3d", "--mask", tmp_path / "o.ft3d",
                "--window", "2,2,2", "--stride", "2,2,2", "--embed", 2, "--activation", "identity",
                "--lr", 1e300, "--epochs", 50, "--out", tmp_path / "r.ft3d")
    assert code == 3


def test_theory_subcommand(tmp_path, capsys):
    cfg = {"alpha": 2.0, "beta": 1.5, "T": 1.0, "eps": 1e-3, "delta": 0.05, "n_observed": 1600,
           "dims": [20, 20, 20], "core_dims": [81, 81, 81], "nu": 0.95, "v": 0.0, "s0": 1200,
           "N": 20, "measured": {"gap": 0.01, "noise_fro": 0.0, "masked_noise_fro": 0.0,
                                 "representation_error": 0.0}}
    p = tmp_path / "b.json"
    p.write_text(json.dumps(cfg))
    assert _run("theory", "--config", p, "--monte-carlo", 10000, "--json", tmp_path / "r.json") == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["checks"]["measured_gap_within_bound"] is True
    assert rep["support_law"]["N"] == 20
    assert "gap bound" in capsys.readouterr().out

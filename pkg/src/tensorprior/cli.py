"""Command-line driver: generate, mask, reconstruct, baseline, evaluate, theory.

Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np

from threadpoolctl import threadpool_limits

from .baseline import tucker_als_complete
from .errors import ConfigError, NumericError, ShapeError
from .ft3d import FT3DError, read_ft3d, write_ft3d
from .metrics import evaluate_reconstruction
from .model import ACTIVATIONS, ModelConfig, save_checkpoint
from .observation import ObservationSet
from .patches import make_grid
from .synth import (MaskSpec, NoiseSpec, RadioMapSpec, add_noise, apply_mask, gen_radio_map,
                    gen_smooth_field)
from .theory import BoundInputs, support_law_check, recoverability_report
from .train import TrainConfig, fit

log = logging.getLogger("tensorprior")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# small smooth field used for quick end-to-end checks
PRESETS = {
    "smoke": {"kind": "smooth", "dims": [8, 8, 8], "components": 2, "seed": 0},
    "desk": {"kind": "smooth", "dims": [20, 20, 20], "components": 5, "seed": 0},
    "radio": {"kind": "radio", "dims": [31, 31, 16], "R": 3, "d_corr": 50.0, "eta": 6.0, "seed": 0},
}


def _triple(text: str) -> tuple[int, int, int]:
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated integers, got {text!r}")
    if len(vals) != 3 or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive integers, got {text!r}")
    return vals


def _noise(text: str) -> tuple[str, float]:
    if text == "none":
        return "none", 0.0
    kind, _, level = text.partition(":")
    if kind not in ("gaussian", "laplace") or not level:
        raise argparse.ArgumentTypeError(f"noise must be none, gaussian:SIGMA or laplace:SIGMA, got {text!r}")
    try:
        sigma = float(level)
    except ValueError:
        raise argparse.ArgumentTypeError(f"noise level {level!r} is not a number")
    return kind, sigma


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_generate(args) -> int:
    spec = dict(PRESETS[args.preset]) if args.preset else {"kind": args.kind}
    if args.spec:
        spec.update(_read_json(args.spec))
    if args.kind:
        spec["kind"] = args.kind
    if args.seed is not None:
        spec["seed"] = args.seed
    kind = spec.pop("kind", None)
    try:
        if kind == "radio":
            X = gen_radio_map(RadioMapSpec(**spec))
        elif kind == "smooth":
            if "dims" not in spec:
                raise ConfigError("smooth spec needs 'dims'")
            X = gen_smooth_field(**spec)
        else:
            raise ConfigError(f"--kind must be radio or smooth, got {kind!r}")
    except TypeError as exc:  # unknown or missing spec fields
        raise ConfigError(f"bad {kind} spec: {exc}") from exc
    write_ft3d(args.out, X)
    log.info("wrote %s %s", args.out, X.shape)
    return EXIT_OK


def cmd_mask(args) -> int:
    X = read_ft3d(args.input)
    kind, sigma = args.noise
    noisy = add_noise(X, NoiseSpec(kind, sigma, seed=args.seed + 1))
    Y, O = apply_mask(noisy, MaskSpec(args.pattern, args.rate, seed=args.seed))
    write_ft3d(args.out, Y)
    write_ft3d(args.mask, O)
    log.info("observed %d of %d entries", int(O.sum()), O.size)
    return EXIT_OK


def _load_obs(args) -> ObservationSet:
    Y = read_ft3d(args.obs)
    O = read_ft3d(args.mask)
    return ObservationSet.from_arrays(Y, O, {"obs": args.obs, "mask": args.mask})


def cmd_reconstruct(args) -> int:
    obs = _load_obs(args)
    grid = make_grid(obs.Y.shape, args.window, args.stride)
    if args.model == "tap":
        if args.heads not in (None, (1, 1, 1)):
            raise ConfigError("--heads applies to --model mhtap; tap always uses one head")
        heads = (1, 1, 1)
    else:
        heads = args.heads or (2, 2, 2)
    mcfg = ModelConfig(grid, args.embed, heads, args.activation, args.normalizer, args.seed)
    tcfg = TrainConfig(learning_rate=args.lr, max_epochs=args.epochs, rel_tol=args.rel_tol,
                       tv_weight=args.tv, seed=args.seed)
    res = fit(obs.log_domain() if args.log_domain else obs, mcfg, tcfg)
    write_ft3d(args.out, np.exp(res.X) if args.log_domain else res.X)
    if args.trace:
        res.trace.to_csv(args.trace)
    if args.checkpoint:
        save_checkpoint(args.checkpoint, res.params, mcfg,
                        {"train": tcfg.__dict__, "norm": [obs.norm_lo, obs.norm_hi]})
    log.info("%d epochs, final loss %.6g", res.epochs, res.trace.loss[-1])
    return EXIT_OK


def cmd_baseline(args) -> int:
    obs = _load_obs(args)
    res = tucker_als_complete(obs.log_domain() if args.log_domain else obs, args.ranks,
                              iters=args.iters, tol=args.tol)
    write_ft3d(args.out, np.exp(res.X) if args.log_domain else res.X)
    log.info("%d rounds", len(res.change))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    x = read_ft3d(args.recon)
    truth = read_ft3d(args.truth)
    if x.shape != truth.shape:
        raise ShapeError(f"reconstruction {x.shape} and truth {truth.shape} differ in shape")
    res = evaluate_reconstruction(x, truth, config={"recon": args.recon, "truth": args.truth})
    out = res.to_dict()
    if args.metric != "all":
        out = {k: v for k, v in out.items() if k not in ("rmse", "slnre") or k == args.metric}
    for w in res.warnings:
        log.warning(w)
    if args.json:
        _write_json(args.json, out)
    print(json.dumps({k: out[k] for k in ("rmse", "slnre") if k in out}))
    return EXIT_OK


def cmd_theory(args) -> int:
    cfg = _read_json(args.config)
    measured = cfg.pop("measured", None)
    N = int(cfg.pop("N", 100))
    support_law = support_law_check(N, args.monte_carlo, args.seed) if args.monte_carlo else {}
    rep = recoverability_report(BoundInputs.from_dict(cfg), measured, support_law)
    d = rep.to_dict()
    if args.json:
        _write_json(args.json, d)
    rows = [("omega", rep.omega), ("xi", rep.xi), ("log covering number", rep.covering_log_bound),
            ("gap bound", rep.gap_bound), ("noise term", rep.noise_term),
            ("representation term", rep.representation_term), ("recovery bound", rep.recovery_bound)]
    for name, val in rows:
        print(f"{name:<22} {'-' if val is None else f'{val:.6g}'}")
    for name, ok in rep.checks.items():
        print(f"{name:<22} {ok}")
    if support_law:
        print(f"{'support law TV':<22} {support_law['tv_distance']:.4f} (passed={support_law['passed']})")
        if "discrepancy" in support_law:
            print(support_law["discrepancy"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tensorprior", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="BLAS threads (1 keeps runs bit-reproducible)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic ground-truth field")
    g.add_argument("--kind", choices=("radio", "smooth"))
    g.add_argument("--spec", help="JSON file with generator fields")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    m = sub.add_parser("mask", help="add noise and subsample a field")
    m.add_argument("--in", dest="input", required=True)
    m.add_argument("--rate", type=float, required=True)
    m.add_argument("--pattern", choices=("element", "fiber"), default="element")
    m.add_argument("--noise", type=_noise, default=("none", 0.0))
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.add_argument("--mask", required=True)
    m.set_defaults(func=cmd_mask)

    r = sub.add_parser("reconstruct", help="fit the attention prior to observations")
    r.add_argument("--obs", required=True)
    r.add_argument("--mask", required=True)
    r.add_argument("--model", choices=("tap", "mhtap"), default="tap")
    r.add_argument("--window", type=_triple, default=(4, 4, 4))
    r.add_argument("--stride", type=_triple, default=(2, 2, 2))
    r.add_argument("--embed", type=int, default=64)
    r.add_argument("--heads", type=_triple)
    r.add_argument("--activation", choices=ACTIVATIONS, default="tanh")
    r.add_argument("--normalizer", choices=("sparsemax", "softmax"), default="sparsemax")
    r.add_argument("--lr", type=float, default=4e-3)
    r.add_argument("--epochs", type=int, default=2000)
    r.add_argument("--rel-tol", type=float, default=1e-6)
    r.add_argument("--tv", type=float, default=0.0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--log-domain", action="store_true", help="fit log values (positive fields)")
    r.add_argument("--trace")
    r.add_argument("--checkpoint")
    r.set_defaults(func=cmd_reconstruct)

    b = sub.add_parser("baseline", help="masked Tucker-ALS completion")
    b.add_argument("--obs", required=True)
    b.add_argument("--mask", required=True)
    b.add_argument("--ranks", type=_triple, default=(5, 5, 5))
    b.add_argument("--iters", type=int, default=500)
    b.add_argument("--tol", type=float, default=1e-10)
    b.add_argument("--log-domain", action="store_true", help="fit log values (positive fields)")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_baseline)

    e = sub.add_parser("evaluate", help="score a reconstruction against ground truth")
    e.add_argument("--recon", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--metric", choices=("rmse", "slnre", "all"), default="all")
    e.add_argument("--json")
    e.set_defaults(func=cmd_evaluate)

    t = sub.add_parser("theory", help="evaluate the sparsity law and generalization bounds")
    t.add_argument("--config", required=True, help="JSON with bound inputs, optional N and measured")
    t.add_argument("--monte-carlo", type=int, default=0, help="trials for the support-law check")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--json")
    t.set_defaults(func=cmd_theory)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        with threadpool_limits(limits=args.threads):
            code = args.func(args)
    except (ConfigError, ShapeError, FT3DError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())

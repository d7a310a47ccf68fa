"""Initialization, Adam, and the self-supervised fitting loop."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attention import AttentionHead
from .errors import ConfigError, NumericError
from .grad import evaluate
from .model import ModelConfig, ModelParams, forward, output_range
from .observation import ObservationSet
from .patches import extract

__all__ = [
    "TrainConfig",
    "TrainTrace",
    "AdamState",
    "FitResult",
    "init_params",
    "adam_step",
    "fit",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 4e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_epochs: int = 2000
    rel_tol: float = 1e-6
    window: int = 50
    tv_weight: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.max_epochs < 1 or self.window < 1:
            raise ConfigError("max_epochs and window must be >= 1")
        if self.tv_weight < 0:
            raise ConfigError("tv_weight must be non-negative")


@dataclass
class TrainTrace:
    loss: list[float] = field(default_factory=list)
    nonzero_fraction: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.loss)

    def append(self, loss: float, nnz: float, seconds: float) -> None:
        self.loss.append(loss)
        self.nonzero_fraction.append(nnz)
        self.seconds.append(seconds)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "loss", "nonzero_fraction", "seconds"])
            for e, row in enumerate(zip(self.loss, self.nonzero_fraction, self.seconds), start=1):
                w.writerow([e, repr(row[0]), repr(row[1]), f"{row[2]:.6f}"])


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls([np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()])


@dataclass
class FitResult:
    params: ModelParams
    trace: TrainTrace
    X: np.ndarray  # reconstruction in data units
    X_normalized: np.ndarray  # model output in the working range
    model_config: ModelConfig
    train_config: TrainConfig
    epochs: int
    stopped_early: bool


def _uniform(rng: np.random.Generator, shape) -> np.ndarray:
    # Kaiming-uniform with unit gain: bound sqrt(1 / fan_in), fan_in = row count
    bound = np.sqrt(1.0 / shape[0])
    return rng.uniform(-bound, bound, size=shape)


def init_params(config: ModelConfig) -> ModelParams:
    rng = np.random.default_rng(config.seed)
    width = config.grid.cube_size
    heads = []
    for _ in range(config.n_heads):
        wq = _uniform(rng, (width, config.M_dim))
        wk = _uniform(rng, (width, config.M_dim))
        heads.append(AttentionHead(wq, wk))
    V = [_uniform(rng, (i, r)) for i, r in zip(config.grid.field_dims, config.core_dims)]
    return ModelParams(heads, V[0], V[1], V[2], config.heads_shape, config.activation,
                       config.normalizer)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, t: int,
              cfg: TrainConfig) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; returns new parameter and state objects."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        step = cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)
        new_p.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return params.with_arrays(new_p), AdamState(new_m, new_v)


def _converged(losses: list[float], window: int, rel_tol: float) -> bool:
    if len(losses) <= window:
        return False
    before = min(losses[:-window])
    recent = min(losses[-window:])
    return (before - recent) <= rel_tol * max(abs(before), 1e-300)


def fit(obs: ObservationSet, model_cfg: ModelConfig, train_cfg: TrainConfig = TrainConfig(),
        init: ModelParams | None = None) -> FitResult:
    """Fit the model to the observed entries and return the full reconstruction."""
    if obs.n_observed < 1:
        raise ConfigError("mask has no observed entries")
    if obs.Y.shape != model_cfg.grid.field_dims:
        raise ConfigError(f"observation dims {obs.Y.shape} differ from grid {model_cfg.grid.field_dims}")
    target = output_range(model_cfg.activation)
    Yn = obs.normalized(target)
    O = obs.O
    patches = extract(Yn, model_cfg.grid)
    params = init if init is not None else init_params(model_cfg)
    state = AdamState.zeros_like(params)
    trace = TrainTrace()
    t0 = time.perf_counter()
    stopped_early = False
    for epoch in range(1, train_cfg.max_epochs + 1):
        loss, grads, cache = evaluate(params, patches, Yn, O, train_cfg.tv_weight)
        if not np.isfinite(loss):
            raise NumericError(
                f"non-finite loss at epoch {epoch} (last finite loss "
                f"{trace.loss[-1] if trace.loss else 'n/a'}); try a smaller learning rate"
            )
        trace.append(loss, cache.attention.nonzero_fraction, time.perf_counter() - t0)
        params, state = adam_step(params, grads, state, epoch, train_cfg)
        if _converged(trace.loss, train_cfg.window, train_cfg.rel_tol):
            stopped_early = True
            log.info("converged after %d epochs (loss %.6g)", epoch, loss)
            break
    Xn, _ = forward(params, patches)
    if not np.all(np.isfinite(Xn)):
        raise NumericError("reconstruction contains non-finite values")
    return FitResult(params, trace, obs.denormalize(Xn, target), Xn, model_cfg, train_cfg,
                     len(trace), stopped_early)

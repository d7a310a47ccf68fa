"""Reconstruction error metrics."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeError

LOG_FLOOR = 1e-12


def _check(x, x_true):
    x = np.asarray(x, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if x.shape != x_true.shape:
        raise ShapeError(f"dimension mismatch: {x.shape} vs {x_true.shape}")
    return x, x_true


def rmse(x, x_true) -> float:
    x, x_true = _check(x, x_true)
    return float(np.sqrt(np.mean((x - x_true) ** 2)))


def slnre(x, x_true, base: float = np.e) -> float:
    """``100 * ||log x - log x_true||_F^2 / ||log x_true||_F^2``.

    Both inputs are clamped at ``LOG_FLOOR`` first; a warning is raised when the
    ground truth needed clamping.
    """
    x, x_true = _check(x, x_true)
    if np.any(x_true <= 0):
        warnings.warn("ground truth has non-positive entries; clamped before log", RuntimeWarning)
    lx = np.log(np.maximum(x, LOG_FLOOR)) / np.log(base)
    lt = np.log(np.maximum(x_true, LOG_FLOOR)) / np.log(base)
    return float(100.0 * np.sum((lx - lt) ** 2) / np.sum(lt ** 2))


def slice_rmse(x, x_true) -> list[float]:
    """RMSE of every mode-3 slice."""
    x, x_true = _check(x, x_true)
    return np.sqrt(np.mean((x - x_true) ** 2, axis=(0, 1))).tolist()


@dataclass
class EvalResult:
    rmse: float
    slnre: float | None
    slice_rmse: list[float]
    runtime: float = 0.0
    config: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_reconstruction(x, x_true, runtime: float = 0.0, config: dict | None = None) -> EvalResult:
    x, x_true = _check(x, x_true)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = slnre(x, x_true)
    notes += [str(w.message) for w in caught]
    return EvalResult(rmse(x, x_true), s, slice_rmse(x, x_true), runtime, dict(config or {}), notes)

"""Masked Tucker completion by EM-style imputation around HOOI sweeps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .observation import ObservationSet
from .tensor import mode_product, unfold

__all__ = ["TuckerFit", "hooi_sweep", "tucker_reconstruct", "tucker_als_complete"]


@dataclass
class TuckerFit:
    core: np.ndarray
    factors: list[np.ndarray]  # orthonormal columns
    X: np.ndarray  # full reconstruction
    observed_residual: list[float] = field(default_factory=list)
    change: list[float] = field(default_factory=list)


def _leading_left(m: np.ndarray, r: int) -> np.ndarray:
    u, _, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, :r]


def hooi_sweep(X: np.ndarray, factors: list[np.ndarray], ranks) -> list[np.ndarray]:
    """One alternating pass over the three modes, warm-started from ``factors``."""
    U = list(factors)
    for l in range(3):
        t = X
        for k in range(3):
            if k != l:
                t = mode_product(t, U[k].T, k + 1)
        U[l] = _leading_left(unfold(t, l + 1), ranks[l])
    return U


def tucker_reconstruct(core: np.ndarray, factors) -> np.ndarray:
    out = core
    for l, U in enumerate(factors, start=1):
        out = mode_product(out, U, l)
    return out


def _project(X, U):
    core = X
    for l, u in enumerate(U, start=1):
        core = mode_product(core, u.T, l)
    return core


def tucker_als_complete(obs: ObservationSet, ranks, iters: int = 500, tol: float = 1e-10) -> TuckerFit:
    """Fill the missing entries with a rank-``ranks`` Tucker model.

    Missing entries start at the observed mean; each round runs one HOOI sweep
    on the filled tensor, reconstructs, and re-imputes the missing entries from
    the reconstruction. Stops when the reconstruction changes by less than
    ``tol`` (relative) or after ``iters`` rounds.
    """
    ranks = tuple(int(r) for r in ranks)
    dims = obs.Y.shape
    if len(ranks) != 3 or any(r < 1 or r > d for r, d in zip(ranks, dims)):
        raise ConfigError(f"ranks {ranks} must lie between 1 and the dims {dims}")
    O = obs.O
    Y = obs.Y
    filled = np.where(O == 1.0, Y, Y[O == 1.0].mean())
    U = [_leading_left(unfold(filled, l), r) for l, r in zip((1, 2, 3), ranks)]
    fit = TuckerFit(None, U, None)
    prev = None
    for _ in range(iters):
        U = hooi_sweep(filled, U, ranks)
        core = _project(filled, U)
        R = tucker_reconstruct(core, U)
        fit.observed_residual.append(float(np.linalg.norm(O * (Y - R))))
        change = np.inf if prev is None else np.linalg.norm(R - prev) / max(np.linalg.norm(prev), 1e-300)
        fit.change.append(float(change))
        fit.core, fit.factors, fit.X = core, U, R
        prev = R
        filled = np.where(O == 1.0, Y, R)
        if change < tol:
            break
    return fit

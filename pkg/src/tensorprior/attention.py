"""Norm-scaled query/key similarity and row-wise SparseMax."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

__all__ = [
    "NORM_FLOOR",
    "AttentionHead",
    "AttentionMap",
    "scaling_matrix",
    "sparsemax",
    "sparsemax_rows",
    "softmax_rows",
    "similarity",
    "attention_map",
]

NORM_FLOOR = 1e-12


@dataclass
class AttentionHead:
    W_Q: np.ndarray  # (K1K2K3, M)
    W_K: np.ndarray  # (K1K2K3, M)

    @property
    def M_dim(self) -> int:
        return self.W_Q.shape[1]


@dataclass
class AttentionMap:
    S: np.ndarray  # (rows, N), rows == h * N
    support: np.ndarray  # bool, same shape as S
    tau: np.ndarray  # (rows,)

    @property
    def support_count(self) -> np.ndarray:
        return self.support.sum(axis=1)

    @property
    def nonzero_fraction(self) -> float:
        return float(self.support.sum()) / self.S.size


def scaling_matrix(Q: np.ndarray, K: np.ndarray) -> np.ndarray:
    """``M[a, b] = max(||Q[a]|| * ||K[b]||, NORM_FLOOR)``."""
    if Q.shape[1] != K.shape[1]:
        raise ShapeError(f"Q and K need equal column counts, got {Q.shape} and {K.shape}")
    qn = np.linalg.norm(Q, axis=1)
    kn = np.linalg.norm(K, axis=1)
    return np.maximum(np.outer(qn, kn), NORM_FLOOR)


def sparsemax_rows(Z: np.ndarray):
    """Row-wise SparseMax of a 2-D array.

    Returns ``(P, support, tau)``; ``support`` marks the ``n(z)`` leading entries of
    each row, i.e. where ``P > 0``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    rows, n = Z.shape
    zs = -np.sort(-Z, axis=1)
    cums = np.cumsum(zs, axis=1)
    k = np.arange(1, n + 1)
    ok = 1.0 + k * zs > cums
    n_sup = np.max(np.where(ok, k, 0), axis=1)  # k = 1 always qualifies
    tau = (cums[np.arange(rows), n_sup - 1] - 1.0) / n_sup
    # tied scores are either all inside or all outside the support, so the
    # threshold test needs no tie-breaking order
    P = np.maximum(Z - tau[:, None], 0.0)
    return P, P > 0.0, tau


def sparsemax(z):
    """SparseMax of one vector: ``(p, n_support, tau)``."""
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    P, support, tau = sparsemax_rows(z)
    return P[0], int(support[0].sum()), float(tau[0])


def softmax_rows(Z: np.ndarray) -> np.ndarray:
    e = np.exp(Z - Z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def similarity(P: np.ndarray, head: AttentionHead):
    """Scores ``(Q K^T) / M`` for one head; also returns ``Q, K, M``."""
    if P.shape[1] != head.W_Q.shape[0] or P.shape[1] != head.W_K.shape[0]:
        raise ShapeError(
            f"patch width {P.shape[1]} does not match projections "
            f"{head.W_Q.shape} / {head.W_K.shape}"
        )
    Q = P @ head.W_Q
    K = P @ head.W_K
    M = scaling_matrix(Q, K)
    return (Q @ K.T) / M, Q, K, M


def attention_map(P: np.ndarray, heads: list[AttentionHead], normalizer: str = "sparsemax") -> AttentionMap:
    """Stack the per-head score matrices vertically and normalize each row.

    ``normalizer="softmax"`` is the dense ablation; its support is every entry.
    """
    if not heads:
        raise ShapeError("at least one attention head is required")
    Z = np.vstack([similarity(P, h)[0] for h in heads])
    if normalizer == "sparsemax":
        S, support, tau = sparsemax_rows(Z)
    elif normalizer == "softmax":
        S = softmax_rows(Z)
        support = np.ones(S.shape, dtype=bool)
        tau = np.full(S.shape[0], np.nan)
    else:
        raise ValueError(f"unknown normalizer {normalizer!r}")
    return AttentionMap(S, support, tau)

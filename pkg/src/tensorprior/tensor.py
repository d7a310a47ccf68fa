"""Dense third-order tensor helpers.

Tensors are plain ``float64`` numpy arrays of shape ``(I1, I2, I3)`` in C order,
so the mode-3 index is fastest. Modes are numbered 1, 2, 3 as in the usual
Tucker notation.
"""
from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = [
    "as_tensor",
    "mode_product",
    "unfold",
    "fold",
    "hadamard",
    "fro_norm",
    "axpy",
    "scale",
    "sub",
]


def _check_mode(mode: int) -> int:
    if mode not in (1, 2, 3):
        raise ShapeError(f"mode must be 1, 2 or 3, got {mode!r}")
    return mode - 1


def as_tensor(x) -> np.ndarray:
    t = np.ascontiguousarray(x, dtype=np.float64)
    if t.ndim != 3:
        raise ShapeError(f"expected a third-order tensor, got ndim={t.ndim}")
    return t


def mode_product(t: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Contract index ``mode`` of ``t`` with the columns of ``m``.

    ``result[..., j, ...] = sum_k t[..., k, ...] * m[j, k]``
    """
    ax = _check_mode(mode)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != t.shape[ax]:
        raise ShapeError(
            f"mode-{mode} product needs a matrix with {t.shape[ax]} columns, got shape {m.shape}"
        )
    out = np.tensordot(m, t, axes=(1, ax))  # new axis lands in front
    return np.ascontiguousarray(np.moveaxis(out, 0, ax))


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization, shape ``(I_mode, prod(other dims))``.

    The remaining modes keep their relative order (C order), which makes
    ``fold(m @ unfold(t, l), l, ...) == mode_product(t, m, l)``.
    """
    ax = _check_mode(mode)
    return np.ascontiguousarray(np.moveaxis(t, ax, 0)).reshape(t.shape[ax], -1)


def fold(m: np.ndarray, mode: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold`; ``dims`` is the shape of the folded tensor."""
    ax = _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    rest = [d for i, d in enumerate(dims) if i != ax]
    if m.shape != (dims[ax], rest[0] * rest[1]):
        raise ShapeError(f"cannot fold matrix of shape {m.shape} into {dims} along mode {mode}")
    return np.ascontiguousarray(np.moveaxis(m.reshape(dims[ax], *rest), 0, ax))


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape(a, b)
    return a * b


def fro_norm(t: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(t))))


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``alpha * x + y``"""
    _same_shape(x, y)
    return alpha * x + y


def scale(alpha: float, x: np.ndarray) -> np.ndarray:
    return alpha * x


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape(a, b)
    return a - b

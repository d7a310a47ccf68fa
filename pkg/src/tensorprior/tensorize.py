"""Rearranging the attention map into the Tucker core.

Row ``n`` of a head's ``N x N`` map belongs to the cube at block position
``(m1, m2, m3)``; column ``c`` is the cube at ``(j1, j2, j3)``. The entry lands at

    core[a1*J1^2 + (m1-1)*J1 + (j1-1), a2*J2^2 + ..., a3*J3^2 + ...]   (0-based)

where ``(a1, a2, a3)`` is the head's position in the ``h1 x h2 x h3`` head grid
(row-major). With one head this is the single-head layout. The mapping is a
permutation of entries, so :func:`untensorize` inverts it exactly.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .attention import AttentionMap
from .errors import ConfigError, ShapeError
from .patches import PatchGrid

__all__ = [
    "core_dims",
    "core_source_index",
    "tensorize",
    "tensorize_tap",
    "tensorize_mhtap",
    "untensorize",
    "tensorize_by_permute",
    "core_position",
]


def core_dims(counts, heads_shape=(1, 1, 1)) -> tuple[int, int, int]:
    return tuple(int(h) * int(j) ** 2 for h, j in zip(heads_shape, counts))


def core_position(row: int, col: int, counts, heads_shape=(1, 1, 1)) -> tuple[int, int, int]:
    """0-based core index of map entry ``(row, col)`` from the closed-form rule."""
    j1, j2, j3 = counts
    h1, h2, h3 = heads_shape
    n_cubes = j1 * j2 * j3
    head, n = divmod(row, n_cubes)
    a1, rem = divmod(head, h2 * h3)
    a2, a3 = divmod(rem, h3)
    m1, rem = divmod(n, j2 * j3)
    m2, m3 = divmod(rem, j3)
    c1, rem = divmod(col, j2 * j3)
    c2, c3 = divmod(rem, j3)
    return (
        a1 * j1 * j1 + m1 * j1 + c1,
        a2 * j2 * j2 + m2 * j2 + c2,
        a3 * j3 * j3 + m3 * j3 + c3,
    )


@lru_cache(maxsize=16)
def _index_pair(counts: tuple, heads_shape: tuple) -> tuple[np.ndarray, np.ndarray]:
    j1, j2, j3 = counts
    h1, h2, h3 = heads_shape
    n_cubes = j1 * j2 * j3
    rows = np.arange(h1 * h2 * h3 * n_cubes)
    cols = np.arange(n_cubes)
    head, n = np.divmod(rows, n_cubes)
    a1, rem = np.divmod(head, h2 * h3)
    a2, a3 = np.divmod(rem, h3)
    m1, rem = np.divmod(n, j2 * j3)
    m2, m3 = np.divmod(rem, j3)
    c1, rem = np.divmod(cols, j2 * j3)
    c2, c3 = np.divmod(rem, j3)
    r1, r2, r3 = core_dims(counts, heads_shape)
    i1 = (a1 * j1 * j1 + m1 * j1)[:, None] + c1[None, :]
    i2 = (a2 * j2 * j2 + m2 * j2)[:, None] + c2[None, :]
    i3 = (a3 * j3 * j3 + m3 * j3)[:, None] + c3[None, :]
    dest = ((i1 * r2 + i2) * r3 + i3).ravel()  # map flat index -> core flat index
    src = np.empty_like(dest)
    src[dest] = np.arange(dest.size)  # core flat index -> map flat index
    dest.setflags(write=False)
    src.setflags(write=False)
    return dest, src


def core_source_index(counts, heads_shape=(1, 1, 1)) -> np.ndarray:
    """For every core entry (C order), the flat index of its attention-map entry."""
    return _index_pair(tuple(counts), tuple(heads_shape))[1]


def _as_matrix(m) -> np.ndarray:
    return m.S if isinstance(m, AttentionMap) else np.asarray(m, dtype=np.float64)


def tensorize(S, counts, heads_shape=(1, 1, 1)) -> np.ndarray:
    S = _as_matrix(S)
    counts = tuple(int(j) for j in counts)
    heads_shape = tuple(int(h) for h in heads_shape)
    if min(heads_shape) < 1:
        raise ConfigError(f"head grid entries must be >= 1, got {heads_shape}")
    n_cubes = counts[0] * counts[1] * counts[2]
    h = heads_shape[0] * heads_shape[1] * heads_shape[2]
    if S.shape != (h * n_cubes, n_cubes):
        raise ShapeError(
            f"attention map of shape {S.shape} does not fit {h} head(s) of "
            f"{n_cubes} cubes; expected {(h * n_cubes, n_cubes)}"
        )
    src = core_source_index(counts, heads_shape)
    return S.ravel()[src].reshape(core_dims(counts, heads_shape))


def tensorize_tap(S, grid: PatchGrid) -> np.ndarray:
    return tensorize(S, grid.counts)


def tensorize_mhtap(S, grid: PatchGrid, heads_shape) -> np.ndarray:
    return tensorize(S, grid.counts, heads_shape)


def untensorize(core: np.ndarray, counts, heads_shape=(1, 1, 1)) -> np.ndarray:
    """Inverse of :func:`tensorize`; also the adjoint used in backpropagation."""
    counts = tuple(int(j) for j in counts)
    heads_shape = tuple(int(h) for h in heads_shape)
    dims = core_dims(counts, heads_shape)
    if core.shape != dims:
        raise ShapeError(f"core of shape {core.shape} does not match expected {dims}")
    n_cubes = counts[0] * counts[1] * counts[2]
    h = heads_shape[0] * heads_shape[1] * heads_shape[2]
    dest = _index_pair(counts, heads_shape)[0]
    return core.ravel()[dest].reshape(h * n_cubes, n_cubes)


def tensorize_by_permute(S, counts, heads_shape=(1, 1, 1)) -> np.ndarray:
    """Reshape/transposition form of :func:`tensorize`, kept as a cross-check."""
    S = _as_matrix(S)
    j1, j2, j3 = counts
    h1, h2, h3 = heads_shape
    v = S.reshape(h1, h2, h3, j1, j2, j3, j1, j2, j3)
    v = v.transpose(0, 3, 6, 1, 4, 7, 2, 5, 8)
    return np.ascontiguousarray(v).reshape(core_dims(counts, heads_shape))

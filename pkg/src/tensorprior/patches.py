"""Sliding-window cube extraction.

A window of size ``(K1, K2, K3)`` moves over the field with stride
``(S1, S2, S3)``. The windows must tile each mode exactly; there is no padding.
Cubes are numbered ``n = 1..N`` with the mode-3 block index fastest, and each
cube is flattened in C order (mode-3 fastest) into one row of the patch matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

__all__ = [
    "PatchGrid",
    "PatchMatrix",
    "make_grid",
    "cube_index_to_block",
    "extract",
    "suggest_window_stride",
]


@dataclass(frozen=True)
class PatchGrid:
    field_dims: tuple[int, int, int]
    window: tuple[int, int, int]
    stride: tuple[int, int, int]
    counts: tuple[int, int, int]

    @property
    def N(self) -> int:
        j1, j2, j3 = self.counts
        return j1 * j2 * j3

    @property
    def cube_size(self) -> int:
        k1, k2, k3 = self.window
        return k1 * k2 * k3

    @property
    def core_dims(self) -> tuple[int, int, int]:
        """Tucker core dims for a single head, ``J_l ** 2`` per mode."""
        return tuple(j * j for j in self.counts)

    def to_dict(self) -> dict:
        return {"field_dims": list(self.field_dims), "window": list(self.window),
                "stride": list(self.stride)}


@dataclass(frozen=True)
class PatchMatrix:
    grid: PatchGrid
    P: np.ndarray  # (N, K1*K2*K3)


def suggest_window_stride(size: int, limit: int = 8) -> list[tuple[int, int]]:
    """Valid (window, stride) pairs for one mode.

    Follows the usual guideline ``K <= size // 3`` and ``S <= K // 2``; both are
    suggestions only. Pairs with ``J**2 > size`` (over-complete core) come first.
    """
    out = []
    for k in range(2, max(2, size // 3) + 1):
        for s in range(1, max(1, k // 2) + 1):
            if (size - k) % s == 0:
                out.append((k, s))
    out.sort(key=lambda ks: (((size - ks[0]) // ks[1] + 1) ** 2 <= size, -ks[0], ks[1]))
    return out[:limit]


def make_grid(field_dims, window, stride) -> PatchGrid:
    dims = tuple(int(v) for v in field_dims)
    win = tuple(int(v) for v in window)
    st = tuple(int(v) for v in stride)
    if not (len(dims) == len(win) == len(st) == 3):
        raise ConfigError("field_dims, window and stride must each have three entries")
    counts = []
    for l, (i, k, s) in enumerate(zip(dims, win, st), start=1):
        if i < 1 or k < 1:
            raise ConfigError(f"mode {l}: dimensions and window must be positive")
        if s < 1:
            raise ConfigError(f"mode {l}: stride must be >= 1, got {s}")
        if k > i:
            raise ConfigError(f"mode {l}: window {k} exceeds field size {i}")
        if (i - k) % s != 0:
            hint = ", ".join(f"window={kk} stride={ss}" for kk, ss in suggest_window_stride(i))
            raise ConfigError(
                f"mode {l}: window {k} with stride {s} does not tile size {i} exactly "
                f"((size - window) % stride must be 0). Valid choices: {hint or 'none'}"
            )
        counts.append((i - k) // s + 1)
    return PatchGrid(dims, win, st, tuple(counts))


def cube_index_to_block(n: int, grid: PatchGrid) -> tuple[int, int, int]:
    """1-based cube number -> 1-based block position ``(m1, m2, m3)``."""
    if not 1 <= n <= grid.N:
        raise ShapeError(f"cube index {n} outside 1..{grid.N}")
    _, j2, j3 = grid.counts
    r = n - 1
    return r // (j2 * j3) + 1, (r % (j2 * j3)) // j3 + 1, r % j3 + 1


def _window_starts(grid: PatchGrid) -> list[np.ndarray]:
    return [np.arange(j) * s for j, s in zip(grid.counts, grid.stride)]


def cube_entry_index(grid: PatchGrid) -> np.ndarray:
    """Flat field index of every patch-matrix entry, shape ``(N, K1*K2*K3)``."""
    s1, s2, s3 = _window_starts(grid)
    k1, k2, k3 = (np.arange(k) for k in grid.window)
    _, i2, i3 = grid.field_dims
    # (J1,J2,J3,K1,K2,K3) grid of coordinates, rows then flattened
    a = (s1[:, None, None, None, None, None] + k1[None, None, None, :, None, None])
    b = (s2[None, :, None, None, None, None] + k2[None, None, None, None, :, None])
    c = (s3[None, None, :, None, None, None] + k3[None, None, None, None, None, :])
    flat = (a * i2 + b) * i3 + c
    return flat.reshape(grid.N, grid.cube_size)


def extract(obs: np.ndarray, grid: PatchGrid) -> PatchMatrix:
    """Stack vectorized cubes of ``obs`` into the ``(N, K1K2K3)`` patch matrix."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != grid.field_dims:
        raise ShapeError(f"observation dims {obs.shape} do not match grid {grid.field_dims}")
    P = obs.ravel()[cube_entry_index(grid)]
    return PatchMatrix(grid, P)

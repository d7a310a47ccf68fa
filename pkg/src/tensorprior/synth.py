"""Synthetic ground-truth fields, sampling masks and measurement noise."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, NumericError

__all__ = [
    "RadioMapSpec",
    "MaskSpec",
    "NoiseSpec",
    "SHADOW_JITTER",
    "gen_radio_map",
    "sample_shadowing",
    "emitter_psd",
    "gen_smooth_field",
    "apply_mask",
    "add_noise",
]

SHADOW_JITTER = 1e-10


@dataclass
class RadioMapSpec:
    """Path loss + correlated log-normal shadowing, with a sinc^2 subband PSD.

    Per-emitter lists (``locations``, ``gammas``, ``etas``) may be left ``None``;
    locations are then drawn uniformly on the grid and the scalar defaults used.
    """

    dims: tuple[int, int, int] = (31, 31, 16)
    R: int = 3
    d_corr: float = 50.0
    eta: float = 6.0
    gamma: float = 2.0
    n_subbands: int = 10
    locations: list | None = None
    gammas: list | None = None
    etas: list | None = None
    flat_psd: bool = False
    seed: int = 0

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ConfigError(f"dims must be three positive integers, got {self.dims}")
        if self.R < 1:
            raise ConfigError("at least one emitter is required")
        if self.d_corr <= 0:
            raise ConfigError("decorrelation distance must be positive")
        for name in ("locations", "gammas", "etas"):
            v = getattr(self, name)
            if v is not None and len(v) != self.R:
                raise ConfigError(f"{name} needs {self.R} entries, got {len(v)}")
        if min(self.etas or [self.eta]) < 0:
            raise ConfigError("shadowing variance must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MaskSpec:
    kind: str = "element"  # "element" | "fiber"
    rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("element", "fiber"):
            raise ConfigError(f"mask pattern must be 'element' or 'fiber', got {self.kind!r}")
        if not 0 < self.rate <= 1:
            raise ConfigError(f"observation rate must lie in (0, 1], got {self.rate}")


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean additive noise with standard deviation ``sigma``."""

    kind: str = "none"  # "none" | "gaussian" | "laplace"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "laplace"):
            raise ConfigError(f"noise kind must be none, gaussian or laplace, got {self.kind!r}")
        if self.sigma < 0:
            raise ConfigError("noise level must be non-negative")

    @property
    def variance(self) -> float:
        return self.sigma ** 2

    @property
    def laplace_scale(self) -> float:
        return self.sigma / np.sqrt(2.0)


def sample_shadowing(coords: np.ndarray, eta: float, d_corr: float, rng: np.random.Generator,
                     size: int | None = None) -> np.ndarray:
    """Zero-mean Gaussian field with covariance ``eta * exp(-dist / d_corr)``.

    Drawn through a Cholesky factor of the full covariance; returns shape
    ``(len(coords),)`` or ``(size, len(coords))``.
    """
    n = len(coords)
    shape = (n,) if size is None else (size, n)
    if eta == 0:
        return np.zeros(shape)
    cov = eta * np.exp(-cdist(coords, coords) / d_corr)
    cov[np.diag_indices(n)] += SHADOW_JITTER
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError("shadowing covariance is not positive definite") from exc
    z = rng.standard_normal(shape)
    return z @ L.T


def emitter_psd(n_bins: int, n_subbands: int, rng: np.random.Generator) -> np.ndarray:
    """Sum of ``sinc^2((k - f) / w)`` bumps over integer bins ``k = 1..n_bins``."""
    amps = rng.uniform(0.5, 2.5, n_subbands)
    widths = rng.uniform(2.0, 4.0, n_subbands)
    centers = rng.choice(np.arange(1, n_bins + 1), size=n_subbands,
                         replace=n_subbands > n_bins)
    k = np.arange(1, n_bins + 1)[:, None]
    return np.sum(amps * np.sinc((k - centers) / widths) ** 2, axis=1)


def gen_radio_map(spec: RadioMapSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    i1, i2, i3 = spec.dims
    coords = np.stack(np.meshgrid(np.arange(i1), np.arange(i2), indexing="ij"), -1).reshape(-1, 2)
    if spec.locations is None:
        picks = rng.choice(i1 * i2, size=spec.R, replace=False)
        locations = coords[picks].astype(float)
    else:
        locations = np.asarray(spec.locations, dtype=float)
        if np.any(locations < 0) or np.any(locations[:, 0] > i1 - 1) or np.any(locations[:, 1] > i2 - 1):
            raise ConfigError("emitter locations must lie inside the grid")
    gammas = spec.gammas or [spec.gamma] * spec.R
    etas = spec.etas or [spec.eta] * spec.R
    X = np.zeros(spec.dims)
    for r in range(spec.R):
        dist = np.maximum(np.linalg.norm(coords - locations[r], axis=1), 1.0)
        shadow = sample_shadowing(coords, etas[r], spec.d_corr, rng)
        slf = (dist ** -gammas[r] * 10.0 ** (shadow / 10.0)).reshape(i1, i2)
        psd = np.ones(i3) if spec.flat_psd else emitter_psd(i3, spec.n_subbands, rng)
        X += slf[:, :, None] * psd[None, None, :]
    return X


def _smooth_vector(n: int, rng: np.random.Generator, max_freq: int) -> np.ndarray:
    x = np.linspace(0.0, 1.0, n)
    f = np.arange(max_freq + 1)
    coef = rng.standard_normal(max_freq + 1) / (1.0 + f)
    phase = rng.uniform(0, 2 * np.pi, max_freq + 1)
    return np.cos(np.pi * f[None, :] * x[:, None] + phase[None, :]) @ coef


def gen_smooth_field(dims, seed: int = 0, components: int = 5, amplitude: float = 1.0,
                     max_freq: int = 4) -> np.ndarray:
    """Sum of ``components`` separable terms with low-frequency cosine factors.

    Each factor is a random combination of ``cos(pi f x + phase)`` for
    ``f <= max_freq``. The field is scaled so its peak magnitude is ``amplitude``;
    no offset is added, so the multilinear rank stays at most ``components``.
    """
    dims = tuple(int(d) for d in dims)
    if components < 1:
        raise ConfigError("components must be >= 1")
    rng = np.random.default_rng(seed)
    X = np.zeros(dims)
    for _ in range(components):
        u = [_smooth_vector(n, rng, max_freq) for n in dims]
        X += rng.uniform(0.5, 1.5) * np.einsum("i,j,k->ijk", *u)
    peak = np.max(np.abs(X))
    return X * (amplitude / peak) if peak > 0 else X


def apply_mask(x: np.ndarray, m: MaskSpec) -> tuple[np.ndarray, np.ndarray]:
    """Observe an exact ``floor(rate * count)`` entries (or mode-3 fibers)."""
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(m.seed)
    i1, i2, i3 = x.shape
    O = np.zeros(x.shape)
    if m.kind == "element":
        count = int(np.floor(m.rate * x.size + 1e-9))
        if count < 1:
            raise ConfigError(f"rate {m.rate} observes no entries of a {x.shape} tensor")
        O.ravel()[rng.choice(x.size, size=count, replace=False)] = 1.0
    else:
        count = int(np.floor(m.rate * i1 * i2 + 1e-9))
        if count < 1:
            raise ConfigError(f"rate {m.rate} observes no fibers of a {i1}x{i2} grid")
        pos = rng.choice(i1 * i2, size=count, replace=False)
        O.reshape(i1 * i2, i3)[pos] = 1.0
    return O * x, O


def add_noise(x: np.ndarray, n: NoiseSpec) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if n.kind == "none" or n.sigma == 0:
        return x.copy()
    rng = np.random.default_rng(n.seed)
    if n.kind == "gaussian":
        return x + rng.normal(0.0, n.sigma, x.shape)
    return x + rng.laplace(0.0, n.laplace_scale, x.shape)

"""Observed field + mask, with the affine scaling used during fitting."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass
class ObservationSet:
    """Observations ``Y = O * (X + noise)`` and the binary mask ``O``.

    ``norm_lo``/``norm_hi`` are the extreme observed values; they define the
    affine map into the model's working range and back.
    """

    Y: np.ndarray
    O: np.ndarray
    norm_lo: float = 0.0
    norm_hi: float = 1.0
    provenance: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, Y, O, provenance: dict | None = None) -> "ObservationSet":
        Y = np.asarray(Y, dtype=np.float64)
        O = np.asarray(O, dtype=np.float64)
        if Y.shape != O.shape or Y.ndim != 3:
            raise ShapeError(f"observation {Y.shape} and mask {O.shape} must be equal 3-D shapes")
        if not np.all((O == 0.0) | (O == 1.0)):
            raise ConfigError("mask entries must be exactly 0 or 1")
        if not np.any(O):
            raise ConfigError("mask has no observed entries")
        Y = np.where(O == 1.0, Y, 0.0)
        vals = Y[O == 1.0]
        return cls(Y, O, float(vals.min()), float(vals.max()), dict(provenance or {}))

    @property
    def n_observed(self) -> int:
        return int(self.O.sum())

    @property
    def rate(self) -> float:
        return self.n_observed / self.O.size

    def affine(self, target=(-0.95, 0.95)) -> tuple[float, float]:
        """``(a, b)`` such that ``a * y + b`` maps observed values into ``target``."""
        lo, hi = target
        span = self.norm_hi - self.norm_lo
        if span <= 0:
            # one distinct value: map it to the middle of the target range
            return 1.0, 0.5 * (lo + hi) - self.norm_lo
        a = (hi - lo) / span
        return a, lo - a * self.norm_lo

    def normalized(self, target=(-0.95, 0.95)) -> np.ndarray:
        a, b = self.affine(target)
        return self.O * (a * self.Y + b)

    def denormalize(self, Xn: np.ndarray, target=(-0.95, 0.95)) -> np.ndarray:
        a, b = self.affine(target)
        return (Xn - b) / a

    def log_domain(self) -> "ObservationSet":
        """Same mask with observed values replaced by their natural log.

        Used for strictly positive, heavily skewed fields such as received
        power; reconstructions are mapped back with ``np.exp``.
        """
        vals = self.Y[self.O == 1.0]
        if np.any(vals <= 0):
            raise ConfigError("log-domain fitting needs strictly positive observed values")
        Y = np.zeros_like(self.Y)
        Y[self.O == 1.0] = np.log(vals)
        prov = dict(self.provenance, domain="log")
        return ObservationSet.from_arrays(Y, self.O, prov)

"""Attention-cored Tucker field model: forward pass, parameters, checkpoints."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attention import AttentionHead, AttentionMap, scaling_matrix, softmax_rows, sparsemax_rows
from .errors import ConfigError, ShapeError
from .patches import PatchGrid, PatchMatrix, make_grid
from .tensor import mode_product
from .tensorize import core_dims, tensorize

__all__ = [
    "ACTIVATIONS",
    "ModelConfig",
    "ModelParams",
    "Gradients",
    "ForwardCache",
    "activate",
    "activation_grad",
    "output_range",
    "forward",
    "parameter_count",
    "save_checkpoint",
    "load_checkpoint",
]

ACTIVATIONS = ("tanh", "sigmoid", "identity")


def activate(G: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(G)
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * G))
    if kind == "identity":
        return G.copy()
    raise ConfigError(f"unknown activation {kind!r}; choose one of {ACTIVATIONS}")


def activation_grad(X: np.ndarray, kind: str) -> np.ndarray:
    """Derivative of the activation expressed through its output ``X``."""
    if kind == "tanh":
        return 1.0 - X * X
    if kind == "sigmoid":
        return X * (1.0 - X)
    if kind == "identity":
        return np.ones_like(X)
    raise ConfigError(f"unknown activation {kind!r}")


def output_range(kind: str) -> tuple[float, float]:
    """Interval that observed data is scaled into before fitting.

    Kept 5% inside the saturating activations' range.
    """
    if kind == "sigmoid":
        return 0.025, 0.975
    return -0.95, 0.95


@dataclass(frozen=True)
class ModelConfig:
    grid: PatchGrid
    M_dim: int
    heads_shape: tuple[int, int, int] = (1, 1, 1)
    activation: str = "tanh"
    normalizer: str = "sparsemax"
    seed: int = 0

    def __post_init__(self):
        if self.M_dim < 1:
            raise ConfigError(f"embedding dimension must be >= 1, got {self.M_dim}")
        if len(self.heads_shape) != 3 or min(self.heads_shape) < 1:
            raise ConfigError(f"heads shape must be three integers >= 1, got {self.heads_shape}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.normalizer not in ("sparsemax", "softmax"):
            raise ConfigError(f"unknown normalizer {self.normalizer!r}")

    @property
    def n_heads(self) -> int:
        h1, h2, h3 = self.heads_shape
        return h1 * h2 * h3

    @property
    def core_dims(self) -> tuple[int, int, int]:
        return core_dims(self.grid.counts, self.heads_shape)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "M_dim": self.M_dim,
            "heads_shape": list(self.heads_shape),
            "activation": self.activation,
            "normalizer": self.normalizer,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        g = d["grid"]
        return cls(
            grid=make_grid(g["field_dims"], g["window"], g["stride"]),
            M_dim=int(d["M_dim"]),
            heads_shape=tuple(int(h) for h in d["heads_shape"]),
            activation=d["activation"],
            normalizer=d.get("normalizer", "sparsemax"),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class ModelParams:
    heads: list[AttentionHead]
    V1: np.ndarray
    V2: np.ndarray
    V3: np.ndarray
    heads_shape: tuple[int, int, int] = (1, 1, 1)
    activation: str = "tanh"
    normalizer: str = "sparsemax"

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Parameter arrays in declared order (also the checkpoint order)."""
        out = []
        for i, h in enumerate(self.heads):
            out.append((f"W_Q[{i}]", h.W_Q))
            out.append((f"W_K[{i}]", h.W_K))
        out += [("V1", self.V1), ("V2", self.V2), ("V3", self.V3)]
        return out

    def arrays(self) -> list[np.ndarray]:
        return [a for _, a in self.named_arrays()]

    def with_arrays(self, arrays) -> "ModelParams":
        arrays = list(arrays)
        h = len(self.heads)
        heads = [AttentionHead(arrays[2 * i], arrays[2 * i + 1]) for i in range(h)]
        return type(self)(heads, arrays[2 * h], arrays[2 * h + 1], arrays[2 * h + 2],
                          self.heads_shape, self.activation, self.normalizer)

    def copy(self) -> "ModelParams":
        return self.with_arrays(a.copy() for a in self.arrays())


class Gradients(ModelParams):
    """Same layout as :class:`ModelParams`, holding d(loss)/d(parameter)."""


@dataclass
class ForwardCache:
    params: ModelParams
    P: np.ndarray
    counts: tuple[int, int, int]
    Q: list[np.ndarray]
    K: list[np.ndarray]
    C: list[np.ndarray]  # Q K^T per head
    M: list[np.ndarray]  # scaling matrix per head
    attention: AttentionMap
    core: np.ndarray
    T1: np.ndarray  # core x1 V1
    T2: np.ndarray  # core x1 V1 x2 V2
    G: np.ndarray  # pre-activation output
    X: np.ndarray
    consumed: bool = field(default=False)


def _check_shapes(params: ModelParams, P: np.ndarray, counts) -> None:
    h = params.heads_shape[0] * params.heads_shape[1] * params.heads_shape[2]
    if len(params.heads) != h:
        raise ShapeError(f"{len(params.heads)} heads given for a {params.heads_shape} head grid")
    dims = core_dims(counts, params.heads_shape)
    for l, (V, r) in enumerate(zip((params.V1, params.V2, params.V3), dims), start=1):
        if V.ndim != 2 or V.shape[1] != r:
            raise ShapeError(f"V{l} has shape {V.shape}; needs {r} columns to match the core")
    for hd in params.heads:
        if hd.W_Q.shape[0] != P.shape[1] or hd.W_K.shape != hd.W_Q.shape:
            raise ShapeError("query/key projections do not match the patch width")


def forward(params: ModelParams, patches: PatchMatrix) -> tuple[np.ndarray, ForwardCache]:
    """Reconstruct the (normalized) field from the patch matrix."""
    P = patches.P
    counts = patches.grid.counts
    _check_shapes(params, P, counts)
    Qs, Ks, Cs, Ms, Zs = [], [], [], [], []
    for hd in params.heads:
        Q = P @ hd.W_Q
        K = P @ hd.W_K
        C = Q @ K.T
        M = scaling_matrix(Q, K)
        Qs.append(Q)
        Ks.append(K)
        Cs.append(C)
        Ms.append(M)
        Zs.append(C / M)
    Z = np.vstack(Zs)
    if params.normalizer == "softmax":
        S = softmax_rows(Z)
        attn = AttentionMap(S, np.ones(S.shape, dtype=bool), np.full(S.shape[0], np.nan))
    else:
        S, support, tau = sparsemax_rows(Z)
        attn = AttentionMap(S, support, tau)
    core = tensorize(S, counts, params.heads_shape)
    T1 = mode_product(core, params.V1, 1)
    T2 = mode_product(T1, params.V2, 2)
    G = mode_product(T2, params.V3, 3)
    X = activate(G, params.activation)
    cache = ForwardCache(params, P, counts, Qs, Ks, Cs, Ms, attn, core, T1, T2, G, X)
    return X, cache


def parameter_count(config: ModelConfig) -> int:
    h = config.n_heads
    if h < 1:
        raise ConfigError("at least one head is required")
    proj = 2 * h * config.grid.cube_size * config.M_dim
    vals = sum(i * r for i, r in zip(config.grid.field_dims, config.core_dims))
    return proj + vals


_CKPT_MAGIC = b"TAPM"
_CKPT_VERSION = 1


def save_checkpoint(path, params: ModelParams, config: ModelConfig, extra: dict | None = None) -> None:
    """Write ``magic | u32 version | u64 header length | JSON header | float64 data``.

    The header lists every parameter's name and shape in storage order; the data
    section is the concatenation of the C-order little-endian arrays.
    """
    named = params.named_arrays()
    header = {
        "config": config.to_dict(),
        "params": [{"name": n, "shape": list(a.shape)} for n, a in named],
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(Path(path), "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<IQ", _CKPT_VERSION, len(blob)))
        f.write(blob)
        for _, a in named:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelParams, ModelConfig, dict]:
    with open(Path(path), "rb") as f:
        if f.read(4) != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint")
        version, hlen = struct.unpack("<IQ", f.read(12))
        if version != _CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(f.read(hlen).decode("utf-8"))
        arrays = []
        for spec in header["params"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape))
            buf = f.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"{path}: truncated data for {spec['name']}")
            arrays.append(np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape))
    config = ModelConfig.from_dict(header["config"])
    h = config.n_heads
    heads = [AttentionHead(arrays[2 * i], arrays[2 * i + 1]) for i in range(h)]
    params = ModelParams(heads, arrays[2 * h], arrays[2 * h + 1], arrays[2 * h + 2],
                         config.heads_shape, config.activation, config.normalizer)
    return params, config, header.get("extra", {})

"""Reverse-mode gradients of the masked reconstruction loss.

Each forward stage has a matching hand-written adjoint:

* activation            dG = dX * act'(G)
* Tucker decode         dV_l and d(core) from the cached partial products
* tensorization         d(map) = untensorize(d(core))
* SparseMax             mean-centred on the support, zero elsewhere
* norm-scaled scores    quotient rule through ``(Q K^T) / (|q| |k|^T)``
* projections           dW = P^T dQ
"""
from __future__ import annotations

import numpy as np

from .attention import AttentionHead, NORM_FLOOR
from .errors import ShapeError
from .model import ForwardCache, Gradients, ModelParams, activation_grad, forward
from .patches import PatchMatrix
from .tensor import mode_product, unfold
from .tensorize import untensorize

__all__ = [
    "TV_SMOOTH",
    "sparsemax_backward",
    "softmax_backward",
    "scores_backward",
    "backward",
    "tv_value",
    "tv_value_and_grad",
    "loss_and_grad",
    "evaluate",
]

TV_SMOOTH = 1e-12


def sparsemax_backward(dP: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Vector-Jacobian product of row-wise SparseMax."""
    n = support.sum(axis=-1, keepdims=True)
    mean = np.where(support, dP, 0.0).sum(axis=-1, keepdims=True) / n
    return np.where(support, dP - mean, 0.0)


def softmax_backward(dP: np.ndarray, P: np.ndarray) -> np.ndarray:
    return P * (dP - np.sum(P * dP, axis=-1, keepdims=True))


def scores_backward(dZ, Q, K, C, M):
    """Adjoint of ``Z = (Q K^T) / M`` with ``M = |q_a| |k_b|``; returns ``(dQ, dK)``.

    Where the norm product sits at the floor, ``M`` is treated as a constant.
    """
    qn = np.linalg.norm(Q, axis=1)
    kn = np.linalg.norm(K, axis=1)
    dC = dZ / M
    live = np.outer(qn, kn) >= NORM_FLOOR
    dM = np.where(live, -dZ * C / (M * M), 0.0)
    dqn = dM @ kn
    dkn = dM.T @ qn
    with np.errstate(divide="ignore", invalid="ignore"):
        q_coef = np.where(qn > 0, dqn / qn, 0.0)
        k_coef = np.where(kn > 0, dkn / kn, 0.0)
    dQ = dC @ K + q_coef[:, None] * Q
    dK = dC.T @ Q + k_coef[:, None] * K
    return dQ, dK


def backward(cache: ForwardCache, dX: np.ndarray) -> Gradients:
    """Gradients of a scalar whose derivative w.r.t. the model output is ``dX``.

    A cache can be consumed only once.
    """
    if cache.consumed:
        raise RuntimeError("forward cache already consumed; run forward again")
    cache.consumed = True
    params = cache.params
    if dX.shape != cache.X.shape:
        raise ShapeError(f"dX shape {dX.shape} does not match output {cache.X.shape}")

    dG = dX * activation_grad(cache.X, params.activation)
    dV3 = unfold(dG, 3) @ unfold(cache.T2, 3).T
    dT2 = mode_product(dG, params.V3.T, 3)
    dV2 = unfold(dT2, 2) @ unfold(cache.T1, 2).T
    dT1 = mode_product(dT2, params.V2.T, 2)
    dV1 = unfold(dT1, 1) @ unfold(cache.core, 1).T
    dcore = mode_product(dT1, params.V1.T, 1)

    dS = untensorize(dcore, cache.counts, params.heads_shape)
    attn = cache.attention
    if params.normalizer == "softmax":
        dZ = softmax_backward(dS, attn.S)
    else:
        dZ = sparsemax_backward(dS, attn.support)

    n = cache.P.shape[0]
    heads = []
    for i, hd in enumerate(params.heads):
        dQ, dK = scores_backward(dZ[i * n:(i + 1) * n], cache.Q[i], cache.K[i], cache.C[i], cache.M[i])
        heads.append(AttentionHead(cache.P.T @ dQ, cache.P.T @ dK))
    return Gradients(heads, dV1, dV2, dV3, params.heads_shape, params.activation, params.normalizer)


def _tv_terms(X: np.ndarray):
    c = X[1:-1, 1:-1]
    dxx = X[2:, 1:-1] - 2.0 * c + X[:-2, 1:-1]
    dyy = X[1:-1, 2:] - 2.0 * c + X[1:-1, :-2]
    dxy = 0.25 * (X[2:, 2:] - X[2:, :-2] - X[:-2, 2:] + X[:-2, :-2])
    r = np.sqrt(dxx * dxx + dyy * dyy + 2.0 * dxy * dxy + TV_SMOOTH)
    return dxx, dyy, dxy, r


def tv_value(X: np.ndarray) -> float:
    """Second-order total variation summed over mode-3 slices.

    Second differences are taken along modes 1 and 2 at interior points only.
    The square root is smoothed and shifted so that a flat field scores 0.
    """
    if X.shape[0] < 3 or X.shape[1] < 3:
        return 0.0
    r = _tv_terms(X)[3]
    return float(np.sum(r - np.sqrt(TV_SMOOTH)))


def tv_value_and_grad(X: np.ndarray):
    g = np.zeros_like(X)
    if X.shape[0] < 3 or X.shape[1] < 3:
        return 0.0, g
    dxx, dyy, dxy, r = _tv_terms(X)
    gxx = dxx / r
    gyy = dyy / r
    gxy = 0.5 * dxy / r  # d r/d dxy = 2 dxy / r, times the 1/4 stencil weight
    g[2:, 1:-1] += gxx
    g[1:-1, 1:-1] -= 2.0 * gxx
    g[:-2, 1:-1] += gxx
    g[1:-1, 2:] += gyy
    g[1:-1, 1:-1] -= 2.0 * gyy
    g[1:-1, :-2] += gyy
    g[2:, 2:] += gxy
    g[2:, :-2] -= gxy
    g[:-2, 2:] -= gxy
    g[:-2, :-2] += gxy
    return float(np.sum(r - np.sqrt(TV_SMOOTH))), g


def evaluate(params: ModelParams, patches: PatchMatrix, Y: np.ndarray, O: np.ndarray,
             tv_weight: float = 0.0):
    """Loss, gradients and the (consumed) forward cache in one pass."""
    if tv_weight < 0:
        raise ValueError("tv_weight must be non-negative")
    X, cache = forward(params, patches)
    resid = O * (X - Y)
    loss = float(np.sum(resid * resid))
    dX = 2.0 * resid
    if tv_weight > 0:
        tv, gtv = tv_value_and_grad(X)
        loss += tv_weight * tv
        dX += tv_weight * gtv
    grads = backward(cache, dX)
    return loss, grads, cache


def loss_and_grad(params: ModelParams, patches: PatchMatrix, Y: np.ndarray, O: np.ndarray,
                  tv_weight: float = 0.0):
    """``||Y - O*X||_F^2 + tv_weight * TV(X)`` and its gradient.

    ``Y`` must already be zero where ``O`` is zero.
    """
    loss, grads, _ = evaluate(params, patches, Y, O, tv_weight)
    return loss, grads

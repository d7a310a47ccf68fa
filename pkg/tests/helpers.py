"""Shared oracles for the test suite."""
from __future__ import annotations

import numpy as np

from tensorprior.grad import loss_and_grad
from tensorprior.model import ModelConfig, forward
from tensorprior.patches import extract, make_grid
from tensorprior.train import init_params


def small_problem(seed: int, heads=(1, 1, 1), activation="tanh", dims=(6, 6, 6),
                  window=(3, 3, 3), stride=(3, 3, 3), M=4, rate=0.6):
    g = np.random.default_rng(seed)
    grid = make_grid(dims, window, stride)
    cfg = ModelConfig(grid, M, heads, activation, seed=seed)
    params = init_params(cfg)
    # larger value matrices keep the pre-activation away from a flat regime
    params = params.with_arrays([a if i < 2 * cfg.n_heads else 3.0 * a
                                 for i, a in enumerate(params.arrays())])
    O = (g.random(dims) < rate).astype(float)
    Y = O * g.uniform(-0.9, 0.9, dims)
    return params, extract(Y, grid), Y, O


def support_of(params, patches):
    return forward(params, patches)[1].attention.support


def fd_check(params, patches, Y, O, tv_weight, step=1e-5):
    """Central differences on every parameter entry.

    Probes whose +/- step evaluations change the SparseMax support are
    rejected (the Jacobian is undefined on support boundaries). Returns
    ``(max_err, n_checked, n_rejected)`` with err = |a - fd| / max(1, |fd|).
    """
    _, grads = loss_and_grad(params, patches, Y, O, tv_weight)
    base = params.arrays()
    ga = grads.arrays()
    worst, checked, rejected = 0.0, 0, 0
    for k, a in enumerate(base):
        for idx in np.ndindex(a.shape):
            vals = []
            sups = []
            for sign in (1.0, -1.0):
                arrs = [b.copy() for b in base]
                arrs[k][idx] += sign * step
                p = params.with_arrays(arrs)
                vals.append(loss_and_grad(p, patches, Y, O, tv_weight)[0])
                sups.append(support_of(p, patches))
            if not np.array_equal(sups[0], sups[1]):
                rejected += 1
                continue
            fd = (vals[0] - vals[1]) / (2.0 * step)
            worst = max(worst, abs(ga[k][idx] - fd) / max(1.0, abs(fd)))
            checked += 1
    return worst, checked, rejected

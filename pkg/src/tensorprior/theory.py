"""Sparsity law of SparseMax supports and generalization bounds.

Everything here is a numerical evaluation: the support-size distribution for
i.i.d. standard normal scores, its Monte-Carlo counterpart, the covering-number
bound of the solution set (kept in log space), the resulting bound on the gap
between observed-entry and full-tensor error, and a report combining them with
measured error terms.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import erfc

from .attention import sparsemax_rows
from .errors import ConfigError

__all__ = [
    "std_normal_cdf",
    "SupportDistribution",
    "support_distribution",
    "EmpiricalSupport",
    "monte_carlo_support",
    "total_variation",
    "support_law_check",
    "BoundInputs",
    "covering_log_bound",
    "omega",
    "xi",
    "gap_bound",
    "measured_gap",
    "TheoryReport",
    "recoverability_report",
    "ACTIVATION_LIPSCHITZ",
    "fit_bound_inputs",
]

ACTIVATION_LIPSCHITZ = {"tanh": 1.0, "sigmoid": 0.25, "identity": 1.0}


def std_normal_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


@dataclass
class SupportDistribution:
    N: int
    p: np.ndarray  # p[i-1] = P(n(z) = i)
    as_printed: bool = False

    @property
    def expectation(self) -> float:
        return float(np.sum(np.arange(1, self.N + 1) * self.p))

    @property
    def total(self) -> float:
        return float(np.sum(self.p))

    def expected_core_nonzeros(self) -> float:
        return self.N * self.expectation


def support_distribution(N: int, as_printed: bool = False) -> SupportDistribution:
    """Closed-form law of the SparseMax support size for i.i.d. N(0, 1) scores.

    ``P(n = 1) = 2 - 2 Phi(1/sqrt 2)``; for ``1 < n < N`` the probability is the
    stopping factor ``2 - 2 Phi(1/sqrt(2n))`` times the continuation factors
    ``2 Phi(1/sqrt(2i - 2)) - 1`` for ``i = 2..n``; ``P(n = N)`` is the product of
    all continuation factors. These telescope to a total of exactly 1.

    ``as_printed=True`` drops the square root inside the middle case's
    continuation factors, reproducing a published variant of the formula whose
    probabilities do not sum to one. It exists for comparison only.
    """
    if N < 2:
        raise ConfigError("support distribution needs N >= 2")
    i = np.arange(2, N + 1)
    cont = 2.0 * std_normal_cdf(1.0 / np.sqrt(2.0 * i - 2.0)) - 1.0
    cont_mid = 2.0 * std_normal_cdf(1.0 / (2.0 * i - 2.0)) - 1.0 if as_printed else cont
    p = np.empty(N)
    p[0] = 2.0 - 2.0 * std_normal_cdf(1.0 / math.sqrt(2.0))
    if N > 2:
        n = np.arange(2, N)
        stop = 2.0 - 2.0 * std_normal_cdf(1.0 / np.sqrt(2.0 * n))
        p[1:N - 1] = stop * np.cumprod(cont_mid)[: N - 2]
    p[N - 1] = np.prod(cont)
    return SupportDistribution(N, p, as_printed)


@dataclass
class EmpiricalSupport:
    N: int
    trials: int
    freq: np.ndarray  # freq[i-1] = fraction of trials with support size i

    @property
    def expectation(self) -> float:
        return float(np.sum(np.arange(1, self.N + 1) * self.freq))


def monte_carlo_support(N: int, trials: int, seed: int = 0, batch: int = 10_000) -> EmpiricalSupport:
    """Histogram of SparseMax support sizes over i.i.d. standard normal rows."""
    if N < 2:
        raise ConfigError("N must be >= 2")
    if trials < 10_000:
        raise ConfigError(f"need at least 10000 trials for a usable histogram, got {trials}")
    rng = np.random.default_rng(seed)
    counts = np.zeros(N + 1, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        _, support, _ = sparsemax_rows(rng.standard_normal((b, N)))
        counts += np.bincount(support.sum(axis=1), minlength=N + 1)
        done += b
    return EmpiricalSupport(N, trials, counts[1:] / trials)


def total_variation(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def support_law_check(N: int = 100, trials: int = 100_000, seed: int = 0,
                 tv_tol: float = 0.02, p1_tol: float = 0.01) -> dict:
    """Compare the closed-form support law with simulation; always returns a report."""
    closed = support_distribution(N)
    printed = support_distribution(N, as_printed=True)
    emp = monte_carlo_support(N, trials, seed)
    p1 = float(closed.p[0])
    tv = total_variation(closed.p, emp.freq)
    p1_err = abs(float(emp.freq[0]) - p1)
    passed = tv <= tv_tol and p1_err <= p1_tol
    report = {
        "N": N,
        "trials": trials,
        "seed": seed,
        "analytic_p1": p1,
        "empirical_p1": float(emp.freq[0]),
        "p1_abs_error": p1_err,
        "p1_tolerance": p1_tol,
        "tv_distance": tv,
        "tv_tolerance": tv_tol,
        "tv_distance_as_printed": total_variation(printed.p, emp.freq),
        "as_printed_total_probability": printed.total,
        "analytic_expectation": closed.expectation,
        "empirical_expectation": emp.expectation,
        "analytic_head": closed.p[:8].tolist(),
        "empirical_head": emp.freq[:8].tolist(),
        "passed": passed,
    }
    if not passed:
        report["discrepancy"] = (
            f"closed-form support law disagrees with simulation at N={N}: "
            f"P(n=1) {p1:.5f} vs {emp.freq[0]:.5f}, TV distance {tv:.4f} "
            f"(tolerance {tv_tol}); E[n] {closed.expectation:.4f} vs {emp.expectation:.4f}. "
            "The closed form treats successive sorted-score comparisons as independent "
            "and unconditioned on N; for N i.i.d. normals the top order statistics "
            "crowd together as N grows, so real supports are larger than predicted."
        )
    return report


@dataclass
class BoundInputs:
    alpha: float  # Frobenius bound on the core
    beta: float  # Frobenius bound on each factor matrix
    T: float  # Lipschitz constant of the activation
    eps: float  # net radius
    delta: float  # failure probability
    n_observed: int  # |Omega|
    dims: tuple[int, int, int]
    core_dims: tuple[int, int, int]
    nu: float  # max |ground truth|
    v: float  # max |noise|
    s0: float  # nonzeros of the core

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.core_dims = tuple(int(d) for d in self.core_dims)
        for name in ("alpha", "beta", "T", "eps", "s0"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.nu < 0 or self.v < 0:
            raise ConfigError("nu and v must be non-negative")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        total = self.dims[0] * self.dims[1] * self.dims[2]
        if not 1 <= self.n_observed <= total:
            raise ConfigError(f"|Omega| must lie in 1..{total}")

    @property
    def n_entries(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def factor_entries(self) -> int:
        return sum(n * i for n, i in zip(self.core_dims, self.dims))

    @classmethod
    def from_dict(cls, d: dict) -> "BoundInputs":
        keys = {f for f in cls.__dataclass_fields__}
        missing = keys - set(d)
        if missing:
            raise ConfigError(f"bound inputs missing: {sorted(missing)}")
        return cls(**{k: d[k] for k in keys})


def covering_log_bound(b: BoundInputs) -> float:
    """Natural log of the covering-number bound.

    ``(s0 + sum N_l I_l) log(3T(beta^3 + 3 alpha beta^2)/eps) + s0 log alpha
    + (sum N_l I_l) log beta``. The first log may be negative for large ``eps``.
    """
    if b.eps <= 0:
        raise ConfigError("eps must be positive")
    f = b.factor_entries
    radius = 3.0 * b.T * (b.beta ** 3 + 3.0 * b.alpha * b.beta ** 2) / b.eps
    return (b.s0 + f) * math.log(radius) + b.s0 * math.log(b.alpha) + f * math.log(b.beta)


def omega(b: BoundInputs) -> float:
    w = 1.0 / b.n_observed + 1.0 / (b.n_observed * b.n_entries) - 1.0 / b.n_entries
    if w <= 0:
        raise ConfigError(f"omega evaluated to {w}; expected a positive value")
    return w


def xi(b: BoundInputs) -> float:
    return (b.nu + b.v + b.alpha * b.beta ** 3) ** 2


def gap_bound(b: BoundInputs) -> float:
    """Bound on ``sup |Gap|`` holding with probability at least ``1 - delta``.

    A covering number is at least 1, so its log is clipped at 0 before use.
    """
    log_cover = max(covering_log_bound(b), 0.0)
    inner = xi(b) ** 2 * omega(b) / 2.0 * (math.log(2.0) + log_cover - math.log(b.delta))
    return 2.0 * b.eps / math.sqrt(b.n_observed) + inner ** 0.25


def measured_gap(X_model: np.ndarray, Y_full: np.ndarray, O: np.ndarray) -> float:
    """``sqrt(observed-entry MSE) - sqrt(full-tensor MSE)`` against ``Y_full``."""
    err = (Y_full - X_model) ** 2
    loss1 = float(np.sum(err * O) / np.sum(O))
    loss2 = float(np.mean(err))
    return math.sqrt(loss1) - math.sqrt(loss2)


@dataclass
class TheoryReport:
    inputs: dict
    omega: float
    xi: float
    covering_log_bound: float
    gap_bound: float
    noise_term: float | None = None
    representation_term: float | None = None
    recovery_bound: float | None = None
    measured: dict = field(default_factory=dict)
    support_law: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def recoverability_report(b: BoundInputs, measured: dict | None = None, support_law: dict | None = None) -> TheoryReport:
    """Assemble the three error sources of the recovery bound.

    ``measured`` may carry ``noise_fro`` (||N||_F), ``masked_noise_fro``
    (||O * N||_F), ``representation_error`` (||X~* - X||_F, a caller proxy),
    ``gap`` (measured Gap on the fitted model) and ``recovery_error``
    (||X* - X||_F / sqrt(I)).
    """
    measured = dict(measured or {})
    g = gap_bound(b)
    rep = TheoryReport(asdict(b), omega(b), xi(b), covering_log_bound(b), g,
                       measured=measured, support_law=dict(support_law or {}))
    if "noise_fro" in measured and "masked_noise_fro" in measured:
        rep.noise_term = (measured["noise_fro"] / math.sqrt(b.n_entries)
                          + measured["masked_noise_fro"] / math.sqrt(b.n_observed))
    if "representation_error" in measured:
        rep.representation_term = measured["representation_error"] / math.sqrt(b.n_observed)
    if rep.noise_term is not None and rep.representation_term is not None:
        rep.recovery_bound = g + rep.noise_term + rep.representation_term
    if "gap" in measured:
        rep.checks["measured_gap_within_bound"] = abs(measured["gap"]) <= g
    if "recovery_error" in measured and rep.recovery_bound is not None:
        rep.checks["recovery_error_within_bound"] = measured["recovery_error"] <= rep.recovery_bound
    return rep


def fit_bound_inputs(fit, obs, x_true: np.ndarray, noise: np.ndarray | None = None,
                     eps: float = 1e-3, delta: float = 0.05, T: float | None = None):
    """Instantiate the bound inputs post hoc from a finished fit.

    Everything is measured in the model's normalized units: ``alpha`` is the
    Frobenius norm of the fitted core, ``beta`` the largest factor norm. Returns
    ``(inputs, measured)`` where ``measured`` holds the observed Gap and the
    noise norms ready for :func:`recoverability_report`.
    """
    from .model import forward, output_range
    from .patches import extract

    target = output_range(fit.model_config.activation)
    a, b = obs.affine(target)
    patches = extract(obs.normalized(target), fit.model_config.grid)
    Xn, cache = forward(fit.params, patches)
    truth_n = a * np.asarray(x_true, dtype=np.float64) + b
    noise_n = np.zeros_like(truth_n) if noise is None else a * np.asarray(noise, dtype=np.float64)
    V = (fit.params.V1, fit.params.V2, fit.params.V3)
    inputs = BoundInputs(
        alpha=float(np.linalg.norm(cache.core)),
        beta=float(max(np.linalg.norm(v) for v in V)),
        T=ACTIVATION_LIPSCHITZ[fit.model_config.activation] if T is None else T,
        eps=eps,
        delta=delta,
        n_observed=obs.n_observed,
        dims=obs.Y.shape,
        core_dims=cache.core.shape,
        nu=float(np.max(np.abs(truth_n))),
        v=float(np.max(np.abs(noise_n))),
        s0=float(np.count_nonzero(cache.core)),
    )
    measured = {
        "gap": measured_gap(Xn, truth_n + noise_n, obs.O),
        "noise_fro": float(np.linalg.norm(noise_n)),
        "masked_noise_fro": float(np.linalg.norm(obs.O * noise_n)),
        "recovery_error": float(np.linalg.norm(Xn - truth_n) / math.sqrt(Xn.size)),
    }
    return inputs, measured

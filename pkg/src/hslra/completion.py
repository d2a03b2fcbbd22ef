"""Forecasting as Hankel low-rank matrix completion.

The unknown future samples ``p_{n+1} .. p_{n+m}`` fill the bottom-right
antidiagonals of the ``L x K`` Hankel matrix of the full series. Two routes
are provided: the exact minimal-rank extension via the minimal linear
recurrence, and nuclear-norm relaxations solved by an ADMM splitting.

ADMM splitting
--------------
Introduce ``Z = H(p)`` and a scaled dual ``U``; each iteration performs

1. ``Z <- svt(H(p) + U, gamma / rho)``
2. ``p <- argmin_p f(p) + rho/2 ||H(p) - (Z - U)||_F^2``
3. ``U <- U + H(p) - Z``

Step 2 decouples per sample because ``||H(x)||_F^2 = sum_k kappa_k x_k^2``:
with ``s_k`` the k-th antidiagonal sum of ``Z - U``, the squared loss
``f = sum_k w_k (p_k - p0_k)^2`` gives
``p_k = (2 w_k p0_k + rho s_k) / (2 w_k + rho kappa_k)`` on known samples and
``p_k = s_k / kappa_k`` on unknown ones. The unsquared loss
``f = ||p_{1:n} - p0||_W`` is handled by a one-dimensional root find.
``rho`` is adapted by residual balancing.
"""
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from .errors import ArgumentError
from .hankel import antidiag_sums, antidiag_weights, as_series, embed, minimal_lrr, DEFAULT_RANK_TOL
from .signals import apply_lrr

__all__ = [
    "WeightScheme",
    "CompletionProblem",
    "CompletionReport",
    "AdmmOptions",
    "exact_complete",
    "nn_complete_exactfit",
    "nn_complete_regularized",
    "nn_complete_tolerance",
    "forecast_rmse",
    "weighted_norm",
]


@dataclass(frozen=True)
class WeightScheme:
    """Per-sample weights of the fitting term.

    * ``unit``: all ones
    * ``hankel``: antidiagonal counts of the ``L``-row embedding of the known
      part, so the weighted norm equals the Frobenius distance of the Hankel
      matrices
    * ``exponential``: ``a * exp(l * j)`` for j = 1..n
    """

    kind: str = "unit"
    a: float = 1.0
    l: float = 0.0

    def __post_init__(self):
        if self.kind not in ("unit", "hankel", "exponential"):
            raise ArgumentError(f"unknown weight scheme {self.kind!r}; expected unit, hankel or exponential")
        if self.kind == "exponential" and not (self.a > 0 and np.isfinite(self.a) and np.isfinite(self.l)):
            raise ArgumentError("exponential weights need a > 0 and finite l")

    @classmethod
    def unit(cls):
        return cls("unit")

    @classmethod
    def hankel(cls):
        return cls("hankel")

    @classmethod
    def exponential(cls, a, l):
        return cls("exponential", a=a, l=l)

    def resolve(self, n, window):
        if self.kind == "unit":
            w = np.ones(n)
        elif self.kind == "hankel":
            w = antidiag_weights(n, min(window, n)).astype(float)
        else:
            w = self.a * np.exp(self.l * np.arange(1, n + 1))
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ArgumentError("derived weights must be positive and finite")
        return w


def weighted_norm(x, w):
    """``sqrt(sum_k w_k x_k^2)``."""
    return float(np.sqrt(np.sum(w * np.asarray(x) ** 2)))


@dataclass(frozen=True)
class CompletionProblem:
    """Known prefix, forecast horizon and window of the full ``n + m`` series."""

    known: np.ndarray
    horizon: int
    window: int
    weights: Union[WeightScheme, np.ndarray] = field(default_factory=WeightScheme)

    def __post_init__(self):
        known = as_series(self.known, "known", min_length=1)
        object.__setattr__(self, "known", known)
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise ArgumentError(f"horizon must be a nonnegative integer, got {self.horizon}")
        n_total = known.size + int(self.horizon)
        if not 1 <= self.window <= n_total:
            raise ArgumentError(f"window {self.window} outside [1, {n_total}]")

    @property
    def n(self):
        return self.known.size

    @property
    def n_total(self):
        return self.known.size + int(self.horizon)

    @property
    def cols(self):
        return self.n_total - self.window + 1

    def weight_vector(self):
        if isinstance(self.weights, WeightScheme):
            return self.weights.resolve(self.n, self.window)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n,) or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ArgumentError(f"weights must be {self.n} nonnegative finite numbers")
        return w


@dataclass
class CompletionReport:
    completed: np.ndarray
    horizon: int
    converged: bool
    iterations: int
    nuclear_norm: float
    primal_residual: float
    dual_residual: float
    objective_trace: list = field(default_factory=list)
    gamma: Optional[float] = None
    fit_residual: float = 0.0
    rho: float = 1.0
    z: Optional[np.ndarray] = field(default=None, repr=False)
    u: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def forecast(self):
        return self.completed[self.completed.size - self.horizon:]

    def to_dict(self):
        gamma = self.gamma
        if gamma is not None and not np.isfinite(gamma):
            gamma = "inf"
        return {
            "completed": [float(x) for x in self.completed],
            "forecast": [float(x) for x in self.forecast],
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "nuclear_norm": float(self.nuclear_norm),
            "primal_residual": float(self.primal_residual),
            "dual_residual": float(self.dual_residual),
            "fit_residual": float(self.fit_residual),
            "gamma": gamma,
            "objective_trace": [float(x) for x in self.objective_trace],
        }


@dataclass(frozen=True)
class AdmmOptions:
    rho: float = 1.0
    max_iters: int = 2000
    tol: float = 1e-7
    balance_factor: float = 10.0
    trace: bool = True


def exact_complete(problem, r, tol=DEFAULT_RANK_TOL):
    """Minimal-rank extension: continue the known prefix with its minimal recurrence.

    Requires ``r <= min(L - 1, K - 1, n / 2)`` and a known prefix of numerical
    rank ``r`` whose recurrence has a nonzero leading coefficient.
    """
    L, K, n = problem.window, problem.cols, problem.n
    if int(r) != r or r < 1 or r > min(L - 1, K - 1, n / 2):
        raise ArgumentError(f"rank {r} violates r <= min(L-1, K-1, n/2) = {min(L - 1, K - 1, n / 2)}")
    lrr = minimal_lrr(problem.known, int(r), tol=tol)
    return apply_lrr(problem.known, lrr, problem.horizon)


def _prox_weighted_l2(y, w, kappa_rho):
    """``argmin_x ||x||_w + 1/2 sum_k kappa_rho_k (x_k - y_k)^2`` (weights positive)."""
    g = kappa_rho * y
    if np.sum(g * g / w) <= 1.0:
        return np.zeros_like(y)

    def ratio(t):
        return np.sqrt(np.sum(w * (kappa_rho * y / (kappa_rho * t + w)) ** 2)) - 1.0

    hi = weighted_norm(y, w)
    t = brentq(ratio, 0.0, hi, xtol=1e-12 * max(hi, 1e-300), rtol=1e-12, maxiter=500)
    return kappa_rho * t * y / (kappa_rho * t + w)


def _admm(problem, gamma, update_known, opts, p_init=None):
    n, N, L = problem.n, problem.n_total, problem.window
    kappa = antidiag_weights(N, L).astype(float)
    known = problem.known
    if p_init is None:
        p = np.concatenate([known, np.full(problem.horizon, known[-1])])
    else:
        p = np.array(p_init, dtype=float)
    hp = embed(p, L)
    z = hp.copy()
    u = np.zeros_like(z)
    rho = opts.rho
    trace = []
    scale0 = max(np.linalg.norm(hp), 1e-300)
    abs_tol = 1e-14 * scale0
    converged = False
    r_pri = s_dual = np.inf
    it = 0
    svals = np.linalg.svd(z, compute_uv=False)
    for it in range(1, opts.max_iters + 1):
        a = hp + u
        uu, s, vt = np.linalg.svd(a, full_matrices=False)
        s = np.maximum(s - gamma / rho, 0.0)
        k = int(np.count_nonzero(s))
        z = (uu[:, :k] * s[:k]) @ vt[:k]
        svals = s
        means = antidiag_sums(z - u) / kappa
        p_new = means.copy()
        p_new[:n] = update_known(means[:n], kappa[:n], rho)
        dp = p_new - p
        p = p_new
        hp = embed(p, L)
        resid = hp - z
        u = u + resid
        r_pri = float(np.linalg.norm(resid))
        s_dual = rho * float(np.sqrt(np.sum(kappa * dp * dp)))
        if opts.trace:
            trace.append(float(np.sum(svals)))
        eps_pri = opts.tol * max(np.linalg.norm(hp), np.linalg.norm(z)) + abs_tol
        eps_dual = opts.tol * rho * float(np.linalg.norm(u)) + abs_tol
        if r_pri <= eps_pri and s_dual <= eps_dual:
            converged = True
            break
        if r_pri > opts.balance_factor * s_dual:
            rho *= 2.0
            u /= 2.0
        elif s_dual > opts.balance_factor * r_pri:
            rho /= 2.0
            u *= 2.0
    return p, z, u, rho, it, converged, r_pri, s_dual, trace


def _finish(problem, p, z, u, rho, it, converged, r_pri, s_dual, trace, gamma, loss_fn):
    w = problem.weight_vector()
    nuc = float(np.sum(np.linalg.svd(embed(p, problem.window), compute_uv=False)))
    if loss_fn is not None:
        trace = [loss_fn(p) + gamma * t for t in trace] if trace else trace
    return CompletionReport(
        completed=p,
        horizon=int(problem.horizon),
        converged=converged,
        iterations=it,
        nuclear_norm=nuc,
        primal_residual=r_pri,
        dual_residual=s_dual,
        objective_trace=trace,
        gamma=gamma,
        fit_residual=weighted_norm(p[: problem.n] - problem.known, w),
        rho=rho,
        z=z,
        u=u,
    )


def nn_complete_exactfit(problem, options=None):
    """Minimise ``||H(p)||_*`` over the ``m`` unknown samples with the prefix fixed."""
    opts = options or AdmmOptions()
    if problem.horizon == 0:
        p = problem.known.copy()
        nuc = float(np.sum(np.linalg.svd(embed(p, problem.window), compute_uv=False)))
        return CompletionReport(completed=p, horizon=0, converged=True, iterations=0,
                                nuclear_norm=nuc, primal_residual=0.0, dual_residual=0.0)
    known = problem.known

    def update_known(means, kappa, rho):
        return known

    out = _admm(problem, 1.0, update_known, opts)
    rep = _finish(problem, *out, gamma=None, loss_fn=None)
    return rep


def nn_complete_regularized(problem, gamma, loss="unsquared", options=None, p_init=None):
    """Minimise ``loss(p_{1:n} - p0) + gamma ||H(p)||_*``.

    ``loss="unsquared"`` uses ``||.||_W``; ``loss="squared"`` uses
    ``||.||_W^2``. Weights come from ``problem.weights``.
    """
    if not gamma > 0:
        raise ArgumentError(f"gamma must be positive, got {gamma}")
    if loss not in ("unsquared", "squared"):
        raise ArgumentError(f"loss must be 'unsquared' or 'squared', got {loss!r}")
    opts = options or AdmmOptions()
    w = problem.weight_vector()
    p0 = problem.known
    if loss == "squared":
        def update_known(means, kappa, rho):
            return (2 * w * p0 + rho * kappa * means) / (2 * w + rho * kappa)

        def loss_fn(p):
            return weighted_norm(p[: p0.size] - p0, w) ** 2
    else:
        if np.any(w <= 0):
            raise ArgumentError("the unsquared loss needs strictly positive weights")

        def update_known(means, kappa, rho):
            return p0 + _prox_weighted_l2(means - p0, w, rho * kappa)

        def loss_fn(p):
            return weighted_norm(p[: p0.size] - p0, w)

    out = _admm(problem, float(gamma), update_known, opts, p_init=p_init)
    return _finish(problem, *out, gamma=float(gamma), loss_fn=loss_fn)


def nn_complete_tolerance(problem, tau, options=None, rel_window=0.01, max_bisections=80):
    """Minimise ``||H(p)||_*`` subject to ``||p_{1:n} - p0||_W <= tau``.

    Solved through the squared-loss regularised problem, bisecting ``log gamma``
    until the fit residual lands in ``[(1 - rel_window) tau, tau]``.
    ``tau = 0`` is the exact-fit problem.
    """
    if not tau >= 0:
        raise ArgumentError(f"tau must be nonnegative, got {tau}")
    if tau == 0:
        return nn_complete_exactfit(problem, options)
    w = problem.weight_vector()
    p0 = problem.known
    if weighted_norm(p0, w) <= tau:
        p = np.zeros(problem.n_total)
        return CompletionReport(completed=p, horizon=int(problem.horizon), converged=True,
                                iterations=0, nuclear_norm=0.0, primal_residual=0.0,
                                dual_residual=0.0, gamma=float("inf"),
                                fit_residual=weighted_norm(p0, w))

    def solve(g):
        return nn_complete_regularized(problem, g, loss="squared", options=options)

    scale = max(weighted_norm(p0, w), 1e-300)
    lo, hi = 1e-8 * scale, scale
    rep_hi = solve(hi)
    while rep_hi.fit_residual < (1 - rel_window) * tau:
        lo, hi = hi, hi * 10
        rep_hi = solve(hi)
    if rep_hi.fit_residual <= tau:
        return rep_hi
    best = None
    for _ in range(max_bisections):
        mid = np.sqrt(lo * hi)
        rep = solve(mid)
        if rep.fit_residual > tau:
            hi = mid
        else:
            lo = mid
            best = rep
            if rep.fit_residual >= (1 - rel_window) * tau:
                return rep
    if best is None:
        best = solve(lo)
    best.converged = False
    return best


def forecast_rmse(truth, completed, m):
    """Root mean square error over the last ``m`` samples."""
    truth = np.asarray(truth, dtype=float)
    completed = np.asarray(completed, dtype=float)
    if int(m) != m or m < 1:
        raise ArgumentError(f"forecast horizon must be a positive integer, got {m}")
    if truth.size < m or completed.size < m:
        raise ArgumentError("series shorter than the forecast horizon")
    if truth.size != completed.size:
        raise ArgumentError(f"length mismatch: {truth.size} vs {completed.size}")
    d = truth[-int(m):] - completed[-int(m):]
    return float(np.sqrt(np.mean(d * d)))

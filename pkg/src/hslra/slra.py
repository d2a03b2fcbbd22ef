"""Hankel structured low-rank approximation by alternating projections.

Three solvers share one iteration kernel:

* :func:`cadzow` alternates the rank-``r`` projection and the Hankel
  projection, optionally rescaling the iterate by the optimal scalar;
* :func:`scalar_correction` computes that optimal rescaling;
* :func:`apbr` runs several randomised trajectories that backtrack toward the
  data and mutate the iterate during an initial phase, then finish with
  corrected Cadzow steps, and keeps the best trajectory.

All iterates are Hankel, so the solvers work on parameter vectors and only
form matrices for the SVD.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, DegenerateError
from .hankel import (
    WeightedHankelProjector,
    antidiag_sums,
    antidiag_weights,
    as_series,
    embed,
)
from .linalg import QrWeights, as_matrix, qr_inner, qr_lra

__all__ = [
    "SlraConfig",
    "ApbrConfig",
    "SolveReport",
    "cadzow",
    "ssa",
    "apbr",
    "scalar_correction",
]


@dataclass(frozen=True)
class SlraConfig:
    """Parameters shared by the alternating-projection solvers.

    ``weights=None`` means the Frobenius norm. Iteration stops once the
    relative change of the parameter vector drops below ``stop_tol``; the run
    counts as converged if, in addition, ``sigma_{r+1} / sigma_1`` of the
    final Hankel matrix is at most ``rank_tol``.
    """

    rank: int
    window: int
    weights: Optional[QrWeights] = None
    max_iters: int = 500
    stop_tol: float = 1e-9
    rank_tol: float = 1e-6
    apply_final_correction: bool = False
    correct_every_step: bool = False

    def validate(self, n):
        L, K = self.window, n - self.window + 1
        if not 1 <= L <= n:
            raise ArgumentError(f"window {L} outside [1, {n}] for a series of length {n}")
        if int(self.rank) != self.rank or not 1 <= self.rank < min(L, K):
            raise ArgumentError(f"rank {self.rank} must satisfy 1 <= r < min(L, K) = {min(L, K)}")
        if self.max_iters < 1:
            raise ArgumentError("max_iters must be at least 1")
        if not self.stop_tol > 0:
            raise ArgumentError("stop_tol must be positive")
        if self.weights is not None and self.weights.shape != (L, K):
            raise ArgumentError(f"weights of shape {self.weights.shape} do not match the {L}x{K} embedding")


@dataclass(frozen=True)
class ApbrConfig:
    """Multistart alternating projections with backtracking and randomisation.

    Trajectory ``j`` starts at ``(1 - start_spread) H(p0) + start_spread H(xi)``
    where ``xi`` is Gaussian with standard deviation ``perturbation_std``
    (default: the RMS of the residual ``p0 - ssa(p0)``, a noise-level
    estimate). At iteration ``i`` the backtracking weight is
    ``backtrack0 * decay**i`` and the mutation weight ``mutation0 * decay**i``
    for ``i < cutoff`` and zero afterwards; explicit schedules override these.
    Trajectory ``j`` draws from ``numpy.random.default_rng(seed + j)``.
    """

    base: SlraConfig
    trajectories: int = 10
    start_spread: float = 0.1
    backtrack0: float = 0.1
    mutation0: float = 0.1
    decay: float = 0.9
    cutoff: int = 30
    perturbation_std: Optional[float] = None
    seed: int = 0
    backtrack_schedule: Optional[Sequence[float]] = None
    mutation_schedule: Optional[Sequence[float]] = None

    def __post_init__(self):
        for name in ("backtrack_schedule", "mutation_schedule"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(x) for x in value))

    @property
    def schedule_length(self):
        lengths = [len(s) for s in (self.backtrack_schedule, self.mutation_schedule) if s is not None]
        return max(lengths) if lengths else self.cutoff

    def backtrack(self, i):
        if self.backtrack_schedule is not None:
            return self.backtrack_schedule[i] if i < len(self.backtrack_schedule) else 0.0
        return self.backtrack0 * self.decay ** i if i < self.cutoff else 0.0

    def mutation(self, i):
        if self.mutation_schedule is not None:
            return self.mutation_schedule[i] if i < len(self.mutation_schedule) else 0.0
        return self.mutation0 * self.decay ** i if i < self.cutoff else 0.0

    def validate(self, n):
        self.base.validate(n)
        if self.trajectories < 1:
            raise ArgumentError("at least one trajectory is required")
        if not 0 <= self.start_spread <= 1:
            raise ArgumentError(f"start_spread {self.start_spread} outside [0, 1]")
        if self.cutoff < 0 or not 0 <= self.decay <= 1:
            raise ArgumentError("cutoff must be >= 0 and decay within [0, 1]")
        if self.perturbation_std is not None and self.perturbation_std < 0:
            raise ArgumentError("perturbation_std must be nonnegative")
        for i in range(self.schedule_length):
            if not 0 <= self.backtrack(i) <= 1:
                raise ArgumentError(f"backtrack weight {self.backtrack(i)} at iteration {i} outside [0, 1]")
            if self.mutation(i) < 0:
                raise ArgumentError(f"mutation weight {self.mutation(i)} at iteration {i} is negative")


@dataclass
class SolveReport:
    """Outcome of an SLRA solve.

    ``objective`` is the distance ``||H(p_hat) - H(p0)||`` in the configured
    matrix norm (Frobenius or (Q,R)), equivalently the induced weighted
    vector norm of ``p_hat - p0``. ``l2_error`` is the plain Euclidean
    ``||p_hat - p0||_2``. ``trace`` holds the objective after every iteration.
    """

    approximant: np.ndarray
    iterations: int
    objective: float
    l2_error: float
    rank_residual: float
    converged: bool
    trace: list = field(default_factory=list)
    distance_trace: list = field(default_factory=list)
    trajectory: int = 0
    trajectory_objectives: list = field(default_factory=list)

    def to_dict(self):
        return {
            "approximant": [float(x) for x in self.approximant],
            "iterations": int(self.iterations),
            "objective": float(self.objective),
            "l2_error": float(self.l2_error),
            "rank_residual": float(self.rank_residual),
            "converged": bool(self.converged),
            "trace": [float(x) for x in self.trace],
            "distance_trace": [float(x) for x in self.distance_trace],
            "trajectory": int(self.trajectory),
            "trajectory_objectives": [float(x) for x in self.trajectory_objectives],
        }


class _Engine:
    """Projections and inner products for one (series length, config) pair."""

    def __init__(self, n, cfg):
        self.n = n
        self.cfg = cfg
        self.window = cfg.window
        self.rank = cfg.rank
        self.w = cfg.weights
        self.kappa = antidiag_weights(n, cfg.window).astype(float)
        self._project = WeightedHankelProjector(self.w) if self.w is not None else None

    def step(self, p):
        """Return ``pi_H(pi_r(H(p)))`` and the distance ``||H(p) - pi_r(H(p))||``."""
        a = embed(p, self.window)
        if self.w is None:
            u, s, vt = np.linalg.svd(a, full_matrices=False)
            r = self.rank
            low = (u[:, :r] * s[:r]) @ vt[:r]
            dist = float(np.sqrt(np.sum(s[r:] ** 2)))
            return antidiag_sums(low) / self.kappa, dist
        low = qr_lra(a, self.rank, self.w)
        diff = a - low
        dist = float(np.sqrt(max(qr_inner(diff, diff, self.w), 0.0)))
        return self._project(low), dist

    def inner(self, p, q):
        if self.w is None:
            return float(np.sum(self.kappa * p * q))
        return qr_inner(embed(p, self.window), embed(q, self.window), self.w)

    def distance(self, p, q):
        d = p - q
        return float(np.sqrt(max(self.inner(d, d), 0.0)))

    def correct(self, p, p0):
        den = self.inner(p, p)
        if den <= 0:
            raise DegenerateError("cannot rescale a zero approximant")
        return (self.inner(p, p0) / den) * p

    def rank_residual(self, p):
        s = np.linalg.svd(embed(p, self.window), compute_uv=False)
        if s[0] == 0:
            return 0.0
        return float(s[self.rank] / s[0]) if self.rank < s.size else 0.0


def _iterate(p_start, p0, engine, cfg, backtrack=None, mutation=None, xi_draw=None, free_after=0):
    """Shared iteration kernel.

    With ``backtrack``/``mutation`` schedules this is one APBR trajectory;
    without them it is plain (optionally corrected) Cadzow. Stopping is only
    checked once the schedules have switched off (iteration >= ``free_after``).
    """
    p = p_start
    trace, dist_trace = [], []
    stopped = False
    i = 0
    while i < cfg.max_iters:
        p_new, dist = engine.step(p)
        dist_trace.append(dist)
        delta = backtrack(i) if backtrack else 0.0
        sigma = mutation(i) if mutation else 0.0
        if delta > 0 or sigma > 0:
            p_new = (1 - delta) * p_new + delta * p0
            if sigma > 0:
                p_new = p_new + sigma * xi_draw()
        if cfg.correct_every_step:
            p_new = engine.correct(p_new, p0)
        change = np.linalg.norm(p_new - p) / max(np.linalg.norm(p), np.finfo(float).tiny)
        p = p_new
        i += 1
        trace.append(engine.distance(p, p0))
        if i >= free_after and change < cfg.stop_tol:
            stopped = True
            break
    if cfg.apply_final_correction:
        p = engine.correct(p, p0)
        if trace:
            trace[-1] = engine.distance(p, p0)
    return p, i, stopped, trace, dist_trace


def _report(p, p0, engine, cfg, iters, stopped, trace, dist_trace, **extra):
    residual = engine.rank_residual(p)
    return SolveReport(
        approximant=p,
        iterations=iters,
        objective=engine.distance(p, p0),
        l2_error=float(np.linalg.norm(p - p0)),
        rank_residual=residual,
        converged=bool(stopped and residual <= cfg.rank_tol),
        trace=trace,
        distance_trace=dist_trace,
        **extra,
    )


def cadzow(p0, cfg):
    """Cadzow iterations ``A_i = pi_H(pi_r(A_{i-1}))`` from ``A_0 = H(p0)``.

    The result is exactly Hankel and returned as its parameter vector inside a
    :class:`SolveReport`.
    """
    p0 = as_series(p0, "p0")
    cfg.validate(p0.size)
    engine = _Engine(p0.size, cfg)
    p, iters, stopped, trace, dist_trace = _iterate(p0.copy(), p0, engine, cfg)
    return _report(p, p0, engine, cfg, iters, stopped, trace, dist_trace)


def ssa(p0, rank, window):
    """Basic SSA reconstruction: a single Cadzow iteration."""
    return cadzow(p0, SlraConfig(rank=rank, window=window, max_iters=1))


def scalar_correction(z, target, weights=None):
    """Optimal scalar ``c = argmin_b ||target - b z||`` and the rescaled ``c z``.

    The norm is Frobenius when ``weights`` is None, otherwise the (Q,R)-norm.
    Rescaling keeps the rank and any linear structure of ``z``.
    """
    z = as_matrix(z, "z")
    target = as_matrix(target, "target")
    if z.shape != target.shape:
        raise ArgumentError(f"shape mismatch {z.shape} vs {target.shape}")
    if weights is None:
        den = float(np.sum(z * z))
        num = float(np.sum(z * target))
    else:
        den = qr_inner(z, z, weights)
        num = qr_inner(z, target, weights)
    if den <= 0:
        raise DegenerateError("cannot rescale a zero matrix")
    c = num / den
    corrected = c * z
    if __debug__:
        def err(m):
            d = m - target
            return float(np.sum(d * d)) if weights is None else qr_inner(d, d, weights)
        assert err(corrected) <= err(z) * (1 + 1e-12) + 1e-300
    return c, corrected


def apbr(p0, cfg):
    """Multistart APBR; returns the report of the trajectory with the smallest objective.

    Each trajectory iterates
    ``A <- c [(1 - delta_i) pi_H(pi_r(A)) + delta_i H(p0) + sigma_i H(xi_i)]``
    with ``c`` the optimal scalar correction of the bracket and a fresh
    Gaussian ``xi_i`` per mutation. Once the schedules are zero the iterations
    are corrected Cadzow steps.
    """
    p0 = as_series(p0, "p0")
    cfg.validate(p0.size)
    base = replace(cfg.base, correct_every_step=True)
    engine = _Engine(p0.size, base)
    std = cfg.perturbation_std
    if std is None:
        std = float(np.linalg.norm(p0 - engine.step(p0)[0]) / np.sqrt(p0.size))
    best = None
    objectives = []
    for j in range(cfg.trajectories):
        rng = np.random.default_rng(cfg.seed + j)

        def draw(rng=rng):
            return std * rng.standard_normal(p0.size)

        start = p0.copy()
        if cfg.start_spread > 0:
            start = (1 - cfg.start_spread) * p0 + cfg.start_spread * draw()
        p, iters, stopped, trace, dist_trace = _iterate(
            start, p0, engine, base,
            backtrack=cfg.backtrack, mutation=cfg.mutation,
            xi_draw=draw, free_after=cfg.schedule_length,
        )
        rep = _report(p, p0, engine, base, iters, stopped, trace, dist_trace, trajectory=j)
        objectives.append(rep.objective)
        if best is None or rep.objective < best.objective:
            best = rep
    best.trajectory_objectives = objectives
    return best

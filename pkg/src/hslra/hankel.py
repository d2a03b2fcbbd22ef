"""Hankel embedding of time series, structure projections and recurrence extraction.

Series are 1-D float arrays ``p = (p_1, ..., p_N)`` (stored 0-based). The
``L x K`` Hankel matrix of ``p`` has entries ``H[i, j] = p[i + j]`` with
``L + K - 1 = N``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import cho_factor, cho_solve

from .errors import ArgumentError, NonContinuableError, NumericalError, RankMismatchError
from .linalg import as_matrix

__all__ = [
    "DEFAULT_RANK_TOL",
    "HankelStructure",
    "LrrCoefficients",
    "as_series",
    "embed",
    "antidiag_weights",
    "antidiag_sums",
    "project_hankel",
    "project_hankel_weighted",
    "numerical_rank",
    "rank_profile",
    "minimal_lrr",
    "multiplication_matrix",
]

DEFAULT_RANK_TOL = 1e-8


def as_series(p, name="p", min_length=2):
    """Validate a time series: 1-D, finite, at least ``min_length`` samples."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ArgumentError(f"{name} must be one-dimensional, got shape {p.shape}")
    if p.size < min_length:
        raise ArgumentError(f"{name} needs at least {min_length} samples, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise ArgumentError(f"{name} has non-finite values")
    return p


@dataclass(frozen=True)
class HankelStructure:
    """Shape descriptor of the embedding of a length-``n_total`` series with ``window`` rows."""

    n_total: int
    window: int

    def __post_init__(self):
        if self.n_total < 1:
            raise ArgumentError(f"series length must be positive, got {self.n_total}")
        if not 1 <= self.window <= self.n_total:
            raise ArgumentError(f"window {self.window} outside [1, {self.n_total}]")

    @property
    def cols(self):
        return self.n_total - self.window + 1

    @property
    def shape(self):
        return self.window, self.cols

    @classmethod
    def of_matrix(cls, a):
        L, K = np.shape(a)
        return cls(L + K - 1, L)


def embed(p, window):
    """Hankel matrix ``H[i, j] = p[i + j]`` with ``window`` rows.

    >>> embed([1, 2, 3, 4, 5], 2)
    array([[1., 2., 3., 4.],
           [2., 3., 4., 5.]])
    """
    p = as_series(p, min_length=1)
    HankelStructure(p.size, window)
    return sliding_window_view(p, p.size - window + 1).copy()


@lru_cache(maxsize=256)
def _weights_cached(n, window):
    k = n - window + 1
    j = np.arange(1, n + 1)
    kappa = np.minimum(np.minimum(j, n - j + 1), min(window, k))
    kappa.setflags(write=False)
    return kappa


def antidiag_weights(n, window):
    """Number of entries on each antidiagonal: ``min(j, L, K, N - j + 1)``, j = 1..N.

    These are the weights that make ``||H(p) - H(p0)||_F^2`` equal to
    ``sum_j kappa_j (p_j - p0_j)^2``.
    """
    HankelStructure(n, window)
    return _weights_cached(n, window).copy()


@lru_cache(maxsize=256)
def _antidiag_index(rows, cols):
    idx = np.add.outer(np.arange(rows), np.arange(cols)).ravel()
    idx.setflags(write=False)
    return idx


def antidiag_sums(a):
    """Sum of each antidiagonal of ``a``; returns a vector of length ``L + K - 1``."""
    a = np.asarray(a, dtype=float)
    rows, cols = a.shape
    return np.bincount(_antidiag_index(rows, cols), weights=a.ravel(), minlength=rows + cols - 1)


def project_hankel(a):
    """Closest Hankel matrix in the Frobenius norm, returned as its parameter vector.

    Each sample is the mean of the corresponding antidiagonal of ``a``.
    """
    a = as_matrix(a)
    rows, cols = a.shape
    # average deviations from one entry per antidiagonal, so that an exactly
    # Hankel input is returned bit for bit
    ref = np.concatenate([a[0], a[1:, -1]])
    dev = a - embed(ref, rows)
    return ref + antidiag_sums(dev) / _weights_cached(rows + cols - 1, rows)


def _weighted_gram(w, rows, cols):
    # Gram matrix G[i, j] = <S_i, S_j>_{Q,R} of the Hankel basis matrices
    n = rows + cols - 1
    gram = np.empty((n, n))
    basis = np.zeros((rows, cols))
    idx = _antidiag_index(rows, cols).reshape(rows, cols)
    for j in range(n):
        basis[...] = idx == j
        gram[:, j] = antidiag_sums(w.q @ basis @ w.r)
    return gram


class WeightedHankelProjector:
    """Reusable (Q,R)-orthogonal projection onto Hankel matrices of a fixed shape.

    The Gram matrix of the basis matrices is factored once; each call then
    solves the normal equations for a new right-hand side.
    """

    def __init__(self, w):
        self.w = w
        rows, cols = w.shape
        gram = _weighted_gram(w, rows, cols)
        try:
            self._factor = cho_factor(gram)
        except np.linalg.LinAlgError as exc:  # cannot happen for SPD weights
            raise NumericalError("singular normal equations in weighted projection") from exc

    def __call__(self, a):
        a = as_matrix(a)
        self.w.check(a)
        rhs = antidiag_sums(self.w.q @ a @ self.w.r)
        return cho_solve(self._factor, rhs)


def project_hankel_weighted(a, w):
    """Closest Hankel matrix to ``a`` in the (Q,R)-norm, as a parameter vector.

    Solves ``min_p ||Q^{1/2} (H(p) - a) R^{1/2}||_F`` through the normal
    equations of the whitened basis matrices.
    """
    return WeightedHankelProjector(w)(a)


def numerical_rank(singular_values, tol=DEFAULT_RANK_TOL):
    s = np.asarray(singular_values)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def rank_profile(p, tol=DEFAULT_RANK_TOL):
    """Numerical rank of the ``L x (N - L + 1)`` Hankel matrix for every L in 1..N."""
    p = as_series(p, min_length=1)
    if not 0 < tol < 1:
        raise ArgumentError(f"tolerance must lie in (0, 1), got {tol}")
    out = np.empty(p.size, dtype=int)
    for L in range(1, p.size + 1):
        s = np.linalg.svd(embed(p, L), compute_uv=False)
        out[L - 1] = numerical_rank(s, tol)
    return out


def _normalize(theta):
    theta = np.asarray(theta, dtype=float)
    norm = np.linalg.norm(theta)
    if not np.isfinite(norm) or norm == 0:
        raise ArgumentError("recurrence coefficients must be finite and not all zero")
    theta = theta / norm
    nz = np.flatnonzero(np.abs(theta) > 1e-12)
    if theta[nz[0]] < 0:
        theta = -theta
    return theta


@dataclass(frozen=True)
class LrrCoefficients:
    """Coefficients ``theta`` of ``theta_0 p_k + ... + theta_r p_{k+r} = 0``.

    Stored with unit Euclidean norm and a positive first nonzero entry.
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = _normalize(self.theta)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def order(self):
        return self.theta.size - 1

    def is_continuable(self, tol=1e-10):
        return abs(self.theta[-1]) > tol

    def monic(self):
        """Coefficients ``a_0 .. a_{r-1}`` of ``p_j = a_{r-1} p_{j-1} + ... + a_0 p_{j-r}``."""
        if not self.is_continuable():
            raise NonContinuableError(
                f"leading recurrence coefficient {self.theta[-1]:.3g} vanishes; series is not continuable"
            )
        return -self.theta[:-1] / self.theta[-1]


def minimal_lrr(p, d, tol=DEFAULT_RANK_TOL):
    """Minimal linear recurrence of a series of finite rank ``d``.

    The coefficients span the left kernel of the ``(d+1)``-row Hankel matrix.
    Raises RankMismatchError unless that kernel is one-dimensional at the
    given relative tolerance.
    """
    p = as_series(p)
    if int(d) != d or d < 1 or d >= p.size:
        raise ArgumentError(f"recurrence order {d} outside [1, {p.size - 1}]")
    d = int(d)
    h = embed(p, d + 1)
    u, s, _ = np.linalg.svd(h, full_matrices=True)
    s_full = np.zeros(d + 1)
    s_full[: s.size] = s
    top = s_full[0]
    if top == 0 or s_full[d - 1] <= tol * top or s_full[d] > tol * top:
        raise RankMismatchError(
            f"left kernel of the {d + 1}-row Hankel matrix is not one-dimensional: "
            f"sigma_{d}/sigma_1 = {s_full[d - 1] / top if top else 0:.3g}, "
            f"sigma_{d + 1}/sigma_1 = {s_full[d] / top if top else 0:.3g}, tol = {tol:g}",
            singular_values=s_full,
        )
    return LrrCoefficients(u[:, d])


def multiplication_matrix(q, shift):
    """Banded ``(d + shift + 1) x (shift + 1)`` matrix whose columns are shifts of ``q``.

    Multiplying by it multiplies the characteristic polynomial of ``q`` by an
    arbitrary polynomial of degree ``shift``.
    """
    theta = q.theta if isinstance(q, LrrCoefficients) else np.asarray(q, dtype=float)
    if theta.ndim != 1 or theta.size == 0 or not np.any(theta):
        raise ArgumentError("q must be a nonzero vector")
    if int(shift) != shift or shift < 0:
        raise ArgumentError(f"shift must be a nonnegative integer, got {shift}")
    shift = int(shift)
    out = np.zeros((theta.size + shift, shift + 1))
    for j in range(shift + 1):
        out[j : j + theta.size, j] = theta
    return out

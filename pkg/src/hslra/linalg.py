"""Dense matrix kernels: SVD, rank truncation, (Q,R)-weighted approximation.

Matrices are plain ``numpy.ndarray`` objects of shape ``(rows, cols)`` in
C (row-major) order. Public functions reject non-finite entries.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, NumericalError

__all__ = [
    "SvdFactors",
    "QrWeights",
    "as_matrix",
    "svd",
    "truncated_lra",
    "qr_lra",
    "qr_norm",
    "qr_inner",
    "nuclear_norm",
    "svt",
]

# eigenvalue floor for the symmetric square roots, relative to the largest
SPD_FLOOR = 1e-12
SYMMETRY_TOL = 1e-12


def as_matrix(a, name="a"):
    """Return ``a`` as a finite 2-D float array, raising ArgumentError otherwise."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ArgumentError(f"{name} must be a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class SvdFactors:
    """Full SVD ``a = u @ diag(s) @ v.T`` with ``u`` square L x L and ``v`` square K x K."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        L, K = self.u.shape[0], self.v.shape[0]
        sigma = np.zeros((L, K))
        k = len(self.singular_values)
        sigma[:k, :k] = np.diag(self.singular_values)
        return self.u @ sigma @ self.v.T


def _fix_signs(u, vt):
    # first nonzero entry of each left singular vector made nonnegative
    k = min(u.shape[1], vt.shape[0])
    for j in range(k):
        col = u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            vt[j, :] = -vt[j, :]
    for j in range(k, u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
    return u, vt


def _lapack_svd(a, full_matrices):
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=full_matrices)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}", residual=float("nan")) from exc
    return u, s, vt


def svd(a):
    """Full singular value decomposition with a reproducible sign convention.

    Backed by LAPACK ``gesdd`` (deterministic for a given input and build).
    Singular values are sorted non-increasing; the first nonzero entry of each
    left singular vector is nonnegative.

    Parameters
    ----------
    a : array_like, shape (L, K)

    Returns
    -------
    SvdFactors
    """
    a = as_matrix(a)
    u, s, vt = _lapack_svd(a, full_matrices=True)
    u, vt = _fix_signs(u.copy(), vt.copy())
    return SvdFactors(u=u, singular_values=s, v=vt.T)


def _check_rank(r, shape):
    if int(r) != r or r < 0 or r > min(shape):
        raise ArgumentError(f"rank {r} outside [0, {min(shape)}] for a {shape[0]}x{shape[1]} matrix")
    return int(r)


def _truncate(a, r):
    if r == 0:
        return np.zeros_like(a)
    u, s, vt = _lapack_svd(a, full_matrices=False)
    return (u[:, :r] * s[:r]) @ vt[:r]


def truncated_lra(a, r):
    """Best rank-``r`` approximation in any unitarily invariant norm.

    Keeps the ``r`` leading singular triplets of ``a``. When
    ``sigma_r == sigma_{r+1}`` the minimiser is not unique and the one
    returned is the one LAPACK's singular vectors produce.
    """
    a = as_matrix(a)
    r = _check_rank(r, a.shape)
    return _truncate(a, r)


def _sym_sqrt(m, name):
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ArgumentError(f"{name} must be square, got {m.shape}")
    scale = max(np.max(np.abs(m)), 1.0)
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
        raise ArgumentError(f"{name} is not symmetric")
    lam, vec = np.linalg.eigh((m + m.T) / 2)
    if lam[-1] <= 0 or lam[0] <= SPD_FLOOR * lam[-1]:
        raise ArgumentError(
            f"{name} is not positive definite (eigenvalues in [{lam[0]:.3g}, {lam[-1]:.3g}])"
        )
    root = np.sqrt(lam)
    sqrt = (vec * root) @ vec.T
    isqrt = (vec / root) @ vec.T
    return m, sqrt, isqrt


@dataclass(frozen=True)
class QrWeights:
    """SPD row weight ``q`` (L x L) and column weight ``r`` (K x K) with cached roots.

    Construct with ``QrWeights(q, r)``; the symmetric square roots and their
    inverses are computed once by eigendecomposition.
    """

    q: np.ndarray
    r: np.ndarray
    q_sqrt: np.ndarray = field(init=False, repr=False)
    r_sqrt: np.ndarray = field(init=False, repr=False)
    q_isqrt: np.ndarray = field(init=False, repr=False)
    r_isqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q, qs, qi = _sym_sqrt(self.q, "q")
        r, rs, ri = _sym_sqrt(self.r, "r")
        for name, value in (("q", q), ("r", r), ("q_sqrt", qs), ("r_sqrt", rs),
                            ("q_isqrt", qi), ("r_isqrt", ri)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def identity(cls, rows, cols):
        return cls(np.eye(rows), np.eye(cols))

    @classmethod
    def diagonal(cls, q_diag, r_diag):
        return cls(np.diag(np.asarray(q_diag, float)), np.diag(np.asarray(r_diag, float)))

    @property
    def shape(self):
        return self.q.shape[0], self.r.shape[0]

    def check(self, a):
        if tuple(a.shape) != self.shape:
            raise ArgumentError(f"weights of shape {self.shape} do not match matrix {a.shape}")


def qr_inner(a, b, w):
    """(Q,R) inner product ``trace(Q a R b^T)``."""
    a = as_matrix(a)
    b = as_matrix(b, "b")
    w.check(a)
    w.check(b)
    return float(np.sum((w.q @ a @ w.r) * b))


def qr_norm(a, w):
    """(Q,R)-norm ``sqrt(trace(Q a R a^T))``; the Frobenius norm when Q = R = I."""
    a = as_matrix(a)
    w.check(a)
    return float(np.linalg.norm(w.q_sqrt @ a @ w.r_sqrt))


def qr_lra(a, r, w):
    """Best rank-``r`` approximation of ``a`` in the (Q,R)-norm.

    Truncates the whitened matrix ``Q^{1/2} a R^{1/2}`` and maps back with the
    inverse roots.
    """
    a = as_matrix(a)
    w.check(a)
    r = _check_rank(r, a.shape)
    whitened = w.q_sqrt @ a @ w.r_sqrt
    return w.q_isqrt @ _truncate(whitened, r) @ w.r_isqrt


def nuclear_norm(a):
    """Sum of singular values."""
    a = as_matrix(a)
    return float(np.sum(_lapack_svd(a, full_matrices=False)[1]))


def svt(a, tau):
    """Singular value thresholding, the proximal map of ``tau * nuclear_norm``.

    Returns ``U max(S - tau, 0) V^T``, the exact minimiser of
    ``0.5 * ||X - a||_F^2 + tau * ||X||_*``.
    """
    a = as_matrix(a)
    if not tau >= 0:
        raise ArgumentError(f"threshold must be nonnegative, got {tau}")
    if tau == 0:
        return a.copy()
    u, s, vt = _lapack_svd(a, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    return (u[:, :k] * s[:k]) @ vt[:k]

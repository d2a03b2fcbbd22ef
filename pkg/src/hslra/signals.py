"""Finite-rank signal generators, recurrence extrapolation and noise models."""
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ArgumentError
from .hankel import LrrCoefficients, as_series

__all__ = [
    "DampedTerm",
    "DampedSinusoidModel",
    "ExpTerm",
    "CanonicalModel",
    "NoiseModel",
    "apply_lrr",
    "generate_damped",
    "generate_canonical",
    "generate_noise",
]


def apply_lrr(prefix, lrr, horizon):
    """Extend ``prefix`` by ``horizon`` samples using the recurrence ``lrr``.

    Each new value is ``p_j = a_{r-1} p_{j-1} + ... + a_0 p_{j-r}`` with
    ``a_k = -theta_k / theta_r``.

    Raises
    ------
    NonContinuableError
        If the leading coefficient ``theta_r`` vanishes.
    ArgumentError
        If the prefix is shorter than the recurrence order.
    """
    if not isinstance(lrr, LrrCoefficients):
        lrr = LrrCoefficients(lrr)
    prefix = as_series(prefix, "prefix", min_length=1)
    if int(horizon) != horizon or horizon < 0:
        raise ArgumentError(f"horizon must be a nonnegative integer, got {horizon}")
    a = lrr.monic()
    r = lrr.order
    if prefix.size < r:
        raise ArgumentError(f"prefix of length {prefix.size} is shorter than recurrence order {r}")
    out = np.concatenate([prefix, np.zeros(int(horizon))])
    for j in range(prefix.size, out.size):
        out[j] = a @ out[j - r : j]
    return out


@dataclass(frozen=True)
class DampedTerm:
    """``P(k) exp(damping k) sin(2 pi frequency k + phase)``.

    ``amplitude`` holds polynomial coefficients in increasing powers of k; a
    single number is a constant amplitude. ``frequency`` is in cycles per
    sample, ``phase`` in radians.
    """

    amplitude: Sequence[float] = (1.0,)
    damping: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        amp = np.atleast_1d(np.asarray(self.amplitude, dtype=float))
        if amp.ndim != 1 or amp.size == 0:
            raise ArgumentError("amplitude polynomial needs at least one coefficient")
        object.__setattr__(self, "amplitude", tuple(amp.tolist()))
        if not 0 <= self.frequency <= 0.5:
            raise ArgumentError(f"frequency {self.frequency} outside [0, 0.5]")


@dataclass(frozen=True)
class DampedSinusoidModel:
    terms: Sequence[DampedTerm] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


def generate_damped(model, n):
    """Sum of polynomially modulated damped sinusoids sampled at k = 1..n."""
    if int(n) != n or n < 1:
        raise ArgumentError(f"length must be a positive integer, got {n}")
    k = np.arange(1, int(n) + 1, dtype=float)
    out = np.zeros(int(n))
    for term in model.terms:
        poly = np.polynomial.polynomial.polyval(k, term.amplitude)
        out += poly * np.exp(term.damping * k) * np.sin(2 * np.pi * term.frequency * k + term.phase)
    return out


@dataclass(frozen=True)
class ExpTerm:
    """``P(k) lam^k`` with complex root ``lam != 0`` and polynomial coefficients
    (increasing powers, last one nonzero). Its multiplicity is ``len(poly)``."""

    lam: complex
    poly: Sequence[complex] = (1.0,)

    def __post_init__(self):
        poly = np.atleast_1d(np.asarray(self.poly, dtype=complex))
        if poly.size == 0 or poly[-1] == 0:
            raise ArgumentError("polynomial must have a nonzero leading coefficient")
        if self.lam == 0:
            raise ArgumentError("exponential roots must be nonzero; use head transients instead")
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "poly", tuple(poly.tolist()))

    @property
    def multiplicity(self):
        return len(self.poly)


@dataclass(frozen=True)
class CanonicalModel:
    """Canonical representation of a finite-rank series.

    ``p_k = sum_j head[j] delta(k = j) + sum_l tail[l] delta(k = n - 1 - l)
    + sum_j P_j(k) lam_j^k`` for k = 0..n-1. Non-real roots must come in
    conjugate pairs with conjugate polynomials so the series is real.
    The rank is ``len(head) + sum(multiplicities) + len(tail)``.
    """

    head: Sequence[float] = ()
    tail: Sequence[float] = ()
    terms: Sequence[ExpTerm] = ()

    def __post_init__(self):
        head = tuple(float(x) for x in self.head)
        tail = tuple(float(x) for x in self.tail)
        if head and head[-1] == 0:
            raise ArgumentError("last head coefficient must be nonzero")
        if tail and tail[-1] == 0:
            raise ArgumentError("last tail coefficient must be nonzero")
        terms = tuple(self.terms)
        lams = [t.lam for t in terms]
        if len(set(lams)) != len(lams):
            raise ArgumentError("exponential roots must be distinct")
        for t in terms:
            if abs(t.lam.imag) > 0:
                mate = [u for u in terms if u.lam == t.lam.conjugate()]
                if not mate or not np.allclose(np.conj(t.poly), mate[0].poly, rtol=1e-12, atol=0):
                    raise ArgumentError(f"complex root {t.lam} lacks a conjugate partner")
            elif np.any(np.imag(t.poly) != 0):
                raise ArgumentError(f"real root {t.lam} needs a real polynomial")
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "terms", terms)

    @property
    def rank(self):
        return len(self.head) + len(self.tail) + sum(t.multiplicity for t in self.terms)


def generate_canonical(model, n):
    """Sample a canonical model at k = 0..n-1."""
    if int(n) != n or n < 1:
        raise ArgumentError(f"length must be a positive integer, got {n}")
    n = int(n)
    if len(model.head) + len(model.tail) > n:
        raise ArgumentError("transients do not fit into the requested length")
    k = np.arange(n)
    out = np.zeros(n, dtype=complex)
    for t in model.terms:
        out += np.polynomial.polynomial.polyval(k, t.poly) * t.lam ** k
    out = out.real
    out[: len(model.head)] += model.head
    for l, b in enumerate(model.tail):
        out[n - 1 - l] += b
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise: ``white`` (sigma), ``alternating`` (c) or ``red`` (sigma, alpha).

    Random draws use numpy's PCG64 generator seeded with ``seed``.
    """

    kind: str
    sigma: float = 0.0
    c: float = 0.0
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("white", "alternating", "red"):
            raise ArgumentError(f"unknown noise kind {self.kind!r}; expected white, alternating or red")
        if self.sigma < 0 or self.c < 0:
            raise ArgumentError("noise scales must be nonnegative")
        if not abs(self.alpha) < 1:
            raise ArgumentError(f"AR coefficient must satisfy |alpha| < 1, got {self.alpha}")


def generate_noise(model, n):
    """Noise realisation of length ``n``.

    * white: i.i.d. N(0, sigma^2)
    * alternating: ``c (-1)^j`` for j = 1..n (no randomness)
    * red: ``sigma * u_j`` with ``u_j = alpha u_{j-1} + eta_j``,
      ``eta_j ~ N(0, 1 - alpha^2)``, ``u_0 = 0``
    """
    if int(n) != n or n < 1:
        raise ArgumentError(f"length must be a positive integer, got {n}")
    n = int(n)
    if model.kind == "alternating":
        return model.c * (-1.0) ** np.arange(1, n + 1)
    rng = np.random.default_rng(model.seed)
    if model.kind == "white":
        return model.sigma * rng.standard_normal(n)
    eta = np.sqrt(1 - model.alpha ** 2) * rng.standard_normal(n)
    return model.sigma * lfilter([1.0], [1.0, -model.alpha], eta)

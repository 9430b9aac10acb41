"""Special functions used by every threshold rule.

Only five functions live here: the standard-normal upper tail and its
inverse, the Student-t upper tail, the Poisson upper tail and the closed
form of ``E[min(|Z|, c) / c]`` for standard normal ``Z``. All of them are
pure and accept scalars; ``normal_tail`` also accepts arrays because the
threshold scans evaluate it on whole candidate sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ._errors import DomainError

__all__ = [
    "Tolerance",
    "normal_tail",
    "normal_upper_quantile",
    "poisson_tail",
    "student_t_tail",
    "expected_gc",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_POISSON_SUM_MAX_RATE = 30.0


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise DomainError("tolerances must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")


def normal_tail(t):
    """Upper tail ``P(Z >= t)`` of the standard normal distribution.

    Evaluated through ``erfc`` so that the far tail keeps full relative
    precision instead of suffering the cancellation of ``1 - Phi(t)``.
    Accepts a scalar or an array; returns the same shape.
    """
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("normal_tail requires finite input")
    out = 0.5 * special.erfc(arr / math.sqrt(2.0))
    if out.ndim == 0:
        return float(out)
    return out


def normal_upper_quantile(gamma: float, tol: Tolerance = Tolerance(abs_tol=1e-13)) -> float:
    """Return ``z`` with ``normal_tail(z) == gamma``.

    Safeguarded Newton iteration on ``log normal_tail(z) - log gamma``,
    which stays well scaled far into either tail; any Newton step that
    leaves the current bracket is replaced by bisection.
    """
    if not (0.0 < gamma < 1.0) or not math.isfinite(gamma):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    if gamma == 0.5:
        return 0.0
    log_gamma = math.log(gamma)
    lo, hi = -40.0, 40.0
    z = 0.0
    for _ in range(tol.max_iter):
        log_tail = float(special.log_ndtr(-z))
        f = log_tail - log_gamma
        if f > 0:
            lo = z
        else:
            hi = z
        # d/dz log tail = -pdf / tail
        slope = -math.exp(-0.5 * z * z - math.log(_SQRT_2PI) - log_tail)
        cand = z - f / slope
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        if abs(cand - z) <= tol.abs_tol * max(1.0, abs(z)):
            return cand
        z = cand
    return z


def poisson_tail(lam: float, k: int) -> float:
    """``P(X >= k)`` for ``X ~ Poisson(lam)``.

    Small rates use guarded summation of the pmf (upper terms when ``k``
    exceeds the mode, complement of the lower terms otherwise); rates
    above 30 use the regularized lower incomplete gamma ``P(k, lam)``.
    ``k == 0`` is always exceeded.
    """
    if not math.isfinite(lam) or lam < 0:
        raise DomainError(f"Poisson rate must be finite and >= 0, got {lam!r}")
    k = int(k)
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return 1.0
    if lam == 0.0:
        return 0.0
    if lam > _POISSON_SUM_MAX_RATE:
        return float(special.gammainc(k, lam))
    log_lam = math.log(lam)
    if k > lam:
        total = 0.0
        j = k
        term = math.exp(j * log_lam - lam - math.lgamma(j + 1))
        while term > 0.0:
            total += term
            j += 1
            term *= lam / j
            if term < 1e-18 * total:
                break
        return min(total, 1.0)
    term = math.exp(-lam)
    lower = term
    for j in range(1, k):
        term *= lam / j
        lower += term
    return max(0.0, 1.0 - lower)


def student_t_tail(t: float, df: float) -> float:
    """Upper tail ``P(T >= t)`` of the central Student-t with ``df`` degrees of freedom.

    Uses the regularized incomplete beta identity
    ``P(|T| >= |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)``.
    """
    if not df >= 1:
        raise DomainError(f"df must be >= 1, got {df!r}")
    if not math.isfinite(t):
        raise DomainError("student_t_tail requires finite t")
    x = df / (df + t * t)
    two_sided = float(special.betainc(0.5 * df, 0.5, x))
    if t >= 0:
        return 0.5 * two_sided
    return 1.0 - 0.5 * two_sided


def student_t_tail_array(t, df):
    """Vectorised ``student_t_tail`` over arrays of ``t`` (and ``df``)."""
    t = np.asarray(t, dtype=float)
    df = np.asarray(df, dtype=float)
    if np.any(df < 1):
        raise DomainError("df must be >= 1")
    x = df / (df + t * t)
    half = 0.5 * special.betainc(0.5 * df, 0.5, x)
    return np.where(t >= 0, half, 1.0 - half)


def expected_gc(c: float) -> float:
    """``E[min(|Z|, c) / c]`` for a standard normal ``Z``."""
    if not (c > 0) or not math.isfinite(c):
        raise DomainError(f"truncation level must be positive, got {c!r}")
    return 2.0 / (c * _SQRT_2PI) * -math.expm1(-0.5 * c * c) + 2.0 * normal_tail(c)


def expected_gc_array(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if np.any(~(c > 0)):
        raise DomainError("truncation levels must be positive")
    return 2.0 / (c * _SQRT_2PI) * -np.expm1(-0.5 * c * c) + special.erfc(c / math.sqrt(2.0))

"""Estimate the proportion of alternative hypotheses from the t-statistics.

For each truncation level ``c`` the average of ``min(|T_i|, c) / c`` is
compared with its value under a standard normal null; the normalised
excess, maximised over ``c``, is a conservative estimate of the
alternative proportion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._backend import kernels
from ._errors import DomainError
from .numerics import expected_gc, expected_gc_array, normal_tail
from .tstats import TStatVector


def null_ratio_sd(c: float, m: int) -> float:
    """Standard deviation of the normalised excess at ``c`` when all ``m`` statistics are null."""
    eg = expected_gc(c)
    phi = math.exp(-0.5 * c * c) / math.sqrt(2.0 * math.pi)
    inner = (1.0 - 2.0 * normal_tail(c)) - 2.0 * c * phi
    second = (inner + c * c * 2.0 * normal_tail(c)) / (c * c)
    return math.sqrt(max(second - eg * eg, 0.0) / m) / (1.0 - eg)


def adaptive_lower_bound(m: int, noise_sd: float, hi: float) -> float:
    """Smallest truncation level at which the null noise of the ratio is at most ``noise_sd``.

    The ratio's noise grows without bound as ``c -> 0`` (its denominator
    vanishes), so an unrestricted supremum is driven by sampling error;
    the bound shrinks towards 0 as ``m`` grows.
    """
    if null_ratio_sd(hi, m) > noise_sd:
        return hi
    lo = 1e-5
    if null_ratio_sd(lo, m) <= noise_sd:
        return lo
    return float(optimize.brentq(lambda c: null_ratio_sd(c, m) - noise_sd, lo, hi, xtol=1e-10))


@dataclass(frozen=True)
class GridSpec:
    """Logarithmic grid of truncation levels.

    ``lo=None`` (the default) picks the lower end from the number of
    features via :func:`adaptive_lower_bound`; an explicit ``lo`` is used
    as given.
    """

    lo: float | None = None
    hi: float = 50.0
    points: int = 200
    noise_sd: float = 0.04

    def __post_init__(self):
        if self.points < 1:
            raise DomainError("grid needs at least one point")
        if not self.hi > 0 or (self.lo is not None and not (0 < self.lo <= self.hi)):
            raise DomainError("grid bounds must satisfy 0 < lo <= hi")
        if self.lo is not None and self.points > 1 and self.lo == self.hi:
            raise DomainError("degenerate grid: lo == hi with several points")
        if not self.noise_sd > 0:
            raise DomainError("noise_sd must be positive")

    def lower(self, m: int) -> float:
        return self.lo if self.lo is not None else adaptive_lower_bound(m, self.noise_sd, self.hi)

    def values(self, m: int) -> np.ndarray:
        lo = self.lower(m)
        if self.points == 1 or lo == self.hi:
            return np.array([lo])
        return np.geomspace(lo, self.hi, self.points)


@dataclass(frozen=True, eq=False)
class Pi1Estimate:
    pi1_hat: float
    c_star: float
    raw: float
    clamped: bool
    c: np.ndarray
    g_hat: np.ndarray
    expected: np.ndarray
    ratio: np.ndarray

    @property
    def grid(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.c.tolist(), self.g_hat.tolist(), self.expected.tolist(), self.ratio.tolist()))


def g_hat(tv: TStatVector, c: float) -> float:
    if not c > 0:
        raise DomainError(f"truncation level must be positive, got {c!r}")
    if tv.m == 0:
        raise DomainError("no valid features")
    return float(np.minimum(tv.abs_sorted, c).sum() / (c * tv.m))


def estimate_pi1(tv: TStatVector, grid: GridSpec | None = None) -> Pi1Estimate:
    grid = grid or GridSpec()
    if tv.m == 0:
        raise DomainError("no valid features")
    cs = grid.values(tv.m)
    if cs.size == 0:
        raise DomainError("empty grid")
    g = kernels.g_hat_grid(tv.abs_sorted, cs)
    eg = expected_gc_array(cs)
    ratio = (g - eg) / (1.0 - eg)
    j = int(np.argmax(ratio))
    raw = float(ratio[j])
    pi1_hat = min(max(raw, 0.0), 1.0)
    return Pi1Estimate(
        pi1_hat=pi1_hat,
        c_star=float(cs[j]),
        raw=raw,
        clamped=pi1_hat != raw,
        c=cs,
        g_hat=g,
        expected=eg,
        ratio=ratio,
    )

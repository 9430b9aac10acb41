"""p-value baselines: Benjamini-Hochberg step-up and Storey-Tibshirani q-values."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import make_smoothing_spline

from ._errors import DomainError
from .critical import DecisionSet
from .numerics import normal_tail, student_t_tail_array
from .tstats import OneSample, TStatVector, TwoSample

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = tuple(np.round(np.arange(0.0, 0.951, 0.05), 10))
SPLINE_DF = 3.0


@dataclass(frozen=True, eq=False)
class PValueVector:
    p: np.ndarray
    source: str

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or np.any(~((p >= 0) & (p <= 1))):
            raise DomainError("p-values must be a 1-d array in [0, 1]")
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> int:
        return self.p.size


@dataclass(frozen=True, eq=False)
class QValueResult:
    pi0_hat: float
    q: np.ndarray | None
    lambda_grid: tuple[tuple[float, float], ...]


def p_values(tv: TStatVector, source: str = "t") -> PValueVector:
    """Two-sided p-values from the t-statistics.

    ``source="t"`` uses Student-t tails with ``n - 1`` degrees of freedom
    (one-sample) or per-feature Welch-Satterthwaite degrees of freedom
    (two-sample); ``source="normal"`` uses the standard normal.
    Flagged features get ``p = 1``.
    """
    absT = np.abs(np.where(tv.flagged, 0.0, tv.stats))
    if source == "normal":
        p = 2.0 * normal_tail(absT)
    elif source == "t":
        design = tv.design
        if isinstance(design, TwoSample):
            if tv.welch_df is None:
                raise DomainError("two-sample p-values need Welch degrees of freedom")
            df = np.where(tv.flagged, 1.0, tv.welch_df)
        elif isinstance(design, OneSample) and design.n >= 2:
            df = design.n - 1.0
        else:
            raise DomainError("Student-t p-values need the sample size")
        p = 2.0 * student_t_tail_array(absT, df)
    else:
        raise DomainError(f"unknown p-value source {source!r}")
    p = np.minimum(np.asarray(p, dtype=float), 1.0)
    if tv.flagged.any():
        logger.warning("%d flagged feature(s) assigned p = 1", int(tv.flagged.sum()))
        p[tv.flagged] = 1.0
    return PValueVector(p, source)


def _step_up_adjusted(p: np.ndarray, scale: float) -> np.ndarray:
    """``min_{j >= i} scale * m * p_(j) / j`` capped at 1, returned in input order."""
    m = p.size
    order = np.argsort(p, kind="stable")
    raw = scale * m * p[order] / np.arange(1, m + 1)
    adj = np.minimum(np.minimum.accumulate(raw[::-1])[::-1], 1.0)
    out = np.empty(m)
    out[order] = adj
    return out


def bh_procedure(p: PValueVector, gamma: float) -> DecisionSet:
    """Step-up rule, evaluated through BH-adjusted p-values.

    ``p_(i) <= gamma i / m`` for some ``i >= j`` is tested as
    ``min_{i >= j} m p_(i) / i <= gamma``, the same arithmetic as the
    q-values, so q-values at ``pi0 = 1`` give exactly this rejection set.
    """
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    if p.m == 0:
        return DecisionSet(np.zeros(0, dtype=bool))
    return DecisionSet(_step_up_adjusted(p.p, 1.0) <= gamma)


@lru_cache(maxsize=32)
def _df3_smoother(grid: tuple[float, ...]):
    """Linear map from pi0(lambda) values to the df=3 smoothing-spline fit at lambda = 1.

    The smoothing penalty is tuned by bisection on log(lam) until the trace
    of the smoother matrix equals 3. Beyond the last grid point the fit is
    continued linearly, as a natural spline is.
    """
    x = np.asarray(grid, dtype=float)
    n = x.size
    eye = np.eye(n)

    def fits(lam):
        return [make_smoothing_spline(x, eye[j], lam=lam) for j in range(n)]

    def trace(lam):
        return sum(float(s(x[j])) for j, s in enumerate(fits(lam)))

    lo, hi = -15.0, 5.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if trace(10.0**mid) > SPLINE_DF:
            lo = mid
        else:
            hi = mid
    splines = fits(10.0 ** (0.5 * (lo + hi)))
    xe = x[-1]
    return np.array([float(s(xe)) + float(s.derivative()(xe)) * (1.0 - xe) for s in splines])


def storey_pi0(p: PValueVector, lambda_grid=DEFAULT_LAMBDA_GRID) -> QValueResult:
    grid = tuple(float(v) for v in lambda_grid)
    if len(grid) < 4:
        raise DomainError("lambda grid needs at least 4 points")
    lam = np.asarray(grid)
    if np.any(lam < 0) or np.any(lam > 0.95) or np.any(np.diff(lam) <= 0):
        raise DomainError("lambda grid must be increasing within [0, 0.95]")
    m = p.m
    srt = np.sort(p.p)
    exceed = m - np.searchsorted(srt, lam, side="right")
    pi0_lam = exceed / (m * (1.0 - lam))
    if np.ptp(pi0_lam) == 0.0:
        est = float(pi0_lam[0])
    else:
        est = float(_df3_smoother(grid) @ pi0_lam)
    est = min(max(est, 1.0 / m), 1.0)
    return QValueResult(est, None, tuple(zip(grid, pi0_lam.tolist())))


def q_values(p: PValueVector, pi0: float) -> QValueResult:
    if not (0.0 < pi0 <= 1.0):
        raise DomainError(f"pi0 must lie in (0, 1], got {pi0!r}")
    return QValueResult(pi0, _step_up_adjusted(p.p, pi0), ())


def storey_procedure(p: PValueVector, gamma: float, lambda_grid=DEFAULT_LAMBDA_GRID):
    """Reject ``q <= gamma`` with the spline-extrapolated null proportion."""
    est = storey_pi0(p, lambda_grid)
    res = q_values(p, est.pi0_hat)
    out = QValueResult(est.pi0_hat, res.q, est.lambda_grid)
    return DecisionSet(res.q <= gamma), out

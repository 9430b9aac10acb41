"""Critical values for FDTP, FDR and k-FWER control, data-driven and oracle.

Data-driven FDTP and FDR rules are step functions of the empirical tail,
so their infimum is found by scanning the sorted unique ``|T_i|``. The
k-FWER rule depends only on ``m`` and the estimated alternative
proportion and is solved by bisection. The oracle rules use the true
labels and noncentralities with Gaussian tail approximations.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._errors import DomainError
from .numerics import normal_tail, normal_upper_quantile, poisson_tail
from .tstats import TStatVector

logger = logging.getLogger(__name__)

TAU_FLOOR = 1e-12
PI1_MARGIN = 1e-4
KFWER_T_MAX = 40.0
BISECT_TOL = 1e-8

METHODS = ("fdtp", "fdr", "kfwer")
DEPENDENCE = ("dependent", "independent")


@dataclass(frozen=True)
class ControlSpec:
    method: str
    gamma: float
    alpha: float | None = None
    k: int | None = None
    dependence: str = "dependent"

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        if not (0.0 < self.gamma < 1.0):
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if self.method == "fdtp" and (self.alpha is None or not (0.0 < self.alpha < 1.0)):
            raise DomainError(f"fdtp needs alpha in (0, 1), got {self.alpha!r}")
        if self.method == "kfwer" and (self.k is None or int(self.k) < 1):
            raise DomainError(f"kfwer needs k >= 1, got {self.k!r}")
        if self.dependence not in DEPENDENCE:
            raise DomainError(f"unknown dependence {self.dependence!r}")

    @classmethod
    def fdtp(cls, alpha, gamma, dependence="dependent"):
        return cls("fdtp", gamma, alpha=alpha, dependence=dependence)

    @classmethod
    def fdr(cls, gamma):
        return cls("fdr", gamma)

    @classmethod
    def kfwer(cls, k, gamma):
        return cls("kfwer", gamma, k=int(k))

    def label(self) -> str:
        if self.method == "fdtp":
            return f"fdtp(alpha={self.alpha:g})"
        if self.method == "kfwer":
            return f"kfwer(k={self.k})"
        return "fdr"


@dataclass(frozen=True, eq=False)
class CriticalValue:
    """Outcome of a threshold rule.

    ``t_hat`` is ``None`` when no threshold satisfies the rule (nothing is
    rejected). ``path_t``/``path_value`` hold the criterion evaluated at
    every candidate (or every bisection iterate), and ``flags`` names any
    repairs or degeneracies encountered.
    """

    t_hat: float | None
    spec: ControlSpec
    pi1_used: float
    m: int
    path_t: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    path_value: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    flags: tuple[str, ...] = ()
    clamp_mask: np.ndarray | None = field(repr=False, default=None)
    floor_mask: np.ndarray | None = field(repr=False, default=None)

    @property
    def no_rejection(self) -> bool:
        return self.t_hat is None

    @property
    def path(self) -> list[tuple[float, float]]:
        return list(zip(self.path_t.tolist(), self.path_value.tolist()))

    def _at_t_hat(self, mask) -> bool:
        if self.t_hat is None or mask is None:
            return False
        return bool(mask[np.searchsorted(self.path_t, self.t_hat)])

    def clamp_active_at_t_hat(self) -> bool:
        return self._at_t_hat(self.clamp_mask)

    def floor_active_at_t_hat(self) -> bool:
        return self._at_t_hat(self.floor_mask)


@dataclass(frozen=True, eq=False)
class DecisionSet:
    rejected: np.ndarray

    @property
    def R(self) -> int:
        return int(self.rejected.sum())


# -- criterion pieces on precomputed (p_hat, normal tail) arrays -------------

def _nu(phat, tail, pi1, alpha):
    return alpha * phat - 2.0 * (1.0 - pi1) * tail


def _tau_sq_dep(phat, tail, pi1, alpha):
    if not pi1 > 0:
        raise DomainError("dependent variance needs pi1 > 0")
    raw = phat - 2.0 * (1.0 - pi1) * tail
    a = np.clip(raw, 0.0, pi1)
    val = alpha**2 * a * (1.0 - a / pi1) + 2.0 * (1.0 - alpha) ** 2 * (1.0 - pi1) * tail * (1.0 - 2.0 * tail)
    return np.maximum(val, TAU_FLOOR), (raw < 0.0) | (raw > pi1), val < TAU_FLOOR


def _tau_sq_ind(phat, tail, pi1, alpha):
    q = 1.0 - pi1
    val = (
        alpha**2 * phat * (1.0 - phat)
        + 4.0 * alpha * q * phat * tail
        + 2.0 * q * tail * (1.0 - 2.0 * alpha - 2.0 * q * tail)
    )
    floored = val < TAU_FLOOR
    return np.maximum(val, TAU_FLOOR), np.zeros_like(floored), floored


def _scalar_or_array(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _phat_tail(tv: TStatVector, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("threshold must be nonnegative")
    if tv.m == 0:
        raise DomainError("no valid features")
    return tv.exceed_counts(t) / tv.m, np.asarray(normal_tail(t))


def nu_m(tv: TStatVector, pi1: float, alpha: float, t):
    phat, tail = _phat_tail(tv, t)
    return _scalar_or_array(_nu(phat, tail, pi1, alpha))


def tau_sq_dependent(tv: TStatVector, pi1: float, alpha: float, t):
    phat, tail = _phat_tail(tv, t)
    return _scalar_or_array(_tau_sq_dep(phat, tail, pi1, alpha)[0])


def tau_sq_independent(tv: TStatVector, pi1: float, alpha: float, t):
    phat, tail = _phat_tail(tv, t)
    return _scalar_or_array(_tau_sq_ind(phat, tail, pi1, alpha)[0])


def _first_true(mask: np.ndarray) -> int | None:
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


# -- data-driven rules --------------------------------------------------------

def critical_fdtp(tv: TStatVector, pi1: float, alpha: float, gamma: float,
                  dependence: str = "dependent") -> CriticalValue:
    spec = ControlSpec.fdtp(alpha, gamma, dependence)
    if tv.m < 2:
        raise DomainError("fdtp needs at least 2 valid features")
    flags = []
    if not (0.0 < pi1 < 1.0 - alpha):
        warnings.warn(
            f"estimated alternative proportion {pi1:.4g} outside (0, 1 - alpha); clipped",
            RuntimeWarning,
            stacklevel=2,
        )
        pi1 = min(max(pi1, PI1_MARGIN), 1.0 - alpha - PI1_MARGIN)
        flags.append("pi1_clipped")
    u = tv.candidates
    phat = tv.exceed_counts(u) / tv.m
    tail = normal_tail(u)
    nu = _nu(phat, tail, pi1, alpha)
    tau_fn = _tau_sq_dep if dependence == "dependent" else _tau_sq_ind
    tau2, clamped, floored = tau_fn(phat, tail, pi1, alpha)
    crit = math.sqrt(tv.m) * nu / np.sqrt(tau2)
    j = _first_true(crit >= normal_upper_quantile(gamma))
    if clamped.any():
        logger.debug("alternative-mass clamp active at %d of %d candidates", int(clamped.sum()), u.size)
        flags.append("alt_mass_clamped")
    if floored.any():
        flags.append("tau_floored")
    return CriticalValue(
        t_hat=None if j is None else float(u[j]),
        spec=spec, pi1_used=pi1, m=tv.m,
        path_t=u, path_value=crit, flags=tuple(flags), clamp_mask=clamped, floor_mask=floored,
    )


def critical_fdr(tv: TStatVector, pi1: float, gamma: float) -> CriticalValue:
    spec = ControlSpec.fdr(gamma)
    if tv.m == 0:
        raise DomainError("no valid features")
    if not (0.0 <= pi1 <= 1.0):
        raise DomainError(f"pi1 must lie in [0, 1], got {pi1!r}")
    u = tv.candidates
    phat = tv.exceed_counts(u) / tv.m
    # Candidates are observed |T| values, so phat > 0 throughout.
    ratio = 2.0 * (1.0 - pi1) * normal_tail(u) / phat
    j = _first_true(ratio <= gamma)
    return CriticalValue(
        t_hat=None if j is None else float(u[j]),
        spec=spec, pi1_used=pi1, m=tv.m, path_t=u, path_value=ratio,
    )


def _bisect_first(pred, lo: float, hi: float, tol: float = BISECT_TOL):
    """Smallest t in (lo, hi] with pred(t) true, given pred(lo) false and pred(hi) true."""
    its_t, its_v = [], []
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, val = pred(mid)
        its_t.append(mid)
        its_v.append(val)
        if ok:
            hi = mid
        else:
            lo = mid
    return hi, its_t, its_v


def critical_kfwer(m: int, pi1: float, k: int, gamma: float) -> CriticalValue:
    spec = ControlSpec.kfwer(k, gamma)
    if m < 1:
        raise DomainError("m must be positive")
    if not (0.0 <= pi1 <= 1.0):
        raise DomainError(f"pi1 must lie in [0, 1], got {pi1!r}")
    scale = 2.0 * m * (1.0 - pi1)

    def pred(t):
        val = poisson_tail(scale * normal_tail(t), k)
        return val <= gamma, val

    ok0, v0 = pred(0.0)
    if ok0:
        return CriticalValue(0.0, spec, pi1, m, np.array([0.0]), np.array([v0]), flags=("degenerate",))
    t_hat, its_t, its_v = _bisect_first(pred, 0.0, KFWER_T_MAX)
    order = np.argsort(its_t)
    return CriticalValue(
        t_hat, spec, pi1, m,
        path_t=np.asarray(its_t)[order], path_value=np.asarray(its_v)[order],
    )


# -- oracle rules -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OracleModel:
    """True labels and per-alternative noncentralities.

    ``deltas`` holds one value per alternative (in label order):
    ``sqrt(n) mu_i / sigma_i`` for one-sample data or
    ``(mu_i - nu_i) / sqrt(sigma_i^2 / n1 + tau_i^2 / n2)`` for two-sample data.
    """

    labels: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=bool)
        deltas = np.asarray(self.deltas, dtype=float)
        if deltas.shape != (int(labels.sum()),):
            raise DomainError("need exactly one delta per alternative")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "deltas", deltas)

    @classmethod
    def one_sample(cls, labels, mu, sigma, n):
        """``mu``/``sigma`` are full-length arrays; null entries are ignored."""
        labels = np.asarray(labels, dtype=bool)
        mu = np.broadcast_to(np.asarray(mu, dtype=float), labels.shape)
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), labels.shape)
        return cls(labels, math.sqrt(n) * mu[labels] / sigma[labels])

    @classmethod
    def two_sample(cls, labels, mean_diff, sigma1, sigma2, n1, n2):
        labels = np.asarray(labels, dtype=bool)
        diff = np.broadcast_to(np.asarray(mean_diff, dtype=float), labels.shape)[labels]
        s1 = np.broadcast_to(np.asarray(sigma1, dtype=float), labels.shape)[labels]
        s2 = np.broadcast_to(np.asarray(sigma2, dtype=float), labels.shape)[labels]
        return cls(labels, diff / np.sqrt(s1**2 / n1 + s2**2 / n2))

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def m1(self) -> int:
        return int(self.labels.sum())

    @property
    def m0(self) -> int:
        return self.m - self.m1

    def f0(self, t):
        return 2.0 * np.asarray(normal_tail(t))

    def f1(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.m1 == 0:
            return np.zeros_like(t)
        out = np.empty_like(t)
        d = self.deltas
        for start in range(0, t.size, 256):
            tt = t[start:start + 256, None]
            out[start:start + 256] = (normal_tail(tt - d) + normal_tail(tt + d)).mean(axis=1)
        return out


_ORACLE_GRID = np.concatenate([np.arange(0.0, 12.0, 0.02), np.arange(12.0, KFWER_T_MAX + 0.5, 0.5)])


def _oracle_criterion(model: OracleModel, spec: ControlSpec):
    m0, m1 = model.m0, model.m1
    if spec.method == "fdr":
        def crit(t):
            a, b = m0 * model.f0(t), m1 * model.f1(t)
            val = a / (a + b)
            return val <= spec.gamma, val
    elif spec.method == "fdtp":
        alpha, z = spec.alpha, normal_upper_quantile(spec.gamma)

        def crit(t):
            f0, f1 = model.f0(t), model.f1(t)
            mu = alpha * m1 * f1 - (1 - alpha) * m0 * f0
            var = alpha**2 * m1 * f1 * (1 - f1) + (1 - alpha) ** 2 * m0 * f0 * (1 - f0)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.where(var > 0, mu / np.sqrt(np.maximum(var, 0.0)), np.sign(mu) * np.inf)
            return val >= z, val
    else:
        def crit(t):
            lam = m0 * np.atleast_1d(model.f0(t))
            val = np.array([poisson_tail(float(x), spec.k) for x in lam])
            return val <= spec.gamma, val
    return crit


def oracle_critical(model: OracleModel, spec: ControlSpec) -> CriticalValue:
    """Threshold from the known-truth rules, scanned on a grid then bisected to 1e-8."""
    if spec.method in ("fdr", "fdtp") and model.m1 == 0:
        raise DomainError("oracle fdr/fdtp rules need at least one alternative")
    crit = _oracle_criterion(model, spec)
    grid = _ORACLE_GRID
    ok, vals = crit(grid)
    j = _first_true(ok)
    pi1 = model.m1 / model.m
    if j is None:
        return CriticalValue(None, spec, pi1, model.m, grid, vals)
    if j == 0:
        return CriticalValue(0.0, spec, pi1, model.m, grid, vals, flags=("degenerate",))

    def pred(t):
        o, v = crit(np.array([t]))
        return bool(o[0]), float(v[0])

    t_hat, _, _ = _bisect_first(pred, float(grid[j - 1]), float(grid[j]))
    return CriticalValue(t_hat, spec, pi1, model.m, grid, vals)


def data_driven_critical(tv: TStatVector, pi1: float, spec: ControlSpec) -> CriticalValue:
    """Dispatch ``spec`` to the matching data-driven rule."""
    if spec.method == "fdr":
        return critical_fdr(tv, pi1, spec.gamma)
    if spec.method == "fdtp":
        return critical_fdtp(tv, pi1, spec.alpha, spec.gamma, spec.dependence)
    return critical_kfwer(tv.m, pi1, spec.k, spec.gamma)


def reject(tv: TStatVector, cv: CriticalValue) -> DecisionSet:
    if cv.t_hat is None:
        return DecisionSet(np.zeros(tv.stats.size, dtype=bool))
    with np.errstate(invalid="ignore"):
        rejected = (np.abs(tv.stats) >= cv.t_hat) & ~tv.flagged
    return DecisionSet(rejected)

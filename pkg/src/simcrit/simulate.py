"""Monte-Carlo harness: hidden-Markov truth labels, synthetic expression data,
replicated evaluation of the threshold rules and the p-value baselines.

Every replicate draws from its own counter-based stream derived from
``(seed, replicate index)``, so results do not depend on the number of
workers or on scheduling order.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from ._errors import DomainError
from .critical import ControlSpec, DecisionSet, OracleModel, data_driven_critical, reject
from .pi1 import GridSpec, estimate_pi1
from .tstats import Dataset, OneSample, TwoSample, t_statistics

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def rep_stream(seed: int, rep: int) -> np.random.Generator:
    """Independent Philox stream for replicate ``rep`` of master ``seed``."""
    k0 = splitmix64((seed & _MASK64) ^ splitmix64(rep))
    k1 = splitmix64(k0 ^ (rep * _GOLDEN & _MASK64))
    return np.random.Generator(np.random.Philox(key=np.array([k0, k1], dtype=np.uint64)))


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class HmmParams:
    """Two-state chain; ``p1`` is the 0 -> 1 transition, ``p0`` the 1 -> 0 transition."""

    p0: float
    p1: float

    def __post_init__(self):
        if not (0 < self.p0 < 1 and 0 < self.p1 < 1):
            raise DomainError("HMM transition probabilities must lie in (0, 1)")

    @property
    def pi1(self) -> float:
        return self.p1 / (self.p0 + self.p1)


@dataclass(frozen=True)
class IID:
    pi1: float

    def __post_init__(self):
        if not (0 <= self.pi1 <= 1):
            raise DomainError("pi1 must lie in [0, 1]")


@dataclass(frozen=True)
class EffectLaw:
    lo: float
    hi: float
    mirrored: bool = True

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError("effect law needs lo < hi")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        mu = rng.uniform(self.lo, self.hi, size)
        if self.mirrored:
            mu = np.where(rng.random(size) < 0.5, mu, -mu)
        return mu


ERROR_MODELS = ("normal", "student_t", "cauchy", "laplace", "exponential")


@dataclass(frozen=True)
class ErrorModel:
    """Per-observation noise law.

    Student-t, Laplace (unit scale) and Cauchy are left at their natural
    scale; the exponential is drawn as ``Exp(1) - 1`` so it has mean zero.
    """

    kind: str = "normal"
    df: float | None = None

    def __post_init__(self):
        if self.kind not in ERROR_MODELS:
            raise DomainError(f"unknown error model {self.kind!r}")
        if self.kind == "student_t" and (self.df is None or self.df <= 0):
            raise DomainError("student_t errors need df > 0")

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "normal":
            return rng.standard_normal(shape)
        if self.kind == "student_t":
            return rng.standard_t(self.df, shape)
        if self.kind == "cauchy":
            return rng.standard_cauchy(shape)
        if self.kind == "laplace":
            return rng.laplace(0.0, 1.0, shape)
        out = rng.standard_exponential(shape)
        out -= 1.0
        return out

    @property
    def sd(self) -> float:
        """Standard deviation; the Cauchy reports its unit scale instead."""
        if self.kind == "student_t":
            return math.sqrt(self.df / (self.df - 2)) if self.df > 2 else math.inf
        if self.kind == "laplace":
            return math.sqrt(2.0)
        return 1.0

    def label(self) -> str:
        return f"t({self.df:g})" if self.kind == "student_t" else self.kind


@dataclass(frozen=True)
class SimConfig:
    m: int
    design: OneSample | TwoSample
    truth: IID | HmmParams
    effect: EffectLaw
    error: ErrorModel = ErrorModel()
    reps: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.reps < 1:
            raise DomainError("m and reps must be positive")
        if isinstance(self.design, OneSample) and self.design.n < 2:
            raise DomainError("one-sample design needs n >= 2")
        if isinstance(self.design, TwoSample) and min(self.design.n1, self.design.n2) < 2:
            raise DomainError("two-sample design needs n1, n2 >= 2")

    @property
    def pi1(self) -> float:
        return self.truth.pi1


# -- generation --------------------------------------------------------------

def gen_labels(truth, m: int, rng: np.random.Generator) -> np.ndarray:
    """Truth indicators (True = alternative)."""
    if isinstance(truth, IID):
        return rng.random(m) < truth.pi1
    # Alternate geometric sojourns: runs in state 0 end at rate p1, in state 1 at rate p0.
    state = bool(rng.random() < truth.pi1)
    out = np.empty(m, dtype=bool)
    pos = 0
    batch = max(16, int(m * min(truth.p0, truth.p1)) + 16)
    while pos < m:
        rates = np.where((np.arange(batch) % 2 == 0) == (not state), truth.p1, truth.p0)
        lengths = rng.geometric(rates)
        for length in lengths:
            end = min(pos + int(length), m)
            out[pos:end] = state
            pos = end
            state = not state
            if pos >= m:
                break
    return out


@dataclass(frozen=True, eq=False)
class SimDraw:
    data: Dataset
    labels: np.ndarray
    mu: np.ndarray


def gen_dataset(cfg: SimConfig, labels: np.ndarray, rng: np.random.Generator) -> SimDraw:
    """Data for given labels; alternatives draw one effect per row."""
    labels = np.asarray(labels, dtype=bool)
    if labels.size != cfg.m:
        raise DomainError(f"{labels.size} labels for m = {cfg.m}")
    mu = np.zeros(cfg.m)
    m1 = int(labels.sum())
    mu[labels] = cfg.effect.draw(rng, m1)
    if isinstance(cfg.design, OneSample):
        x = cfg.error.draw(rng, (cfg.m, cfg.design.n))
        x += mu[:, None]
        return SimDraw(Dataset(x), labels, mu)
    n1, n2 = cfg.design.n1, cfg.design.n2
    values = cfg.error.draw(rng, (cfg.m, n1 + n2))
    values[:, n1:] += mu[:, None]
    groups = [1] * n1 + [2] * n2
    return SimDraw(Dataset(values, groups=groups), labels, mu)


def draw_replicate(cfg: SimConfig, rep: int) -> SimDraw:
    rng = rep_stream(cfg.seed, rep)
    labels = gen_labels(cfg.truth, cfg.m, rng)
    return gen_dataset(cfg, labels, rng)


def oracle_model(cfg: SimConfig, draw: SimDraw) -> OracleModel:
    """Known-truth noncentralities for a simulated replicate."""
    sd = cfg.error.sd
    if isinstance(cfg.design, OneSample):
        return OracleModel.one_sample(draw.labels, draw.mu, sd, cfg.design.n)
    # group 1 minus group 2, group 2 carries the effect
    return OracleModel.two_sample(draw.labels, -draw.mu, sd, sd, cfg.design.n1, cfg.design.n2)


# -- procedures and evaluation ---------------------------------------------------

PROCEDURE_KINDS = ("fdr", "fdtp", "kfwer", "bh", "st")


@dataclass(frozen=True)
class Procedure:
    """A rule to evaluate at every nominal level; ``gamma`` comes from the level list."""

    kind: str
    alpha: float | None = None
    k: int | None = None
    dependence: str = "dependent"
    pvalues: str = "t"

    def __post_init__(self):
        if self.kind not in PROCEDURE_KINDS:
            raise DomainError(f"unknown procedure {self.kind!r}")
        if self.kind == "fdtp" and self.alpha is None:
            raise DomainError("fdtp procedure needs alpha")
        if self.kind == "kfwer" and self.k is None:
            raise DomainError("kfwer procedure needs k")

    def spec(self, gamma: float) -> ControlSpec:
        return ControlSpec(self.kind, gamma, alpha=self.alpha, k=self.k, dependence=self.dependence)

    def label(self) -> str:
        if self.kind in ("bh", "st"):
            return self.kind
        return "ck-" + self.spec(0.5).label()


@dataclass(frozen=True)
class RepRecord:
    rep: int
    R: int
    V: int
    S: int
    m1: int
    t_hat: float | None
    pi1_hat: float | None
    failed: bool = False

    @property
    def fdp(self) -> float:
        return self.V / self.R if self.R > 0 else 0.0


@dataclass(eq=False)
class McEvaluation:
    procedure: Procedure
    level: float
    m: int
    records: list[RepRecord] = field(default_factory=list)

    def _arr(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def fdr(self) -> float:
        return float(np.mean([r.fdp for r in self.records]))

    def fdtp(self, alpha: float | None = None) -> float:
        alpha = alpha if alpha is not None else (self.procedure.alpha or self.level)
        return float(np.mean([r.fdp >= alpha for r in self.records]))

    def kfwer(self, k: int | None = None) -> float:
        k = k if k is not None else (self.procedure.k or 1)
        return float(np.mean(self._arr("V") >= k))

    @property
    def ndr(self) -> float | None:
        m1 = self._arr("m1").mean()
        return None if m1 == 0 else float(self._arr("S").mean() / m1)

    @property
    def rmse_pi1(self) -> float | None:
        est = [r.pi1_hat for r in self.records]
        if any(e is None for e in est):
            return None
        truth = self._arr("m1") / self.m
        return float(np.sqrt(np.mean((np.array(est) - truth) ** 2)))

    @property
    def failures(self) -> int:
        return sum(r.failed for r in self.records)

    def summary(self) -> dict:
        return {
            "procedure": self.procedure.label(),
            "level": self.level,
            "reps": len(self.records),
            "fdr": self.fdr,
            "fdtp": self.fdtp(),
            "kfwer": self.kfwer(),
            "ndr": self.ndr,
            "mean_rejections": float(self._arr("R").mean()),
            "rmse_pi1": self.rmse_pi1,
            "failures": self.failures,
        }


def _tally(rejected: np.ndarray, labels: np.ndarray):
    R = int(rejected.sum())
    S = int((rejected & labels).sum())
    return R, R - S, S


def _threshold_of(tv, rejected) -> float | None:
    if not rejected.any():
        return None
    return float(np.abs(tv.stats[rejected]).min())


def evaluate_replicate(cfg: SimConfig, rep: int, procedures, levels, grid: GridSpec | None = None):
    """All (procedure, level) records for one replicate, in procedure-major order."""
    draw = draw_replicate(cfg, rep)
    tv = t_statistics(draw.data)
    labels = draw.labels & ~tv.flagged
    m1 = int(draw.labels.sum())
    out = []
    try:
        pi1_hat = estimate_pi1(tv, grid).pi1_hat
    except DomainError:
        pi1_hat = None
    pv = None
    st_cache = {}
    for proc in procedures:
        for gamma in levels:
            try:
                if proc.kind in ("bh", "st"):
                    if pv is None:
                        pv = baselines.p_values(tv, proc.pvalues)
                    if proc.kind == "bh":
                        dec = baselines.bh_procedure(pv, gamma)
                        est = None
                    else:
                        if not st_cache:
                            pi0 = baselines.storey_pi0(pv).pi0_hat
                            st_cache.update(pi0=pi0, q=baselines.q_values(pv, pi0).q)
                        dec = DecisionSet(st_cache["q"] <= gamma)
                        est = 1.0 - st_cache["pi0"]
                    R, V, S = _tally(dec.rejected, labels)
                    out.append(RepRecord(rep, R, V, S, m1, _threshold_of(tv, dec.rejected), est))
                else:
                    if pi1_hat is None:
                        raise DomainError("no valid features")
                    cv = data_driven_critical(tv, pi1_hat, proc.spec(gamma))
                    R, V, S = _tally(reject(tv, cv).rejected, labels)
                    out.append(RepRecord(rep, R, V, S, m1, cv.t_hat, pi1_hat))
            except (DomainError, FloatingPointError) as exc:
                logger.warning("rep %d %s level %g failed: %s", rep, proc.label(), gamma, exc)
                out.append(RepRecord(rep, 0, 0, 0, m1, None, pi1_hat, failed=True))
    return out


def worker_count() -> int:
    env = os.environ.get("SIMCRIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_reps(fn, reps: int, workers: int | None = None):
    """``[fn(r) for r in range(reps)]`` on a bounded thread pool, order preserved."""
    workers = min(workers or worker_count(), reps)
    if workers <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(reps)))


def run_study(cfg: SimConfig, procedures, levels, grid: GridSpec | None = None,
              workers: int | None = None) -> list[McEvaluation]:
    """Evaluate every procedure at every level over ``cfg.reps`` replicates."""
    procedures = list(procedures)
    levels = [float(g) for g in levels]
    for g in levels:
        if not (0 < g < 1):
            raise DomainError(f"level must lie in (0, 1), got {g!r}")
    per_rep = map_reps(lambda r: evaluate_replicate(cfg, r, procedures, levels, grid), cfg.reps, workers)
    evals = [McEvaluation(p, g, cfg.m) for p in procedures for g in levels]
    for recs in per_rep:
        for ev, rec in zip(evals, recs):
            ev.records.append(rec)
    return evals


# -- gold standard and pi1 error ------------------------------------------------

GOLD_GRID = np.round(np.arange(0.0, 15.0, 0.001), 6)


def _replicate_abs(cfg: SimConfig, rep: int):
    draw = draw_replicate(cfg, rep)
    tv = t_statistics(draw.data)
    valid = ~tv.flagged
    absT = np.abs(tv.stats[valid])
    null = ~draw.labels[valid]
    return np.sort(absT), np.sort(absT[null])


def gold_standard_critical(cfg: SimConfig, spec: ControlSpec, reps: int | None = None,
                           grid: np.ndarray = GOLD_GRID, workers: int | None = None) -> float | None:
    """Smallest grid threshold whose Monte-Carlo error measure is at most ``gamma``.

    Replicates are generated once and shared across all trial thresholds.
    Returns ``None`` if the measure never drops to ``gamma`` while something
    is still rejected.
    """
    reps = reps if reps is not None else cfg.reps
    if reps < 100:
        raise DomainError("gold standard needs at least 100 replicates")
    sims = map_reps(lambda r: _replicate_abs(cfg, r), reps, workers)
    measure = np.zeros(grid.size)
    any_reject = np.zeros(grid.size, dtype=bool)
    for all_abs, null_abs in sims:
        R = all_abs.size - np.searchsorted(all_abs, grid, side="left")
        V = null_abs.size - np.searchsorted(null_abs, grid, side="left")
        any_reject |= R > 0
        fdp = np.divide(V, R, out=np.zeros(grid.size), where=R > 0)
        if spec.method == "fdr":
            measure += fdp
        elif spec.method == "fdtp":
            measure += fdp >= spec.alpha
        else:
            measure += V >= spec.k
    measure /= reps
    ok = np.flatnonzero((measure <= spec.gamma) & any_reject)
    return float(grid[ok[0]]) if ok.size else None


def rmse_pi1(cfg: SimConfig, reps: int | None = None, grid: GridSpec | None = None,
             workers: int | None = None) -> float:
    """RMSE of the alternative-proportion estimate against each replicate's realised m1/m."""
    reps = reps if reps is not None else cfg.reps
    if reps < 2:
        raise DomainError("rmse needs at least 2 replicates")

    def one(r):
        draw = draw_replicate(cfg, r)
        tv = t_statistics(draw.data)
        return estimate_pi1(tv, grid).pi1_hat - draw.labels.mean()

    err = np.array(map_reps(one, reps, workers))
    return float(np.sqrt(np.mean(err**2)))


def rmse(estimates, truths) -> float:
    e = np.asarray(estimates, dtype=float) - np.asarray(truths, dtype=float)
    return float(np.sqrt(np.mean(e**2)))


# -- JSON configuration ------------------------------------------------------------

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["m", "design", "truth", "effect", "error", "reps", "seed"],
    "additionalProperties": False,
    "properties": {
        "m": {"type": "integer", "minimum": 1},
        "design": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["type", "n"],
                 "properties": {"type": {"const": "one_sample"}, "n": {"type": "integer", "minimum": 2}}},
                {"type": "object", "additionalProperties": False, "required": ["type", "n1", "n2"],
                 "properties": {"type": {"const": "two_sample"},
                                "n1": {"type": "integer", "minimum": 2},
                                "n2": {"type": "integer", "minimum": 2}}},
            ]
        },
        "truth": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["type", "pi1"],
                 "properties": {"type": {"const": "iid"}, "pi1": {"type": "number", "minimum": 0, "maximum": 1}}},
                {"type": "object", "additionalProperties": False, "required": ["type", "p0", "p1"],
                 "properties": {"type": {"const": "hmm"},
                                "p0": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                                "p1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}},
            ]
        },
        "effect": {
            "type": "object", "additionalProperties": False, "required": ["type", "lo", "hi"],
            "properties": {"type": {"enum": ["mirrored_uniform", "uniform"]},
                           "lo": {"type": "number"}, "hi": {"type": "number"}},
        },
        "error": {
            "type": "object", "additionalProperties": False, "required": ["type"],
            "properties": {"type": {"enum": list(ERROR_MODELS)}, "df": {"type": "number", "exclusiveMinimum": 0}},
        },
        "reps": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "levels": {"type": "array", "minItems": 1,
                   "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
        "procedures": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False, "required": ["kind"],
                "properties": {
                    "kind": {"enum": list(PROCEDURE_KINDS)},
                    "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "k": {"type": "integer", "minimum": 1},
                    "dependence": {"enum": ["dependent", "independent"]},
                    "pvalues": {"enum": ["t", "normal"]},
                },
            },
        },
        "pi1_grid": {
            "type": "object", "additionalProperties": False,
            "properties": {"lo": {"type": "number", "exclusiveMinimum": 0},
                           "hi": {"type": "number", "exclusiveMinimum": 0},
                           "points": {"type": "integer", "minimum": 1}},
        },
        "gold_standard": {"type": "boolean"},
    },
}


def config_from_dict(doc: dict) -> SimConfig:
    """Build a ``SimConfig`` from an already schema-validated document."""
    d = doc["design"]
    design = OneSample(d["n"]) if d["type"] == "one_sample" else TwoSample(d["n1"], d["n2"])
    t = doc["truth"]
    truth = IID(t["pi1"]) if t["type"] == "iid" else HmmParams(t["p0"], t["p1"])
    e = doc["effect"]
    effect = EffectLaw(e["lo"], e["hi"], mirrored=e["type"] == "mirrored_uniform")
    err = doc["error"]
    error = ErrorModel(err["type"], err.get("df"))
    return SimConfig(doc["m"], design, truth, effect, error, doc["reps"], doc["seed"])


def procedures_from_dict(doc: dict) -> list[Procedure]:
    items = doc.get("procedures") or [{"kind": "fdr"}, {"kind": "bh"}, {"kind": "st"}]
    return [Procedure(**item) for item in items]

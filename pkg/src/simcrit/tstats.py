"""Observation matrices, one- and two-sample t-statistics, empirical tail."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from ._errors import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OneSample:
    n: int


@dataclass(frozen=True)
class TwoSample:
    n1: int
    n2: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature-by-sample matrix (rows are hypotheses).

    ``groups`` is ``None`` for a one-sample design, otherwise one label per
    column drawn from exactly two distinct values. The first label seen is
    group 1; the statistic is ``mean(group 1) - mean(group 2)``.
    """

    values: np.ndarray
    feature_ids: Sequence[str] | None = None
    groups: Sequence | None = None
    _split: tuple = field(init=False, repr=False, default=())

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1:
            raise DomainError("values must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(values)):
            raise DomainError("values contain non-finite entries")
        object.__setattr__(self, "values", values)
        m, ncol = values.shape
        if self.feature_ids is not None and len(self.feature_ids) != m:
            raise DomainError(f"{len(self.feature_ids)} feature ids for {m} rows")
        if self.groups is None:
            if ncol < 2:
                raise DomainError("one-sample design needs at least 2 samples")
            return
        groups = list(self.groups)
        if len(groups) != ncol:
            raise DomainError(f"{len(groups)} group labels for {ncol} columns")
        levels = list(dict.fromkeys(groups))
        if len(levels) != 2:
            raise DomainError(f"expected exactly 2 group labels, found {len(levels)}")
        mask = np.array([g == levels[0] for g in groups])
        if mask.sum() < 2 or (~mask).sum() < 2:
            raise DomainError("each group needs at least 2 samples")
        object.__setattr__(self, "_split", (mask, tuple(levels)))

    @classmethod
    def from_groups(cls, x, y, feature_ids=None) -> "Dataset":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        labels = [1] * x.shape[1] + [2] * y.shape[1]
        return cls(np.hstack([x, y]), feature_ids, labels)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def design(self):
        if self.groups is None:
            return OneSample(self.values.shape[1])
        mask = self._split[0]
        return TwoSample(int(mask.sum()), int((~mask).sum()))

    @property
    def group_levels(self):
        return self._split[1] if self._split else None

    def ids(self) -> list[str]:
        if self.feature_ids is None:
            return [f"f{i}" for i in range(self.m)]
        return list(self.feature_ids)

    def group_matrices(self):
        mask = self._split[0]
        return self.values[:, mask], self.values[:, ~mask]


@dataclass(frozen=True, eq=False)
class TStatVector:
    stats: np.ndarray
    design: OneSample | TwoSample
    flagged: np.ndarray
    welch_df: np.ndarray | None = None
    abs_sorted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        stats = np.asarray(self.stats, dtype=np.float64)
        flagged = np.asarray(self.flagged, dtype=bool)
        if stats.shape != flagged.shape or stats.ndim != 1:
            raise DomainError("stats and flagged must be 1-d arrays of equal length")
        object.__setattr__(self, "stats", stats)
        object.__setattr__(self, "flagged", flagged)
        object.__setattr__(self, "abs_sorted", np.sort(np.abs(stats[~flagged])))
        for arr in (stats, flagged, self.abs_sorted):
            arr.flags.writeable = False

    @classmethod
    def from_stats(cls, stats, design=None) -> "TStatVector":
        """Wrap precomputed statistics; non-finite entries are flagged."""
        stats = np.array(stats, dtype=np.float64)
        flagged = ~np.isfinite(stats)
        stats[flagged] = np.nan
        return cls(stats, design or OneSample(0), flagged)

    @property
    def m(self) -> int:
        """Number of valid (unflagged) features."""
        return self.abs_sorted.size

    @property
    def candidates(self) -> np.ndarray:
        """Sorted unique ``|T_i|`` values: the candidate thresholds."""
        return np.unique(self.abs_sorted)

    def exceed_counts(self, t) -> np.ndarray:
        """``#{i : |T_i| >= t}`` for each threshold in ``t``."""
        return self.m - np.searchsorted(self.abs_sorted, t, side="left")


def _report_flags(flagged: np.ndarray) -> None:
    nflag = int(flagged.sum())
    if nflag:
        logger.warning("%d feature(s) have zero variance; statistic undefined, excluded", nflag)


def one_sample_t(data: Dataset) -> TStatVector:
    if data.groups is not None:
        raise DomainError("one_sample_t needs a one-sample design")
    stats, flagged = kernels.one_sample_t(data.values)
    _report_flags(flagged)
    return TStatVector(stats, data.design, flagged)


def two_sample_t(data: Dataset) -> TStatVector:
    if data.groups is None:
        raise DomainError("two_sample_t needs a two-sample design")
    x, y = data.group_matrices()
    stats, dof, flagged = kernels.two_sample_t(np.ascontiguousarray(x), np.ascontiguousarray(y))
    _report_flags(flagged)
    return TStatVector(stats, data.design, flagged, welch_df=dof)


def t_statistics(data: Dataset) -> TStatVector:
    """Dispatch on the design of ``data``."""
    return one_sample_t(data) if data.groups is None else two_sample_t(data)


def empirical_tail(tv: TStatVector, t):
    """Proportion of valid features with ``|T_i| >= t``; vectorised over ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("threshold must be nonnegative")
    if tv.m == 0:
        raise DomainError("no valid features")
    out = tv.exceed_counts(t_arr) / tv.m
    return float(out) if out.ndim == 0 else out

"""Simultaneous critical values for one- and two-sample t-tests in very high dimensions."""
from ._backend import NAME as backend
from ._errors import DomainError
from .baselines import PValueVector, QValueResult, bh_procedure, p_values, q_values, storey_pi0
from .critical import (
    ControlSpec,
    CriticalValue,
    DecisionSet,
    OracleModel,
    critical_fdr,
    critical_fdtp,
    critical_kfwer,
    data_driven_critical,
    nu_m,
    oracle_critical,
    reject,
    tau_sq_dependent,
    tau_sq_independent,
)
from .numerics import expected_gc, normal_tail, normal_upper_quantile, poisson_tail, student_t_tail
from .pi1 import GridSpec, Pi1Estimate, estimate_pi1, g_hat
from .tstats import Dataset, OneSample, TStatVector, TwoSample, empirical_tail, one_sample_t, t_statistics, two_sample_t

__version__ = "0.1.0"

__all__ = [
    "backend",
    "DomainError",
    "Dataset",
    "OneSample",
    "TwoSample",
    "TStatVector",
    "one_sample_t",
    "two_sample_t",
    "t_statistics",
    "empirical_tail",
    "GridSpec",
    "Pi1Estimate",
    "g_hat",
    "estimate_pi1",
    "ControlSpec",
    "CriticalValue",
    "DecisionSet",
    "OracleModel",
    "nu_m",
    "tau_sq_dependent",
    "tau_sq_independent",
    "critical_fdtp",
    "critical_fdr",
    "critical_kfwer",
    "oracle_critical",
    "data_driven_critical",
    "reject",
    "PValueVector",
    "QValueResult",
    "p_values",
    "bh_procedure",
    "storey_pi0",
    "q_values",
    "normal_tail",
    "normal_upper_quantile",
    "poisson_tail",
    "student_t_tail",
    "expected_gc",
]

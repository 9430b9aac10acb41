import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from simcrit import DomainError
from simcrit.baselines import (
    DEFAULT_LAMBDA_GRID,
    PValueVector,
    _df3_smoother,
    bh_procedure,
    p_values,
    q_values,
    storey_pi0,
    storey_procedure,
)
from simcrit.numerics import normal_tail, student_t_tail
from simcrit.tstats import Dataset, TStatVector, t_statistics

p_lists = st.lists(st.floats(0, 1), min_size=1, max_size=100)


@settings(max_examples=200)
@given(p_lists, st.floats(0.001, 0.999))
def test_bh_matches_brute_force(p, gamma):
    assume(not oracles.bh_near_tie(p, gamma))
    got = bh_procedure(PValueVector(np.array(p), "t"), gamma).rejected
    assert np.array_equal(got, oracles.bh_brute_force(p, gamma))


@settings(max_examples=200)
@given(p_lists, st.floats(0.001, 0.999))
def test_q_values_at_unit_pi0_reproduce_bh(p, gamma):
    pv = PValueVector(np.array(p), "t")
    q = q_values(pv, 1.0).q
    assert np.array_equal(q <= gamma, bh_procedure(pv, gamma).rejected)


@given(p_lists, st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_bh_nested_in_gamma(p, g1, g2):
    pv = PValueVector(np.array(p), "t")
    small = bh_procedure(pv, min(g1, g2)).rejected
    large = bh_procedure(pv, max(g1, g2)).rejected
    assert not (small & ~large).any()


@given(p_lists, st.floats(0.01, 1.0))
def test_q_values_monotone_in_p(p, pi0):
    pv = PValueVector(np.array(p), "t")
    q = q_values(pv, pi0).q
    order = np.argsort(pv.p, kind="stable")
    assert (np.diff(q[order]) >= 0).all()
    assert (q <= 1).all()
    assert (q >= pi0 * pv.p - 1e-15).all()


def test_pvalue_vector_validation():
    with pytest.raises(DomainError):
        PValueVector(np.array([0.5, 1.5]), "t")
    with pytest.raises(DomainError):
        PValueVector(np.array([np.nan]), "t")
    with pytest.raises(DomainError):
        bh_procedure(PValueVector(np.array([0.5]), "t"), 1.0)
    with pytest.raises(DomainError):
        q_values(PValueVector(np.array([0.5]), "t"), 0.0)


def test_p_values_one_sample(rng):
    x = rng.normal(size=(6, 11))
    x[3] = 2.0
    tv = t_statistics(Dataset(x))
    pv = p_values(tv, "t")
    for i in (0, 1, 2, 4, 5):
        assert pv.p[i] == pytest.approx(2 * student_t_tail(abs(tv.stats[i]), 10), rel=1e-12)
    assert pv.p[3] == 1.0
    pn = p_values(tv, "normal")
    assert pn.p[0] == pytest.approx(2 * normal_tail(abs(tv.stats[0])), rel=1e-14)
    with pytest.raises(DomainError):
        p_values(tv, "permutation")


def test_p_values_two_sample_use_welch_df(rng):
    data = Dataset.from_groups(rng.normal(size=(4, 5)), rng.normal(0, 3, size=(4, 9)))
    tv = t_statistics(data)
    pv = p_values(tv)
    for i in range(4):
        assert pv.p[i] == pytest.approx(2 * student_t_tail(abs(tv.stats[i]), tv.welch_df[i]), rel=1e-12)


def test_frozen_t_pvalue():
    tv = TStatVector.from_stats([2.0])
    tv = TStatVector(tv.stats, t_statistics(Dataset(np.arange(22.0).reshape(2, 11))).design, tv.flagged)
    assert p_values(tv).p[0] == pytest.approx(oracles.STUDENT_T_PVALUE_2_DF10, rel=1e-12)


def test_smoother_reproduces_linear_trends():
    w = _df3_smoother(DEFAULT_LAMBDA_GRID)
    lam = np.array(DEFAULT_LAMBDA_GRID)
    assert w.sum() == pytest.approx(1.0, abs=1e-9)
    assert w @ (0.7 + 0.2 * lam) == pytest.approx(0.9, abs=1e-8)


def test_storey_pi0_uniform_and_mixture(rng):
    p = PValueVector(rng.random(20000), "t")
    assert storey_pi0(p).pi0_hat == pytest.approx(1.0, abs=0.05)
    mixed = np.concatenate([rng.random(16000), rng.random(4000) * 1e-4])
    est = storey_pi0(PValueVector(mixed, "t"))
    assert est.pi0_hat == pytest.approx(0.8, abs=0.05)
    assert len(est.lambda_grid) == 20
    assert est.lambda_grid[0] == (0.0, 1.0)


def test_storey_pi0_bounds_and_grid_checks():
    all_small = PValueVector(np.full(50, 1e-6), "t")
    assert storey_pi0(all_small).pi0_hat == pytest.approx(1 / 50)
    ones = PValueVector(np.ones(50), "t")
    assert storey_pi0(ones).pi0_hat == 1.0
    for grid in ((0.1, 0.2, 0.3), (0.0, 0.5, 0.4, 0.9), (0.0, 0.3, 0.6, 0.99)):
        with pytest.raises(DomainError):
            storey_pi0(ones, grid)


def test_storey_procedure_between_bh_and_oracle(rng):
    mixed = np.concatenate([rng.random(8000), rng.beta(0.1, 8, 2000)])
    pv = PValueVector(mixed, "t")
    dec, res = storey_procedure(pv, 0.1)
    bh = bh_procedure(pv, 0.1).rejected
    assert not (bh & ~dec.rejected).any()
    assert dec.R >= bh.sum()
    assert 0 < res.pi0_hat <= 1

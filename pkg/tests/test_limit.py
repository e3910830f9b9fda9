import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tailequiv.auxfun import make_clamp
from tailequiv.copulas import FGM, Independence, PairedSample, independent_pair, make_rng, sample_with_rng
from tailequiv.errors import DataError, DegenerateError, ParameterError
from tailequiv.experiments import coverage_study
from tailequiv.limit import (LimitEstimator, blocks, case2_se, column_ranks, draisma_variance, hill,
                             limit_test, rank_maxima, split_sample, tail_order_estimate, xi_limit_hat)
from tailequiv.theory import XiConfig, fgm_tail_expansion, hill_k_schedule, threshold_schedule

N = 40_000


def _fgm_blocks(d1, d2, n, seed):
    p = independent_pair(FGM(d1), FGM(d2), n, seed)
    return p.u1, p.u2


# ---------------------------------------------------------------- ranks


def test_rank_maxima_example():
    assert rank_maxima([[0.1, 0.9], [0.5, 0.3], [0.9, 0.8]]).tolist() == [3, 2, 3]


def test_rank_maxima_single_column_is_rank():
    x = np.array([0.3, 0.1, 0.7, 0.5])
    assert rank_maxima(x).tolist() == [2, 1, 4, 3]


def test_ties_broken_by_first_occurrence():
    assert column_ranks([0.5, 0.5, 0.2]).ravel().tolist() == [2, 3, 1]


def test_rank_maxima_needs_two_rows():
    with pytest.raises(DataError):
        rank_maxima([[0.5, 0.5]])


@given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)), min_size=2, max_size=30))
def test_rank_maxima_invariant_under_monotone_margins(rows):
    # integer data with exact strictly increasing maps, so ties are preserved
    x = np.array(rows, dtype=float)
    y = np.column_stack([2.0 ** (x[:, 0] / 8), x[:, 1] ** 3 + 5 * x[:, 1]])
    assert np.array_equal(rank_maxima(x), rank_maxima(y))


# ---------------------------------------------------------------- Hill


def test_hill_hand_values():
    # 1 / mean(log 3, log 1.5)
    assert hill([1, 2, 3, 4, 5], 2).kappa_hat == pytest.approx(1.329718805885022, abs=1e-12)
    # 1 / log 2
    assert hill([1, 2, 7], 1).kappa_hat == pytest.approx(1.442695040888963, abs=1e-12)


def test_hill_degenerate_and_bad_k():
    with pytest.raises(DegenerateError):
        hill([3, 3, 3, 4], 2)
    with pytest.raises(ParameterError):
        hill([1, 2, 3], 3)
    with pytest.raises(ParameterError):
        hill([1, 2, 3], 0)


@given(st.lists(st.floats(0.01, 100), min_size=5, max_size=40, unique=True), st.floats(1e-3, 1e3))
def test_hill_scale_invariant(m, c):
    k = len(m) // 2
    try:
        a = hill(m, k).kappa_hat
    except DegenerateError:
        return
    assert hill(np.asarray(m) * c, k).kappa_hat == pytest.approx(a, rel=1e-12)


def test_hill_recovers_fgm_tail_order():
    x = sample_with_rng(FGM(0.5), 20_000, make_rng(11))
    est = tail_order_estimate(x, 100)
    assert est.kappa_hat == pytest.approx(2.0, abs=0.3)
    assert est.sigma2_hat > 0


def test_draisma_column_swap_symmetric():
    r = column_ranks(sample_with_rng(FGM(0.4), 2000, make_rng(2)))
    a = draisma_variance(r, 50, 2.0)
    assert draisma_variance(r[:, ::-1], 50, 2.0) == pytest.approx(a, rel=1e-12)


def test_draisma_forms_differ_by_one_kappa_factor():
    r = column_ranks(sample_with_rng(FGM(0.4), 2000, make_rng(2)))
    sq = draisma_variance(r, 50, 1.8, "squared")
    pr = draisma_variance(r, 50, 1.8, "printed")
    assert sq == pytest.approx(1.8 * pr, rel=1e-12)
    with pytest.raises(ParameterError):
        draisma_variance(r, 50, 1.8, "other")


# ---------------------------------------------------------------- splitting


def _paired(n):
    u = (np.arange(1, 2 * n + 1, dtype=float) / (2 * n + 1)).reshape(n, 2)
    return PairedSample(u, u[::-1].copy())


def test_split_halves_and_interleave():
    p = _paired(6)
    a, b = split_sample(p, "halves")
    assert np.array_equal(a.u1, p.u1[:3]) and np.array_equal(b.u1, p.u1[3:])
    a, b = split_sample(p, "interleave")
    assert np.array_equal(a.u1, p.u1[0::2]) and np.array_equal(b.u1, p.u1[1::2])


@given(st.integers(4, 60), st.sampled_from(["halves", "interleave"]))
def test_split_is_a_partition(n, strategy):
    p = _paired(n)
    a, b = split_sample(p, strategy)
    rows = np.vstack([a.u1, b.u1])
    assert rows.shape[0] == n
    assert len({tuple(r) for r in rows}) == n


def test_split_errors():
    with pytest.raises(DataError):
        split_sample(_paired(3))
    with pytest.raises(ParameterError):
        split_sample(_paired(6), "random")


def test_blocks_none_keeps_all_rows():
    p = _paired(8)
    x1, x2 = blocks(p, "none")
    assert x1.shape[0] == x2.shape[0] == 8
    x1, x2 = blocks(p, "halves")
    assert np.array_equal(x1, p.u1[:4]) and np.array_equal(x2, p.u2[4:])


# ---------------------------------------------------------------- estimator


def test_w_zero_ignores_v():
    x1, x2 = _fgm_blocks(0.0, 1.0, 4000, 5)
    cfg = XiConfig(w=0.0)
    a = xi_limit_hat(x1, x2, 100, 0.05, cfg)
    b = xi_limit_hat(x1, x2, 100, 0.3, cfg)
    assert a.xi_hat == b.xi_hat == pytest.approx(cfg.h1(a.kappa1_hat - a.kappa2_hat))


def test_block_swap_negates_exactly():
    x1, x2 = _fgm_blocks(0.0, 1.0, 4000, 6)
    for v in (0.02, 0.05, 0.2):
        a = xi_limit_hat(x1, x2, 120, v)
        b = xi_limit_hat(x2, x1, 120, v)
        assert b.xi_hat == -a.xi_hat
        assert b.se == a.se


def test_estimator_caches_match_direct_path():
    x1, x2 = _fgm_blocks(0.2, 0.6, 3000, 7)
    est = LimitEstimator(x1, x2)
    for k in (50, 100):
        for v in (0.05, 0.1):
            a = est.estimate(k, v)
            b = xi_limit_hat(x1, x2, k, v)
            assert a.as_row() == b.as_row()


def test_case_one_se_formula():
    x1, x2 = _fgm_blocks(0.0, 0.0, 5000, 8)
    cfg = XiConfig(h1=make_clamp(1.0))
    e = xi_limit_hat(x1, x2, 100, 0.1, cfg)
    slope = cfg.h1.derivative(e.kappa1_hat - e.kappa2_hat)
    assert e.se == pytest.approx(0.5 * abs(slope) * math.sqrt((e.sigma2_1 + e.sigma2_2) / 100), rel=1e-12)


def test_low_count_flag():
    x1, x2 = _fgm_blocks(0.0, 0.0, 500, 9)
    assert xi_limit_hat(x1, x2, 20, 1e-4).low_count
    assert not xi_limit_hat(x1, x2, 20, 0.3).low_count


def test_bad_threshold():
    x1, x2 = _fgm_blocks(0.0, 0.0, 100, 9)
    with pytest.raises(ParameterError):
        xi_limit_hat(x1, x2, 10, 1.0)


def test_null_center_gives_unit_p_value():
    x1, x2 = _fgm_blocks(0.0, 0.0, 500, 10)
    e = xi_limit_hat(x1, x2, 20, 0.2)
    res = limit_test(replace(e, xi_hat=0.0))
    assert res.p_two == 1.0


def test_case2_se_formula():
    x1, x2 = _fgm_blocks(0.0, 1.0, 4000, 12)
    e = xi_limit_hat(x1, x2, 100, 0.1)
    kappa = 0.5 * (e.kappa1_hat + e.kappa2_hat)
    vk = 0.1 ** kappa
    lam1 = (1 + e.count1) / e.n1 / vk
    lam2 = (1 + e.count2) / e.n2 / vk
    expected = 0.5 * math.sqrt(2.0 * e.h2_slope ** 2 * (1 / lam1 + 1 / lam2) / (2.0 * 4000 * vk))
    assert case2_se(e, tau=2.0) == pytest.approx(expected, rel=1e-12)
    assert limit_test(e, regime="case-II", tau=2.0).se == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ParameterError):
        limit_test(e, regime="case-III")
    with pytest.raises(ParameterError):
        case2_se(e, tau=0)


def test_h2_saturates_when_orders_differ():
    n = 100_000
    p = independent_pair(FGM(0.5), Independence(3), n, 0)
    cfg = XiConfig()
    k = hill_k_schedule(1, 2, 0.01, n)
    est = xi_limit_hat(p.u1, p.u2, k, 0.05, cfg)
    assert est.kappa2_hat - est.kappa1_hat > 0.5
    assert abs(cfg.h2(est.alpha_vn) - (-1.0)) < 1e-6


# ---------------------------------------------------------------- replication studies


@pytest.mark.slow
def test_identical_models_center_on_zero():
    r = coverage_study(FGM(0.3), FGM(0.3), N, reps=200, mode="limit", k=1000, v=0.025, seed=0)
    assert abs(np.median(r.estimates)) <= 0.05


@pytest.mark.slow
def test_case_one_size_and_coverage_under_schedule():
    # m_n / k must grow for the Case I variance to dominate, hence schedule-driven (k, v)
    e = fgm_tail_expansion(0.3)
    k = hill_k_schedule(1, 2, 0.01, N)
    v = threshold_schedule(e, e, N, 0.1).v_n
    r = coverage_study(FGM(0.3), FGM(0.3), N, reps=300, mode="limit", k=k, v=v, seed=1)
    assert 0.02 <= r.rejection <= 0.09
    assert 0.90 <= r.coverage <= 0.99


@pytest.mark.slow
def test_case_two_power_for_parameter_gap():
    r = coverage_study(FGM(0.0), FGM(1.0), N, reps=300, mode="limit", k=1000, v=0.025, seed=1,
                       regime="case-II")
    assert r.rejection >= 0.8


@pytest.mark.slow
def test_consistency_with_schedules():
    e1, e2 = fgm_tail_expansion(0.0), fgm_tail_expansion(1.0)
    errs = []
    for n in (1_000, 10_000, 100_000):
        k = hill_k_schedule(1, 2, 0.01, n)
        v = threshold_schedule(e1, e2, n, 0.1).v_n
        r = coverage_study(FGM(0.0), FGM(1.0), n, reps=100, mode="limit", k=k, v=v, seed=3)
        errs.append(np.median(np.abs(r.estimates - r.truth)))
    assert errs[0] > errs[1] > errs[2]

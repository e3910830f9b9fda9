"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Seeds are fixed up front: the criterion number, except the reference-interval
runs which use the driver default seed 1.
"""
import itertools
import math
import time

import numpy as np
import pytest
import sympy
from scipy import stats

from tailequiv.copulas import FGM, make_rng, sample_with_rng
from tailequiv.errors import ParameterError
from tailequiv.experiments import ExperimentSpec, coverage_study, moment_check, run_simulation_case
from tailequiv.garch import fit_garch11, garch_simulate, standardized_residuals
from tailequiv.limit import tail_order_estimate
from tailequiv.theory import (TailQuantities, XiConfig, classify, epsilon_interval, expected_relation,
                              fgm_tail_expansion, hill_k_schedule, schedule_exponents, threshold_schedule,
                              xi_limit)


def _line(report, number, ok, detail):
    report(f"ACCEPTANCE #{number} {'PASS' if ok else 'FAIL'} {detail}")
    return ok


# ---------------------------------------------------------------- 1


def _theory_grid():
    kappas = (1.0, 1.25, 1.5, 1.75, 2.0)
    lams = (0.25, 0.5, 1.0, 2.0, 4.0)
    weights = (0.0, 0.25, 0.5, 0.75, 1.0)
    return list(itertools.product(kappas, kappas, lams, lams, weights))


def _theory_violations(grid):
    bad = []
    cfgs = {w: XiConfig(w=w) for w in {t[4] for t in grid}}
    vals = {t: xi_limit(TailQuantities(t[0], t[2]), TailQuantities(t[1], t[3]), cfgs[t[4]]) for t in grid}
    for (k1, k2, l1, l2, w), xi in vals.items():
        t1, t2 = TailQuantities(k1, l1), TailQuantities(k2, l2)
        # (a) range buckets; at w = 1 the order and parameter buckets share the endpoints
        if 0 < w < 1 and classify(xi, w) is not expected_relation(t1, t2, w):
            bad.append(("a", k1, k2, l1, l2, w))
        # (b) antisymmetry
        if vals[(k2, k1, l2, l1, w)] != -xi:
            bad.append(("b", k1, k2, l1, l2, w))
        # (c) zero iff tail-equivalent (orders only when w = 0)
        equivalent = k1 == k2 and (w == 0 or l1 == l2)
        if (xi == 0) != equivalent:
            bad.append(("c", k1, k2, l1, l2, w))
    # (d) strictly increasing in log(l2/l1) inside the linear region of h2, for equal orders
    for k, l1, w in itertools.product({t[0] for t in grid}, {t[2] for t in grid}, cfgs):
        if w == 0:
            continue
        inside = sorted(l2 for l2 in {t[3] for t in grid} if abs(math.log(l2 / l1)) < 1.5)
        seq = [vals[(k, k, l1, l2, w)] for l2 in inside]
        if any(b <= a for a, b in zip(seq, seq[1:])):
            bad.append(("d-param", k, l1, w))
    # (d) across strata, values outside [-w, w] order by kappa1 - kappa2
    for l1, l2, w in itertools.product({t[2] for t in grid}, {t[3] for t in grid}, cfgs):
        if w == 1:
            continue
        pts = sorted(((k1 - k2, vals[(k1, k2, l1, l2, w)]) for k1, k2 in
                      itertools.product({t[0] for t in grid}, repeat=2) if k1 != k2))
        if any(x1 < x2 and v1 > v2 for (x1, v1), (x2, v2) in itertools.combinations(pts, 2)):
            bad.append(("d-order", l1, l2, w))
        if any(abs(v) <= w for _, v in pts):
            bad.append(("d-range", l1, l2, w))
    return bad


def test_1_theory_oracle_suite(report):
    t0 = time.perf_counter()
    grid = _theory_grid()
    bad = _theory_violations(grid)
    elapsed = time.perf_counter() - t0
    ok = len(grid) >= 1000 and not bad and elapsed < 1.0
    _line(report, 1, ok, f"tuples={len(grid)} violations={len(bad)} runtime={elapsed:.3f}s")
    assert ok, bad[:10]


# ---------------------------------------------------------------- 2


def test_2_fgm_closed_form_reproduction(report):
    t0 = time.perf_counter()
    oracle = xi_limit(TailQuantities(2.0, 1.0), TailQuantities(2.0, 2.0), XiConfig(w=0.5))
    r = coverage_study(FGM(0.0), FGM(1.0), 40_000, reps=200, mode="limit", k=1000, v=0.025, seed=2)
    med = float(np.median(r.estimates))
    elapsed = time.perf_counter() - t0
    ok = abs(oracle - 0.23105) < 5e-6 and abs(med - oracle) <= 0.07 and elapsed < 300
    _line(report, 2, ok, f"oracle={oracle:.5f} median={med:.4f} runtime={elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 3


def test_3_reference_intervals(report):
    t0 = time.perf_counter()
    spec = ExperimentSpec.defaults("simulation")
    assert spec.seed == 1 and spec.n == 40_000
    ii = run_simulation_case("ii", spec).tables["sim_ii_limit_k"]["xi_hat"]
    iii = run_simulation_case("iii", spec).tables["sim_iii_limit_k"]["xi_hat"]
    p = run_simulation_case("i", spec).tables["sim_i_finite"]["p_two"]
    frac = float(np.mean(p > 0.05))
    elapsed = time.perf_counter() - t0
    ok_ii = bool(((ii > -1) & (ii < -0.5)).all())
    ok_iii = bool(((iii > 0) & (iii < 0.5)).all())
    ok = ok_ii and ok_iii and frac >= 0.8 and elapsed < 600
    _line(report, 3, ok, f"case ii range=[{ii.min():.3f}, {ii.max():.3f}] case iii range=[{iii.min():.3f}, "
                         f"{iii.max():.3f}] case i p>0.05 share={frac:.2f} runtime={elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 4


def test_4_variance_validity(report):
    n = 5000
    r = coverage_study(FGM(0.5), FGM(0.5), n, reps=1000, u=0.1, seed=4)
    emp = float(np.var(math.sqrt(n) * r.estimates, ddof=1))
    plug = float(np.mean(n * r.ses ** 2))
    rel = abs(emp / plug - 1)
    ad = stats.anderson((r.estimates - r.truth) / r.ses, "norm")
    crit = float(ad.critical_values[list(ad.significance_level).index(1.0)])
    ok = rel <= 0.15 and ad.statistic < crit
    _line(report, 4, ok, f"replication var={emp:.3f} plug-in={plug:.3f} rel err={rel:.3f} "
                         f"AD={ad.statistic:.3f} (1% crit {crit:.3f})")
    assert ok


# ---------------------------------------------------------------- 5


def test_5_moment_suite(report):
    frames = [moment_check(FGM(0.5), FGM(0.5), n=50, u=0.2, v=0.35, reps=2000, pairing=p, seed=5)
              for p in ("independent", "countermonotone")]
    zmax = max(float(df["z"].abs().max()) for df in frames)
    rows = sum(len(df) for df in frames)
    ok = zmax <= 4 and rows == 24
    _line(report, 5, ok, f"quantities={rows} max |z|={zmax:.2f}")
    assert ok


# ---------------------------------------------------------------- 6


def test_6_hill_and_variance(report):
    n = 100_000
    k = round(n ** 0.4)
    kappas, sig = [], []
    for rep in range(100):
        est = tail_order_estimate(sample_with_rng(FGM(0.5), n, make_rng(6, rep)), k)
        kappas.append(est.kappa_hat)
        sig.append(est.sigma2_hat)
    mk, ms = float(np.median(kappas)), float(np.median(sig))
    ok = 1.85 <= mk <= 2.15 and abs(ms / 4 - 1) <= 0.30
    _line(report, 6, ok, f"k={k} median kappa={mk:.3f} median sigma2={ms:.3f}")
    assert ok


# ---------------------------------------------------------------- 7


def test_7_size_and_coverage(report):
    n = 10_000
    fin = coverage_study(FGM(0.5), FGM(0.5), n, reps=300, u=0.1, seed=7)
    e = fgm_tail_expansion(0.5)
    k = hill_k_schedule(1, 2, 0.01, n)
    v = threshold_schedule(e, e, n, 0.1).v_n
    lim = coverage_study(FGM(0.5), FGM(0.5), n, reps=300, mode="limit", k=k, v=v, seed=7)
    checks = [0.03 <= r.rejection <= 0.08 and 0.90 <= r.coverage <= 0.99 for r in (fin, lim)]
    ok = all(checks)
    _line(report, 7, ok, f"finite size={fin.rejection:.3f} coverage={fin.coverage:.3f}; "
                         f"limit (k={k}, v={v:.4f}) size={lim.rejection:.3f} coverage={lim.coverage:.3f}")
    assert ok


# ---------------------------------------------------------------- 8


def test_8_threshold_schedule(report):
    eps = sympy.Symbol("epsilon", positive=True)
    e = fgm_tail_expansion(0.5)
    v_exp, m_exp = schedule_exponents(sympy.Integer(int(e.kappa)), sympy.Integer(int(e.nu)), eps)
    exact = sympy.simplify(m_exp - (sympy.Rational(3, 4) - 2 * eps)) == 0
    lo, hi = epsilon_interval(e, e)
    rejects = []
    for bad in (0.0, -0.1, 0.375, 0.5):
        with pytest.raises(ParameterError):
            threshold_schedule(e, e, 10_000, bad)
        rejects.append(bad)
    s = threshold_schedule(e, e, 10_000, 0.1)
    ok = exact and (lo, hi) == (0.0, 0.375) and s.m_n == pytest.approx(10_000 ** (0.75 - 0.2), rel=1e-12)
    _line(report, 8, ok, f"m exponent={sympy.simplify(m_exp)} interval=({lo}, {hi}) rejected={rejects}")
    assert ok


# ---------------------------------------------------------------- 9


def test_9_garch_recovery(report):
    truth = np.array([0.05, 0.10, 0.85])
    n = 5000
    errs, white = [], []
    for rep in range(50):
        s = garch_simulate(*truth, n=n, seed=9000 + rep)
        fit = fit_garch11(s, innovation="normal")
        errs.append(np.abs(np.array([fit.omega, fit.alpha, fit.beta]) - truth))
        z2 = standardized_residuals(fit) ** 2
        z2 = z2 - z2.mean()
        white.append(abs(np.sum(z2[1:] * z2[:-1]) / np.sum(z2 * z2)) <= 3 / math.sqrt(n))
    med = np.median(np.array(errs), axis=0)
    share = float(np.mean(white))
    ok = bool((med <= 0.05).all()) and share >= 0.95
    _line(report, 9, ok, f"median abs errors omega={med[0]:.4f} alpha={med[1]:.4f} beta={med[2]:.4f} "
                         f"whitened share={share:.2f}")
    assert ok

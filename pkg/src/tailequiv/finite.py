"""Finite-threshold estimation and testing of the tail-equivalence measure.

All empirical CDFs carry the +1/n modification, so log-ratios are finite
at every threshold.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .copulas import PairedSample
from .errors import DataError, ParameterError
from .theory import XiConfig


@dataclass(frozen=True)
class TestResult:
    """Outcome of an asymptotic Gaussian test of H0: xi = 0."""

    __test__ = False  # keep pytest from collecting this class

    estimate: float
    se: float
    statistic: float
    p_left: float
    p_right: float
    p_two: float
    ci_low: float
    ci_high: float
    level: float
    degenerate: bool = False
    alternative: str = "two"

    @property
    def p_value(self) -> float:
        return {"two": self.p_two, "left": self.p_left, "right": self.p_right}[self.alternative]

    def rejects(self, level: float | None = None) -> bool:
        level = self.level if level is None else level
        p = self.p_value
        return bool(p == p and p <= level)

    def covers(self, value: float) -> bool:
        return bool(self.ci_low <= value <= self.ci_high)

    def as_row(self) -> dict:
        return {
            "xi_hat": self.estimate, "se": self.se, "statistic": self.statistic,
            "ci_lo": self.ci_low, "ci_hi": self.ci_high, "p_left": self.p_left,
            "p_right": self.p_right, "p_two": self.p_two, "degenerate": self.degenerate,
        }


def gaussian_test(estimate: float, se: float, level: float = 0.05, alternative: str = "two") -> TestResult:
    """Wald test of H0: xi = 0 with confidence interval estimate +/- z se.

    With se == 0 the result is flagged degenerate; the statistic is 0 (and
    p_two = 1) only when the estimate sits exactly on the null value,
    otherwise statistic and p-values are NaN.
    """
    if not 0 < level < 1:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    if alternative not in ("two", "left", "right"):
        raise ParameterError(f"alternative must be two, left or right, got {alternative!r}")
    z = float(ndtri(1.0 - level / 2.0))
    if se > 0 and math.isfinite(se):
        t = estimate / se
        p_left = float(ndtr(t))
        p_right = float(ndtr(-t))
        return TestResult(estimate, se, t, p_left, p_right, 2.0 * min(p_left, p_right),
                          estimate - z * se, estimate + z * se, level, False, alternative)
    if estimate == 0:
        return TestResult(estimate, 0.0, 0.0, 0.5, 0.5, 1.0, estimate, estimate, level, True, alternative)
    nan = math.nan
    return TestResult(estimate, 0.0, nan, nan, nan, nan, estimate, estimate, level, True, alternative)


class EmpiricalTails:
    """Modified empirical CDFs of the row maxima of a paired sample.

    F_l(u) = (1 + #{M_l <= u}) / n and H(u, v) = (1 + #{M_1 <= u, M_2 <= v}) / n.
    """

    def __init__(self, m1, m2):
        m1 = np.asarray(m1, dtype=float).ravel()
        m2 = np.asarray(m2, dtype=float).ravel()
        if m1.size != m2.size:
            raise DataError("maxima sequences must have equal length")
        if m1.size < 1:
            raise DataError("need at least one observation")
        if not (np.all((m1 > 0) & (m1 < 1)) and np.all((m2 > 0) & (m2 < 1))):
            raise DataError("maxima must lie strictly inside (0, 1)")
        self.n = m1.size
        self.paired = (m1, m2)
        self.m1 = np.sort(m1)
        self.m2 = np.sort(m2)
        self._mboth = np.sort(np.maximum(m1, m2))
        for arr in (self.m1, self.m2, self._mboth):
            arr.setflags(write=False)

    def _count(self, sorted_vals, u):
        return np.searchsorted(sorted_vals, np.asarray(u, dtype=float), side="right")

    def F1(self, u):
        return (1.0 + self._count(self.m1, u)) / self.n

    def F2(self, u):
        return (1.0 + self._count(self.m2, u)) / self.n

    def H(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        a, b = self.paired
        u_b, v_b = np.broadcast_arrays(u, v)
        out = np.empty(u_b.shape)
        flat_u, flat_v = u_b.ravel(), v_b.ravel()
        for i, (x, y) in enumerate(zip(flat_u, flat_v)):
            out.flat[i] = (1.0 + np.count_nonzero((a <= x) & (b <= y))) / self.n
        return out if out.ndim else float(out)

    def H_diag(self, u):
        """H(u, u) in O(log n) per threshold."""
        return (1.0 + self._count(self._mboth, u)) / self.n

    def swapped(self) -> "EmpiricalTails":
        a, b = self.paired
        return EmpiricalTails(b, a)


def empirical_cdfs(sample: PairedSample) -> EmpiricalTails:
    return EmpiricalTails(sample.m1, sample.m2)


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if not np.all((u > 0) & (u < 1)):
        raise ParameterError("thresholds must lie strictly inside (0, 1)")
    return u


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _log_ratio(f1, f2):
    # difference of logs: swapping the samples negates the value exactly
    return np.log(f2) - np.log(f1)


def alpha_hat(tails: EmpiricalTails, u):
    u = _check_u(u)
    return _out(_log_ratio(tails.F1(u), tails.F2(u)))


def xi_hat(tails: EmpiricalTails, u, v=None, cfg: XiConfig | None = None):
    cfg = cfg or XiConfig()
    u = _check_u(u)
    v = u if v is None else _check_u(v)
    a_u = _log_ratio(tails.F1(u), tails.F2(u))
    a_v = a_u if v is u else _log_ratio(tails.F1(v), tails.F2(v))
    return _out((1.0 - cfg.w) * cfg.h1(a_u / np.log(1.0 / u)) + cfg.w * cfg.h2(a_v))


def a_weight(alpha, u, cfg: XiConfig):
    """Derivative of the single-threshold measure with respect to alpha(u)."""
    lu = np.log(1.0 / np.asarray(u, dtype=float))
    return (1.0 - cfg.w) / lu * cfg.h1.derivative(alpha / lu) + cfg.w * cfg.h2.derivative(alpha)


def _variance_parts(tails: EmpiricalTails, u, cfg: XiConfig):
    f1, f2 = tails.F1(u), tails.F2(u)
    alpha = _log_ratio(f1, f2)
    a = a_weight(alpha, u, cfg)
    # 1/F1 + 1/F2 - 2H/(F1 F2) over a common denominator: exactly 0 when F1 = F2 = H
    big_a = (f1 + f2 - 2.0 * tails.H_diag(u)) / (f1 * f2)
    clipped = big_a < 0
    big_a = np.where(clipped, 0.0, big_a)
    return alpha, a, big_a, clipped


def sigma2_hat(tails: EmpiricalTails, u, cfg: XiConfig | None = None):
    """Plug-in asymptotic variance of sqrt(n) (xi_hat(u) - xi(u))."""
    cfg = cfg or XiConfig()
    u = _check_u(u)
    _, a, big_a, _ = _variance_parts(tails, u, cfg)
    return _out(a * a * big_a)


def covariance_matrix(tails: EmpiricalTails, thresholds, cfg: XiConfig | None = None) -> np.ndarray:
    """Plug-in asymptotic covariance of sqrt(n) xi_hat over several thresholds."""
    cfg = cfg or XiConfig()
    u = np.atleast_1d(_check_u(thresholds))
    f1, f2 = tails.F1(u), tails.F2(u)
    alpha = _log_ratio(f1, f2)
    lu = np.log(1.0 / u)
    inside = (np.abs(cfg.h1(alpha / lu)) < 1) & (np.abs(cfg.h2(alpha)) < 1)
    if not np.all(inside):
        warnings.warn("some thresholds have alpha outside the linear region of h1/h2; "
                      "the Gaussian limit does not cover them", RuntimeWarning, stacklevel=2)
    a = a_weight(alpha, u, cfg)
    lo = np.minimum.outer(u, u)
    # cross[i, j] = H(u_i, u_j) / (F1(u_i) F2(u_j)); its transpose is the fourth term.
    # Adding the pair before subtracting keeps the matrix exactly symmetric.
    cross = tails.H(u[:, None], u[None, :]) / np.outer(f1, f2)
    big_a = tails.F1(lo) / np.outer(f1, f1) + tails.F2(lo) / np.outer(f2, f2) - (cross + cross.T)
    return np.outer(a, a) * big_a


def finite_test(tails: EmpiricalTails, u: float, cfg: XiConfig | None = None, level: float = 0.05,
                alternative: str = "two") -> TestResult:
    cfg = cfg or XiConfig()
    u = float(_check_u(u))
    est = xi_hat(tails, u, cfg=cfg)
    _, a, big_a, clipped = _variance_parts(tails, u, cfg)
    sigma = math.sqrt(float(a * a * big_a))
    res = gaussian_test(est, sigma / math.sqrt(tails.n), level, alternative)
    if clipped:
        res = TestResult(**{**res.__dict__, "degenerate": True})
    return res


def finite_sweep(tails: EmpiricalTails, u_grid, cfg: XiConfig | None = None, level: float = 0.05) -> list:
    """finite_test over a threshold grid, vectorized over the CDF evaluations."""
    cfg = cfg or XiConfig()
    u = np.atleast_1d(_check_u(u_grid))
    alpha, a, big_a, clipped = _variance_parts(tails, u, cfg)
    est = (1.0 - cfg.w) * cfg.h1(alpha / np.log(1.0 / u)) + cfg.w * cfg.h2(alpha)
    se = np.sqrt(a * a * big_a) / math.sqrt(tails.n)
    out = []
    for e, s, c in zip(np.atleast_1d(est), np.atleast_1d(se), np.atleast_1d(clipped)):
        r = gaussian_test(float(e), float(s), level)
        if c:
            r = TestResult(**{**r.__dict__, "degenerate": True})
        out.append(r)
    return out

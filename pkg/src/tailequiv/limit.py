"""Estimation and testing of the limit measure via Hill tail-order estimates.

The tail orders are the tail indices of 1 / M where M is the row maximum
of the column ranks, so a Hill estimator on the smallest rank maxima
estimates kappa. The tail-order-parameter part uses the modified empirical
CDFs at a single vanishing threshold v_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .copulas import PairedSample
from .errors import DataError, DegenerateError, NumericalError, ParameterError
from .finite import TestResult, gaussian_test
from .theory import XiConfig

VARIANCE_FORMS = ("squared", "printed")


@dataclass(frozen=True)
class HillEstimate:
    kappa_hat: float
    k: int
    sigma2_hat: float = math.nan
    order_stats: np.ndarray | None = None

    def __post_init__(self):
        if not (self.kappa_hat > 0 and math.isfinite(self.kappa_hat)):
            raise DegenerateError(f"Hill estimate is not finite and positive: {self.kappa_hat}")


@dataclass(frozen=True)
class LimitEstimate:
    xi_hat: float
    kappa1_hat: float
    kappa2_hat: float
    alpha_vn: float
    v_n: float
    m_tilde: int
    se: float
    sigma2_1: float
    sigma2_2: float
    n1: int
    n2: int
    count1: int
    count2: int
    w: float
    h1_slope: float
    h2_slope: float
    low_count: bool = False
    assumed_regime: str = "case-I"

    def as_row(self) -> dict:
        return {
            "k": self.m_tilde, "v": self.v_n, "xi_hat": self.xi_hat, "kappa1_hat": self.kappa1_hat,
            "kappa2_hat": self.kappa2_hat, "alpha_vn": self.alpha_vn, "se": self.se,
            "low_count": self.low_count,
        }


def column_ranks(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return rankdata(x, method="ordinal", axis=0).astype(np.int64)


def rank_maxima(x) -> np.ndarray:
    """Row maxima of the column ranks (1..n, ties broken by first occurrence)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise DataError("need at least two observations to rank")
    return column_ranks(x).max(axis=1)


def hill(maxima, k: int) -> HillEstimate:
    """Hill estimator of the tail order from the k + 1 smallest maxima."""
    m = np.sort(np.asarray(maxima, dtype=float))
    n = m.size
    if not (1 <= k and k + 1 <= n):
        raise ParameterError(f"need 1 <= k <= n - 1, got k={k}, n={n}")
    low = m[: k + 1]
    if low[0] <= 0:
        raise DegenerateError("order statistics must be strictly positive")
    s = np.mean(np.log(low[k] / low[:k]))
    if not s > 0:
        raise DegenerateError("the k smallest maxima all equal the (k+1)-th; Hill log-sum is zero")
    return HillEstimate(1.0 / s, int(k), math.nan, low)


def draisma_variance(u_ranks, k: int, kappa_hat: float, form: str = "squared") -> float:
    """Plug-in asymptotic variance of sqrt(k) (kappa_hat - kappa) for bivariate ranks.

    ``form="squared"`` multiplies by kappa_hat^2, matching the limit
    kappa^2 (1 - upsilon) {1 - 2 upsilon d1p d2p}; ``form="printed"`` uses the
    single kappa_hat factor.
    """
    if form not in VARIANCE_FORMS:
        raise ParameterError(f"form must be one of {VARIANCE_FORMS}")
    r = np.asarray(u_ranks, dtype=float)
    if r.ndim != 2 or r.shape[1] != 2:
        raise ParameterError("the variance estimator needs an n x 2 rank matrix")
    n = r.shape[0]
    if not 1 <= k <= n - 1:
        raise ParameterError(f"need 1 <= k <= n - 1, got k={k}, n={n}")
    m_k = np.sort(r.max(axis=1))[k]
    shrink = 1.0 + m_k ** -0.25
    m_1 = np.sort(np.maximum(r[:, 0] / shrink, r[:, 1]))[k]
    m_2 = np.sort(np.maximum(r[:, 0], r[:, 1] / shrink))[k]
    upsilon = k / m_k
    cross = 2.0 * k / math.sqrt(m_k) * (m_k / m_1 - 1.0) * (m_k / m_2 - 1.0)
    lead = kappa_hat * kappa_hat if form == "squared" else kappa_hat
    val = lead * (1.0 - upsilon) * (1.0 - cross)
    if not math.isfinite(val):
        raise NumericalError("non-finite variance estimate",
                             {"M_k+1": m_k, "M1": m_1, "M2": m_2, "k": k, "kappa_hat": kappa_hat})
    return max(val, 0.0)


def tail_order_estimate(x, k: int, form: str = "squared") -> HillEstimate:
    """Hill estimate from a sample matrix, with the variance plug-in when d = 2."""
    ranks = column_ranks(x)
    est = hill(ranks.max(axis=1), k)
    s2 = draisma_variance(ranks, k, est.kappa_hat, form) if ranks.shape[1] == 2 else math.nan
    return HillEstimate(est.kappa_hat, est.k, s2, est.order_stats)


def split_sample(sample: PairedSample, strategy: str = "halves") -> tuple[PairedSample, PairedSample]:
    """Disjoint row blocks; the first feeds C1 statistics, the second C2."""
    n = sample.n
    if n < 4:
        raise DataError(f"need at least 4 rows to split, got {n}")
    idx = np.arange(n)
    if strategy == "halves":
        a, b = idx[: n // 2], idx[n // 2:]
    elif strategy == "interleave":
        a, b = idx[0::2], idx[1::2]
    else:
        raise ParameterError(f"strategy must be halves or interleave, got {strategy!r}")
    return sample.rows(a), sample.rows(b)


def blocks(sample: PairedSample, split: str = "halves") -> tuple[np.ndarray, np.ndarray]:
    """The C1 and C2 matrices used by the limit estimator; ``split="none"`` keeps all rows."""
    if split == "none":
        return sample.u1, sample.u2
    first, second = split_sample(sample, split)
    return first.u1, second.u2


class LimitEstimator:
    """Caches ranks and Hill fits of two blocks for sweeps over (k, v_n, links)."""

    def __init__(self, x1, x2, form: str = "squared"):
        if form not in VARIANCE_FORMS:
            raise ParameterError(f"form must be one of {VARIANCE_FORMS}")
        self.x1 = np.asarray(x1, dtype=float)
        self.x2 = np.asarray(x2, dtype=float)
        for x in (self.x1, self.x2):
            if x.ndim != 2 or x.shape[0] < 2:
                raise DataError("samples must be n x d matrices with n >= 2")
        self.form = form
        self._ranks = [column_ranks(self.x1), column_ranks(self.x2)]
        self._sorted_max = [np.sort(self.x1.max(axis=1)), np.sort(self.x2.max(axis=1))]
        self._hill = {}

    def tail_order(self, block: int, k: int) -> HillEstimate:
        key = (block, k)
        if key not in self._hill:
            ranks = self._ranks[block]
            est = hill(ranks.max(axis=1), k)
            s2 = draisma_variance(ranks, k, est.kappa_hat, self.form) if ranks.shape[1] == 2 else math.nan
            self._hill[key] = HillEstimate(est.kappa_hat, est.k, s2, est.order_stats)
        return self._hill[key]

    def estimate(self, k: int, v_n: float, cfg: XiConfig | None = None) -> LimitEstimate:
        cfg = cfg or XiConfig()
        if not 0 < v_n < 1:
            raise ParameterError(f"v_n must lie in (0, 1), got {v_n}")
        e1, e2 = self.tail_order(0, k), self.tail_order(1, k)
        n1, n2 = self.x1.shape[0], self.x2.shape[0]
        c1 = int(np.searchsorted(self._sorted_max[0], v_n, side="right"))
        c2 = int(np.searchsorted(self._sorted_max[1], v_n, side="right"))
        alpha = math.log((1.0 + c2) / n2) - math.log((1.0 + c1) / n1)
        dk = e1.kappa_hat - e2.kappa_hat
        xi = (1.0 - cfg.w) * cfg.h1(dk) + cfg.w * cfg.h2(alpha)
        slope1 = float(cfg.h1.derivative(dk))
        se = (1.0 - cfg.w) * abs(slope1) * math.sqrt((e1.sigma2_hat + e2.sigma2_hat) / k)
        return LimitEstimate(
            xi_hat=float(xi), kappa1_hat=e1.kappa_hat, kappa2_hat=e2.kappa_hat, alpha_vn=alpha,
            v_n=float(v_n), m_tilde=int(k), se=float(se), sigma2_1=e1.sigma2_hat,
            sigma2_2=e2.sigma2_hat, n1=n1, n2=n2, count1=c1, count2=c2, w=cfg.w,
            h1_slope=slope1, h2_slope=float(cfg.h2.derivative(alpha)), low_count=min(c1, c2) < 2,
        )


def xi_limit_hat(x1, x2, k: int, v_n: float, cfg: XiConfig | None = None,
                 form: str = "squared") -> LimitEstimate:
    """Estimate of the limit measure with its Case I standard error.

    ``x1`` and ``x2`` must be independent blocks; ``low_count`` flags a
    threshold v_n with fewer than two maxima below it in either block.
    """
    return LimitEstimator(x1, x2, form).estimate(k, v_n, cfg)


def case2_se(est: LimitEstimate, tau: float = 1.0) -> float:
    """Standard error under Case II, valid only when the tail orders are equal.

    Uses lambda_l ~ F_l(v_n) / v_n^kappa with the pooled kappa estimate and
    m_n = tau n v_n^kappa.
    """
    if not tau > 0:
        raise ParameterError("tau must be positive")
    kappa = 0.5 * (est.kappa1_hat + est.kappa2_hat)
    vk = est.v_n ** kappa
    lam1 = (1.0 + est.count1) / est.n1 / vk
    lam2 = (1.0 + est.count2) / est.n2 / vk
    n = min(est.n1, est.n2)
    m_n = tau * n * vk
    sigma2 = tau * est.h2_slope ** 2 * (1.0 / lam1 + 1.0 / lam2)
    return est.w * math.sqrt(sigma2 / m_n)


def limit_test(est: LimitEstimate, level: float = 0.05, alternative: str = "two",
               regime: str = "case-I", tau: float = 1.0) -> TestResult:
    """Wald test of H0: xi = 0 for the limit measure."""
    if regime == "case-I":
        se = est.se
    elif regime == "case-II":
        se = case2_se(est, tau)
    else:
        raise ParameterError(f"regime must be case-I or case-II, got {regime!r}")
    return gaussian_test(est.xi_hat, se, level, alternative)

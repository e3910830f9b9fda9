"""Closed-form tail-equivalence measure, its classification and threshold schedules."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .auxfun import AuxFunction, make_clamp
from .errors import EmptyIntervalError, ExcludedPairError, ParameterError

INF = math.inf


@dataclass(frozen=True)
class TailQuantities:
    """Tail order ``kappa`` and tail order parameter ``lam`` of a diagonal C(u,...,u).

    ``lam`` may be ``0.0`` or ``math.inf``.
    """

    kappa: float
    lam: float

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ParameterError(f"tail order must be finite and positive, got {self.kappa}")
        if math.isnan(self.lam) or self.lam < 0:
            raise ParameterError(f"tail order parameter must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class TailExpansion:
    """Second-order diagonal expansion C(u,u) = lam u^kappa + theta u^nu + o(u^nu)."""

    lam: float
    kappa: float
    theta: float
    nu: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"lam must be positive, got {self.lam}")
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if not self.nu > self.kappa:
            raise ParameterError(f"need nu > kappa, got nu={self.nu}, kappa={self.kappa}")

    @property
    def quantities(self) -> TailQuantities:
        return TailQuantities(self.kappa, self.lam)

    def diagonal(self, u):
        """Two-term approximation of C(u,u)."""
        u = np.asarray(u, dtype=float)
        return self.lam * u**self.kappa + self.theta * u**self.nu


@dataclass(frozen=True)
class XiConfig:
    """Weight ``w``, links ``h1``/``h2`` and dimension ``d``.

    The defaults follow the simulation setup: w = 1/2, h1 a clamp at d - 1 and
    h2 a clamp at x* = 1.5.
    """

    w: float = 0.5
    h1: AuxFunction = None
    h2: AuxFunction = field(default_factory=lambda: make_clamp(1.5))
    d: int = 2

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ParameterError(f"w must lie in [0, 1], got {self.w}")
        if int(self.d) != self.d or self.d < 2:
            raise ParameterError(f"d must be an integer >= 2, got {self.d}")
        if self.h1 is None:
            object.__setattr__(self, "h1", make_clamp(self.d - 1))

    @classmethod
    def with_xstar(cls, xstar: float, w: float = 0.5, d: int = 2) -> "XiConfig":
        return cls(w=w, h1=make_clamp(d - 1), h2=make_clamp(xstar), d=d)


class TailRelation(enum.Enum):
    C2_STRONGER_ORDER = "C2-stronger-order"
    EQUAL_ORDER_C1_STRONGER_PARAM = "equal-order-C1-stronger-param"
    TAIL_EQUIVALENT = "tail-equivalent"
    EQUAL_ORDER_C2_STRONGER_PARAM = "equal-order-C2-stronger-param"
    C1_STRONGER_ORDER = "C1-stronger-order"


def _log_ratio(lam1: float, lam2: float) -> float:
    # one of the two may be 0 or inf; the (A.2) exclusions are checked by the caller
    if lam1 == lam2:
        return 0.0
    if lam1 == 0 or lam2 == INF:
        return INF
    if lam2 == 0 or lam1 == INF:
        return -INF
    # difference of logs keeps the ratio exactly antisymmetric in floating point
    return math.log(lam2) - math.log(lam1)


def xi_limit(tq1: TailQuantities, tq2: TailQuantities, cfg: XiConfig | None = None) -> float:
    """Limit of the tail-equivalence measure between two copulas.

    Equal orders contribute ``w * h2(log(lam2/lam1))``, unequal orders the
    saturated value ``w * sign(kappa1 - kappa2)``.
    """
    cfg = cfg or XiConfig()
    k1, k2 = tq1.kappa, tq2.kappa
    first = (1.0 - cfg.w) * cfg.h1(k1 - k2)
    if k1 == k2:
        l1, l2 = tq1.lam, tq2.lam
        if (l1, l2) == (0.0, 0.0) or (l1 == INF and l2 == INF):
            raise ExcludedPairError(
                f"equal tail orders with (lambda1, lambda2) = ({l1}, {l2}) are excluded"
            )
        lr = _log_ratio(l1, l2)
        second = math.copysign(1.0, lr) if math.isinf(lr) else cfg.h2(lr)
        return first + cfg.w * second
    return first + cfg.w * (1.0 if k1 > k2 else -1.0)


def xi_threshold(c1_u, c2_u, u, c1_v=None, c2_v=None, v=None, cfg: XiConfig | None = None):
    """Measure at finite thresholds from diagonal values C_l(u,...,u) and C_l(v,...,v).

    With ``v`` omitted the single-threshold version u = v is returned.
    """
    cfg = cfg or XiConfig()
    u = np.asarray(u, dtype=float)
    if v is None:
        c1_v, c2_v = c1_u, c2_u
    alpha_u = np.log(np.asarray(c2_u, float)) - np.log(np.asarray(c1_u, float))
    alpha_v = np.log(np.asarray(c2_v, float)) - np.log(np.asarray(c1_v, float))
    out = (1.0 - cfg.w) * cfg.h1(alpha_u / np.log(1.0 / u)) + cfg.w * cfg.h2(alpha_v)
    return float(out) if np.ndim(out) == 0 else out


def classify(xi: float, w: float) -> TailRelation:
    """Bucket a measure value into the five tail relations.

    With w = 1 the value -1 (or 1) is reached both by an order difference and
    by a saturated h2, so the reading at |xi| == 1 is ambiguous there.
    """
    if not -1.0 <= xi <= 1.0:
        raise ParameterError(f"xi must lie in [-1, 1], got {xi}")
    if not 0.0 <= w <= 1.0:
        raise ParameterError(f"w must lie in [0, 1], got {w}")
    if xi == 0:
        return TailRelation.TAIL_EQUIVALENT
    if xi < -w:
        return TailRelation.C2_STRONGER_ORDER
    if xi < 0:
        return TailRelation.EQUAL_ORDER_C1_STRONGER_PARAM
    if xi <= w:
        return TailRelation.EQUAL_ORDER_C2_STRONGER_PARAM
    return TailRelation.C1_STRONGER_ORDER


def expected_relation(tq1: TailQuantities, tq2: TailQuantities, w: float) -> TailRelation:
    """Relation read directly from (kappa, lambda); w = 0 ignores the parameters."""
    if tq1.kappa < tq2.kappa:
        return TailRelation.C2_STRONGER_ORDER
    if tq1.kappa > tq2.kappa:
        return TailRelation.C1_STRONGER_ORDER
    if w == 0 or tq1.lam == tq2.lam:
        return TailRelation.TAIL_EQUIVALENT
    if tq1.lam > tq2.lam:
        return TailRelation.EQUAL_ORDER_C1_STRONGER_PARAM
    return TailRelation.EQUAL_ORDER_C2_STRONGER_PARAM


def fgm_diagonal(u, delta: float):
    """Exact diagonal of the FGM copula, (1+d)u^2 - 2d u^3 + d u^4."""
    u = np.asarray(u, dtype=float)
    out = u * u * (1.0 + delta * (1.0 - u) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def fgm_tail_expansion(delta: float) -> TailExpansion:
    if not -1.0 <= delta <= 1.0:
        raise ParameterError(f"FGM parameter must lie in [-1, 1], got {delta}")
    if delta == -1.0:
        raise ParameterError("FGM with delta = -1 has zero tail order parameter")
    return TailExpansion(lam=1.0 + delta, kappa=2.0, theta=-2.0 * delta, nu=3.0)


@dataclass(frozen=True)
class ThresholdSchedule:
    """v_n = n^v_exponent and m_n = n^m_exponent, with m_n / (n v_n^kappa2) = tau."""

    v_n: float
    m_n: float
    epsilon: float
    tau: float
    v_exponent: float
    m_exponent: float


def schedule_exponents(kappa2, nu2, epsilon):
    """Exponents of n in (v_n, m_n); generic arithmetic, so Fractions or sympy work."""
    v_exp = -1 / (kappa2 + 2 * nu2) - epsilon
    m_exp = 1 - kappa2 * (epsilon + 1 / (kappa2 + 2 * nu2))
    return v_exp, m_exp


def epsilon_interval(e1: TailExpansion, e2: TailExpansion) -> tuple[float, float]:
    """Open interval of admissible epsilon for the second expansion having the larger order.

    Raises EmptyIntervalError when the standing assumption nu1 >= nu2 or
    nu2 < kappa2 + 3 nu1 fails.
    """
    k2, n1, n2 = e2.kappa, e1.nu, e2.nu
    if not (n1 >= n2 or n2 < k2 + 3 * n1):
        raise EmptyIntervalError(
            f"no admissible epsilon: need nu1 >= nu2 or nu2 < kappa2 + 3 nu1 "
            f"(nu1={n1}, nu2={n2}, kappa2={k2})"
        )
    lo = max(0.0, 1.0 / (k2 + 2 * n1) - 1.0 / (k2 + 2 * n2))
    hi = 2.0 * n2 / (k2 * (k2 + 2 * n2))
    if not lo < hi:
        raise EmptyIntervalError(f"empty epsilon interval ({lo}, {hi})")
    return lo, hi


def threshold_schedule(e1: TailExpansion, e2: TailExpansion, n: int, epsilon: float) -> ThresholdSchedule:
    if e2.kappa < e1.kappa:
        raise ParameterError("pass the expansion with the larger tail order second")
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    lo, hi = epsilon_interval(e1, e2)
    if not lo < epsilon < hi:
        raise ParameterError(f"epsilon={epsilon} outside the admissible interval ({lo}, {hi})")
    v_exp, m_exp = schedule_exponents(e2.kappa, e2.nu, epsilon)
    return ThresholdSchedule(
        v_n=float(n) ** v_exp, m_n=float(n) ** m_exp, epsilon=epsilon, tau=1.0,
        v_exponent=v_exp, m_exponent=m_exp,
    )


def hill_k_schedule(tau_tilde: float, kappa: float, epsilon_l: float, n: int) -> int:
    """Number of order statistics k = floor(n^(2t/(2t+kappa) - eps)), clipped to [1, n-1]."""
    if tau_tilde < 0 or not kappa > 0:
        raise ParameterError("need tau_tilde >= 0 and kappa > 0")
    bound = 2.0 * tau_tilde / (2.0 * tau_tilde + kappa)
    if not 0.0 < epsilon_l < bound:
        raise ParameterError(f"epsilon_l={epsilon_l} outside (0, {bound})")
    k = math.floor(float(n) ** (bound - epsilon_l))
    return int(min(max(k, 1), n - 1))

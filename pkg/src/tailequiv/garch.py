"""GARCH(1,1) filtering of negative log returns.

Zero conditional mean by default; the variance recursion starts from the
sample variance. Fitting maximizes the conditional log-likelihood with a
restarted Nelder-Mead over unconstrained transforms of the parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, special, stats
from scipy.signal import lfilter

from .copulas import make_rng, open_uniform, pseudo_observations
from .errors import DataError, NumericalError, ParameterError

INNOVATIONS = ("normal", "t", "skewt")


@dataclass(frozen=True)
class ReturnSeries:
    values: np.ndarray
    dates: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise DataError("returns must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise DataError("returns contain non-finite values")
        object.__setattr__(self, "values", v)
        if self.dates is not None and len(self.dates) != v.size:
            raise DataError("dates and values differ in length")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class GarchFit:
    omega: float
    alpha: float
    beta: float
    innovation: str
    loglik: float
    residuals: np.ndarray
    converged: bool
    sigma2: np.ndarray
    nu: float | None = None
    skew: float | None = None
    mu: float = 0.0
    series: ReturnSeries | None = field(default=None, repr=False)

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta


def neg_log_returns(prices, dates=None) -> ReturnSeries:
    p = np.asarray(prices, dtype=float)
    if p.size < 2:
        raise DataError("need at least two prices")
    bad = np.flatnonzero(~(p > 0))
    if bad.size:
        raise DataError(f"non-positive price at index {bad[0]}: {p[bad[0]]}")
    r = -np.diff(np.log(p))
    d = None if dates is None else np.asarray(dates)[1:]
    return ReturnSeries(r, d)


def conditional_variance(r, omega, alpha, beta, s2_init=None) -> np.ndarray:
    """sigma2_t = omega + alpha r_{t-1}^2 + beta sigma2_{t-1}, sigma2_1 = sample variance."""
    r = np.asarray(r, dtype=float)
    s1 = float(np.var(r)) if s2_init is None else float(s2_init)
    out = np.empty(r.size)
    out[0] = s1
    if r.size > 1:
        x = omega + alpha * r[:-1] ** 2
        out[1:], _ = lfilter([1.0], [1.0, -beta], x, zi=[beta * s1])
    return out


# --- standardized innovation densities (mean 0, variance 1) ---------------

def _hansen_consts(nu, lam):
    c = math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)) / math.sqrt(math.pi * (nu - 2))
    a = 4 * lam * c * (nu - 2) / (nu - 1)
    b = math.sqrt(1 + 3 * lam * lam - a * a)
    return a, b, c


def innovation_logpdf(z, innovation, nu=None, skew=None):
    z = np.asarray(z, dtype=float)
    if innovation == "normal":
        return -0.5 * (math.log(2 * math.pi) + z * z)
    if innovation == "t":
        logc = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(math.pi * (nu - 2))
        return logc - 0.5 * (nu + 1) * np.log1p(z * z / (nu - 2))
    if innovation == "skewt":
        a, b, c = _hansen_consts(nu, skew)
        s = np.where(z < -a / b, 1 - skew, 1 + skew)
        q = (b * z + a) / s
        return math.log(b * c) - 0.5 * (nu + 1) * np.log1p(q * q / (nu - 2))
    raise ParameterError(f"innovation must be one of {INNOVATIONS}")


def innovation_ppf(p, innovation, nu=None, skew=None):
    p = np.asarray(p, dtype=float)
    if innovation == "normal":
        return special.ndtri(p)
    scale = math.sqrt((nu - 2) / nu)
    if innovation == "t":
        return scale * stats.t.ppf(p, nu)
    if innovation == "skewt":
        a, b, _ = _hansen_consts(nu, skew)
        lo = (1 - skew) / 2
        left = (1 - skew) / b * scale * stats.t.ppf(np.minimum(p, lo) / (1 - skew), nu) - a / b
        right = (1 + skew) / b * scale * stats.t.ppf(0.5 + (np.maximum(p, lo) - lo) / (1 + skew), nu) - a / b
        return np.where(p < lo, left, right)
    raise ParameterError(f"innovation must be one of {INNOVATIONS}")


# --- parameter transforms --------------------------------------------------

def _expit(x):
    return special.expit(x)


def _unpack(theta, innovation, mean):
    omega = math.exp(theta[0])
    pers = _expit(theta[1])
    alpha = pers * _expit(theta[2])
    beta = pers - alpha
    i = 3
    nu = skew = None
    if innovation in ("t", "skewt"):
        nu = 2.05 + math.exp(min(theta[i], 7.0))  # nu <= ~1100, effectively normal
        i += 1
    if innovation == "skewt":
        skew = 0.995 * math.tanh(theta[i])
        i += 1
    mu = theta[i] if mean == "constant" else 0.0
    return omega, alpha, beta, nu, skew, mu


def _pack(omega, alpha, beta, nu, skew, mu, innovation, mean):
    pers = min(max(alpha + beta, 1e-6), 1 - 1e-6)
    share = min(max(alpha / pers, 1e-6), 1 - 1e-6)
    theta = [math.log(omega), special.logit(pers), special.logit(share)]
    if innovation in ("t", "skewt"):
        theta.append(math.log(max(nu - 2.05, 1e-3)))
    if innovation == "skewt":
        theta.append(math.atanh(skew / 0.995))
    if mean == "constant":
        theta.append(mu)
    return np.array(theta)


def garch_loglik(r, omega, alpha, beta, innovation="normal", nu=None, skew=None, mu=0.0) -> float:
    e = np.asarray(r, dtype=float) - mu
    s2 = conditional_variance(e, omega, alpha, beta)
    if not np.all(s2 > 0):
        return -math.inf
    z = e / np.sqrt(s2)
    return float(np.sum(innovation_logpdf(z, innovation, nu, skew) - 0.5 * np.log(s2)))


def _initial(r, innovation, mean):
    var = float(np.var(r))
    nu, skew = (8.0, 0.0) if innovation != "normal" else (None, None)
    mu = float(np.mean(r)) if mean == "constant" else 0.0
    return _pack(0.05 * var, 0.08, 0.88, nu, skew, mu, innovation, mean)


def fit_garch11(series: ReturnSeries, innovation: str = "skewt", mean: str = "zero",
                restarts: int = 3, tol: float = 1e-8, seed: int = 0) -> GarchFit:
    """Maximum likelihood GARCH(1,1) fit.

    The Nelder-Mead search is restarted from its own optimum until the
    objective stops improving by more than ``tol``, then from ``restarts``
    jittered starting points; the best optimum wins.
    """
    if innovation not in INNOVATIONS:
        raise ParameterError(f"innovation must be one of {INNOVATIONS}")
    if mean not in ("zero", "constant"):
        raise ParameterError("mean must be 'zero' or 'constant'")
    if not isinstance(series, ReturnSeries):
        series = ReturnSeries(series)
    r = series.values
    if r.size < 30:
        raise DataError(f"need at least 30 returns to fit, got {r.size}")
    scale = math.sqrt(float(np.var(r)))
    if not scale > 0:
        raise DataError("returns have zero variance")

    def objective(theta):
        try:
            omega, alpha, beta, nu, skew, mu = _unpack(theta, innovation, mean)
            ll = garch_loglik(r, omega, alpha, beta, innovation, nu, skew, mu)
        except (OverflowError, ValueError, ZeroDivisionError):
            return 1e300
        return -ll if math.isfinite(ll) else 1e300

    def polish(theta0):
        best = optimize.minimize(objective, theta0, method="Nelder-Mead",
                                 options={"xatol": 1e-8, "fatol": tol, "maxiter": 20000, "maxfev": 40000})
        for _ in range(20):
            again = optimize.minimize(objective, best.x, method="Nelder-Mead",
                                      options={"xatol": 1e-8, "fatol": tol, "maxiter": 20000, "maxfev": 40000})
            improved = best.fun - again.fun
            if again.fun < best.fun:
                best = again
            if improved <= tol:
                return best, True
        return best, False

    theta0 = _initial(r, innovation, mean)
    f_init = objective(theta0)
    best, converged = polish(theta0)
    rng = make_rng(seed)
    for _ in range(restarts):
        start = theta0 + rng.normal(scale=0.5, size=theta0.size)
        cand, ok = polish(start)
        if cand.fun < best.fun - tol:
            best, converged = cand, ok
    if not math.isfinite(best.fun) or best.fun > f_init:
        raise NumericalError("GARCH fit failed to improve on the initializer",
                             {"best": best.x.tolist(), "objective": best.fun})
    omega, alpha, beta, nu, skew, mu = _unpack(best.x, innovation, mean)
    e = r - mu
    s2 = conditional_variance(e, omega, alpha, beta)
    return GarchFit(omega, alpha, beta, innovation, -float(best.fun), e / np.sqrt(s2), bool(converged),
                    s2, nu, skew, mu, series)


def standardized_residuals(fit: GarchFit) -> np.ndarray:
    if fit.series is None:
        return np.asarray(fit.residuals)
    e = fit.series.values - fit.mu
    return e / np.sqrt(conditional_variance(e, fit.omega, fit.alpha, fit.beta))


def garch_simulate(omega: float, alpha: float, beta: float, innovation: str = "normal", n: int = 1000,
                   seed: int = 0, nu: float | None = None, skew: float | None = None,
                   burn: int = 500) -> ReturnSeries:
    """Simulate a zero-mean GARCH(1,1) path, discarding ``burn`` initial draws."""
    if not (omega > 0 and alpha >= 0 and beta >= 0 and alpha + beta < 1):
        raise ParameterError("need omega > 0, alpha, beta >= 0 and alpha + beta < 1")
    if innovation != "normal" and not (nu and nu > 2):
        raise ParameterError("heavy-tailed innovations need nu > 2")
    if innovation == "skewt" and not (skew is not None and -1 < skew < 1):
        raise ParameterError("skew must lie in (-1, 1)")
    rng = make_rng(seed)
    z = innovation_ppf(open_uniform(rng, n + burn), innovation, nu, skew)
    r = np.empty(n + burn)
    s2 = omega / (1 - alpha - beta)
    for t in range(n + burn):
        r[t] = math.sqrt(s2) * z[t]
        s2 = omega + alpha * r[t] * r[t] + beta * s2
    return ReturnSeries(r[burn:])


def read_price_csv(path) -> pd.DataFrame:
    """Read a ``date,price`` file; raises DataError when it is missing or malformed."""
    try:
        df = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    cols = {c.strip().lower(): c for c in df.columns}
    if "date" not in cols or "price" not in cols:
        raise DataError(f"{path}: expected columns date, price")
    out = df[[cols["date"], cols["price"]]].rename(columns={cols["date"]: "date", cols["price"]: "price"})
    out["date"] = out["date"].astype(str)
    out["price"] = pd.to_numeric(out["price"], errors="coerce")
    if out["price"].isna().any():
        raise DataError(f"{path}: non-numeric price in row {int(out['price'].isna().to_numpy().argmax())}")
    return out


def _residual_frame(name, frame, innovation, mean):
    series = neg_log_returns(frame["price"].to_numpy(), frame["date"].to_numpy())
    fit = fit_garch11(series, innovation=innovation, mean=mean)
    return pd.DataFrame({"date": series.dates, name: standardized_residuals(fit)}), fit


def filter_prices(frames: dict, innovation: str = "skewt", mean: str = "zero", jobs: int = 1):
    """Prices per index -> pseudo-observations of GARCH residuals on the common dates.

    ``frames`` maps an index name to a frame with ``date`` and ``price``
    columns. Each series is filtered on its own returns; rows are then inner
    joined on date and ranked column by column. Returns the pseudo-observation
    frame and the fits keyed by name.
    """
    names = list(frames)
    if not names:
        raise DataError("no price series given")
    if jobs > 1 and len(names) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, len(names))) as pool:
            done = list(pool.map(_residual_frame, names, [frames[k] for k in names],
                                 [innovation] * len(names), [mean] * len(names)))
    else:
        done = [_residual_frame(k, frames[k], innovation, mean) for k in names]
    merged = done[0][0]
    for res, _ in done[1:]:
        merged = merged.merge(res, on="date", how="inner")
    if len(merged) < 2:
        raise DataError("fewer than two common dates across the series")
    merged[names] = pseudo_observations(merged[names].to_numpy())
    return merged, {k: fit for k, (_, fit) in zip(names, done)}

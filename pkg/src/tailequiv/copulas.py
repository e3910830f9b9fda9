"""Copula models, samplers and sample transforms.

Skew normal and AC skew t copulas are sampled through their stochastic
representations and uniformized with the exact marginal CDFs, so the
draws follow the stated copula (not a rank approximation of it).
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, asdict
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline
from scipy.stats import rankdata

from .errors import DataError, NumericalError, ParameterError

# Documented generator: PCG64 seeded from SeedSequence((seed, replication)).
_TWO53 = float(2**53)


def make_rng(seed: int, replication: int | None = None) -> np.random.Generator:
    """Generator for ``seed`` or for one replication substream of it."""
    entropy = [int(seed)] if replication is None else [int(seed), int(replication)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms strictly inside (0, 1) on the 2^-53 lattice midpoints."""
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) / _TWO53


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Independence:
    d: int = 2

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError("dimension must be >= 1")


@dataclass(frozen=True)
class FGM:
    delta: float

    d = 2

    def __post_init__(self):
        if not -1.0 <= self.delta <= 1.0:
            raise ParameterError(f"FGM delta must lie in [-1, 1], got {self.delta}")


def _latent_corr(rho, d1, d2, rho_meaning):
    if rho_meaning == "latent":
        return (rho - d1 * d2) / math.sqrt((1 - d1 * d1) * (1 - d2 * d2))
    if rho_meaning == "pearson":
        # solve corr(Y1, Y2) = rho for the latent normal correlation
        s = math.sqrt((1 - 2 * d1 * d1 / math.pi) * (1 - 2 * d2 * d2 / math.pi))
        return (rho * s - d1 * d2 * (1 - 2 / math.pi)) / math.sqrt((1 - d1 * d1) * (1 - d2 * d2))
    raise ParameterError(f"rho_meaning must be 'latent' or 'pearson', got {rho_meaning!r}")


class _SkewLatent:
    """Shared validation for the skew normal / skew t latent construction."""

    d = 2

    def _check(self):
        for name in ("rho", "delta1", "delta2"):
            val = getattr(self, name)
            if not -1.0 < val < 1.0:
                raise ParameterError(f"{name} must lie in (-1, 1), got {val}")
        rz = self.latent_corr
        if not -1.0 < rz < 1.0:
            raise ParameterError(f"induced latent correlation {rz:.6g} is outside (-1, 1)")

    @property
    def latent_corr(self) -> float:
        return _latent_corr(self.rho, self.delta1, self.delta2, self.rho_meaning)

    @property
    def shapes(self) -> tuple[float, float]:
        return tuple(dl / math.sqrt(1 - dl * dl) for dl in (self.delta1, self.delta2))


@dataclass(frozen=True)
class SkewNormal(_SkewLatent):
    """Bivariate skew normal copula, Y_j = delta_j |Z0| + sqrt(1 - delta_j^2) Z_j.

    By default ``rho`` is the off-diagonal of the latent scale matrix; with
    ``rho_meaning="pearson"`` it is the Pearson correlation of (Y1, Y2).
    """

    rho: float
    delta1: float
    delta2: float
    rho_meaning: str = "latent"

    def __post_init__(self):
        self._check()


@dataclass(frozen=True)
class SkewT(_SkewLatent):
    """AC skew t copula, X = Y / sqrt(V) with V ~ Gamma(nu/2, rate nu/2)."""

    rho: float
    delta1: float
    delta2: float
    nu: float
    rho_meaning: str = "latent"

    def __post_init__(self):
        self._check()
        if not self.nu > 0:
            raise ParameterError(f"nu must be positive, got {self.nu}")


@dataclass(frozen=True)
class Survival:
    """Copula of (1 - U_1, ..., 1 - U_d) for U following ``inner``."""

    inner: object

    @property
    def d(self):
        return self.inner.d


CopulaModel = Independence | FGM | SkewNormal | SkewT | Survival


def describe(model) -> dict:
    """JSON-friendly description of a model."""
    if isinstance(model, Survival):
        return {"family": "survival", "inner": describe(model.inner)}
    family = {Independence: "independence", FGM: "fgm", SkewNormal: "skewnormal", SkewT: "skewt"}[type(model)]
    return {"family": family, **asdict(model)}


def model_from_dict(spec: dict):
    spec = dict(spec)
    family = spec.pop("family")
    if family == "survival":
        return Survival(model_from_dict(spec["inner"]))
    cls = {"independence": Independence, "fgm": FGM, "skewnormal": SkewNormal, "skewt": SkewT}[family]
    return cls(**spec)


_MODEL_RE = re.compile(r"^\s*([a-z]+)\s*(?::\s*(.*))?$")


def parse_model(text: str):
    """Parse ``independence``, ``fgm:0.5``, ``skewnormal:rho,d1,d2``,
    ``skewt:rho,d1,d2,nu`` or ``survival:<model>``."""
    text = text.strip()
    if text.startswith("survival:"):
        return Survival(parse_model(text[len("survival:"):]))
    m = _MODEL_RE.match(text.lower())
    if not m:
        raise ParameterError(f"cannot parse model {text!r}")
    family, args = m.group(1), m.group(2)
    try:
        vals = [float(a) for a in args.split(",")] if args else []
    except ValueError as exc:
        raise ParameterError(f"non-numeric model parameters in {text!r}") from exc
    arity = {"independence": (0, 1), "fgm": (1, 1), "skewnormal": (3, 3), "skewt": (4, 4)}
    if family not in arity:
        raise ParameterError(f"unknown copula family {family!r}")
    lo, hi = arity[family]
    if not lo <= len(vals) <= hi:
        raise ParameterError(f"{family} expects {lo}..{hi} parameters, got {len(vals)}")
    if family == "independence":
        return Independence(int(vals[0]) if vals else 2)
    if family == "fgm":
        return FGM(vals[0])
    if family == "skewnormal":
        return SkewNormal(*vals)
    return SkewT(*vals)


# ---------------------------------------------------------------------------
# marginal CDFs
# ---------------------------------------------------------------------------

def owens_t(h, a):
    """Owen's T function T(h, a) = (1/2pi) int_0^a exp(-h^2 (1+x^2)/2) / (1+x^2) dx."""
    return special.owens_t(h, a)


def skew_normal_cdf(x, alpha):
    x = np.asarray(x, dtype=float)
    out = np.clip(special.ndtr(x) - 2.0 * owens_t(x, alpha), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def _t_pdf(x, nu):
    logc = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(nu * math.pi)
    return np.exp(logc - 0.5 * (nu + 1) * np.log1p(x * x / nu))


def skew_t_pdf(x, alpha, nu):
    """AC skew t density 2 t_nu(x) T_{nu+1}(alpha x sqrt((nu+1)/(nu+x^2)))."""
    x = np.asarray(x, dtype=float)
    arg = alpha * x * np.sqrt((nu + 1) / (nu + x * x))
    return 2.0 * _t_pdf(x, nu) * special.stdtr(nu + 1, arg)


def skew_t_cdf(x: float, alpha: float, nu: float) -> float:
    """Skew t CDF by adaptive quadrature of the density (absolute tolerance 1e-8)."""
    if not nu > 0:
        raise ParameterError(f"nu must be positive, got {nu}")
    x = float(x)
    # integrate the lighter side and complement when x > 0 to stay accurate
    if x <= 0:
        val, err = integrate.quad(skew_t_pdf, -np.inf, x, args=(alpha, nu), epsabs=1e-10, epsrel=1e-10, limit=200)
    else:
        tail, err = integrate.quad(skew_t_pdf, x, np.inf, args=(alpha, nu), epsabs=1e-10, epsrel=1e-10, limit=200)
        val = 1.0 - tail
    if not err <= 1e-8:
        raise NumericalError("skew t CDF quadrature did not converge",
                             {"x": x, "alpha": alpha, "nu": nu, "abserr": err})
    return min(max(val, 0.0), 1.0)


_Z_MAX = 8.0
_Z_NODES = 4001
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@lru_cache(maxsize=32)
def _skew_t_table(alpha: float, nu: float) -> CubicHermiteSpline:
    """Hermite interpolant of the skew t CDF on the arcsinh scale.

    Node values come from one adaptive quadrature anchor plus 16-point
    Gauss-Legendre increments; slopes are the exact density.
    """
    z = np.linspace(-_Z_MAX, _Z_MAX, _Z_NODES)
    a, b = z[:-1], z[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    zz = mid[:, None] + half[:, None] * _GL_X[None, :]
    g = skew_t_pdf(np.sinh(zz), alpha, nu) * np.cosh(zz)
    inc = half * (g @ _GL_W)
    start = skew_t_cdf(math.sinh(z[0]), alpha, nu)
    vals = start + np.concatenate([[0.0], np.cumsum(inc)])
    slopes = skew_t_pdf(np.sinh(z), alpha, nu) * np.cosh(z)
    return CubicHermiteSpline(z, vals, slopes)


def skew_t_cdf_vec(x, alpha: float, nu: float) -> np.ndarray:
    """Vectorized skew t CDF; agrees with :func:`skew_t_cdf` to ~1e-10."""
    x = np.asarray(x, dtype=float)
    z = np.arcsinh(x)
    out = np.empty_like(z)
    inside = np.abs(z) <= _Z_MAX
    out[inside] = _skew_t_table(float(alpha), float(nu))(z[inside])
    for idx in np.flatnonzero(~inside):
        out.flat[idx] = skew_t_cdf(x.flat[idx], alpha, nu)
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def fgm_conditional_inverse(u, p, delta):
    """Solve dC(u, v; delta)/du = p for v (quadratic root, stable form)."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    a = delta * (1.0 - 2.0 * u)
    b = 1.0 + a
    disc = np.maximum(b * b - 4.0 * a * p, 0.0)
    # 2p / (b + sqrt(disc)) equals the small root and reduces to p at a = 0
    out = np.where(np.abs(a) < 1e-12, p, 2.0 * p / (b + np.sqrt(disc)))
    return float(out) if np.ndim(out) == 0 else out


def _skew_latent(model: SkewNormal, n: int, rng: np.random.Generator) -> np.ndarray:
    rz = model.latent_corr
    z0 = np.abs(rng.standard_normal(n))
    z1 = rng.standard_normal(n)
    z2 = rz * z1 + math.sqrt(1.0 - rz * rz) * rng.standard_normal(n)
    y = np.empty((n, 2))
    for j, (dl, zj) in enumerate(((model.delta1, z1), (model.delta2, z2))):
        y[:, j] = dl * z0 + math.sqrt(1.0 - dl * dl) * zj
    return y


def _clip_open(u: np.ndarray) -> np.ndarray:
    tiny = np.finfo(float).tiny
    return np.clip(u, tiny, 1.0 - np.finfo(float).epsneg)


def sample_with_rng(model, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if isinstance(model, Survival):
        return 1.0 - sample_with_rng(model.inner, n, rng)
    if isinstance(model, Independence):
        return open_uniform(rng, (n, model.d))
    if isinstance(model, FGM):
        u = open_uniform(rng, n)
        p = open_uniform(rng, n)
        v = fgm_conditional_inverse(u, p, model.delta)
        return _clip_open(np.column_stack([u, v]))
    if isinstance(model, SkewT):
        y = _skew_latent(model, n, rng)
        vmix = rng.gamma(model.nu / 2.0, 2.0 / model.nu, size=n)
        x = y / np.sqrt(vmix)[:, None]
        a1, a2 = model.shapes
        return _clip_open(np.column_stack([skew_t_cdf_vec(x[:, 0], a1, model.nu),
                                           skew_t_cdf_vec(x[:, 1], a2, model.nu)]))
    if isinstance(model, SkewNormal):
        y = _skew_latent(model, n, rng)
        a1, a2 = model.shapes
        return _clip_open(np.column_stack([skew_normal_cdf(y[:, 0], a1), skew_normal_cdf(y[:, 1], a2)]))
    raise ParameterError(f"unsupported model {model!r}")


def sample(model, n: int, seed: int) -> np.ndarray:
    """n independent draws from ``model`` as an n x d matrix in (0, 1)."""
    return sample_with_rng(model, n, make_rng(seed))


# ---------------------------------------------------------------------------
# closed-form CDFs (Independence, FGM and their survival copulas)
# ---------------------------------------------------------------------------

def cdf(model, u, v):
    """Bivariate copula CDF for the families that have one in closed form."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(model, Survival):
        return u + v - 1.0 + cdf(model.inner, 1.0 - u, 1.0 - v)
    if isinstance(model, Independence):
        if model.d != 2:
            raise ParameterError("closed-form cdf is bivariate")
        return u * v
    if isinstance(model, FGM):
        return u * v * (1.0 + model.delta * (1.0 - u) * (1.0 - v))
    raise ParameterError(f"no closed-form CDF for {type(model).__name__}")


def diagonal(model, u):
    """C(u,...,u); the independence copula works in any dimension."""
    if isinstance(model, Independence):
        return np.asarray(u, dtype=float) ** model.d
    return cdf(model, u, u)


def has_closed_form(model) -> bool:
    if isinstance(model, Survival):
        return has_closed_form(model.inner)
    return isinstance(model, (Independence, FGM))


# ---------------------------------------------------------------------------
# transforms and paired samples
# ---------------------------------------------------------------------------

def survival_transform(m) -> np.ndarray:
    return 1.0 - np.asarray(m, dtype=float)


def pseudo_observations(x) -> np.ndarray:
    """Column ranks (ties by first occurrence) divided by n + 1."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    n = x.shape[0]
    if n < 1:
        raise DataError("need at least one observation")
    r = rankdata(x, method="ordinal", axis=0) / (n + 1.0)
    return r[:, 0] if squeeze else r


PAIRINGS = ("independent", "countermonotone", "split")


@dataclass(frozen=True)
class PairedSample:
    """Rows of ``u1`` are attributed to C1 and rows of ``u2`` to C2."""

    u1: np.ndarray
    u2: np.ndarray
    pairing: str = "independent"
    seed: int | None = None
    meta: dict | None = None

    def __post_init__(self):
        u1 = np.atleast_2d(np.asarray(self.u1, dtype=float))
        u2 = np.atleast_2d(np.asarray(self.u2, dtype=float))
        if u1.shape[0] != u2.shape[0]:
            raise DataError(f"row counts differ: {u1.shape[0]} vs {u2.shape[0]}")
        if u1.shape[0] < 1:
            raise DataError("empty sample")
        for arr in (u1, u2):
            if not np.all((arr > 0) & (arr < 1)):
                raise DataError("all entries must lie strictly inside (0, 1)")
        if self.pairing not in PAIRINGS:
            raise ParameterError(f"pairing must be one of {PAIRINGS}")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @property
    def n(self) -> int:
        return self.u1.shape[0]

    @property
    def m1(self) -> np.ndarray:
        return self.u1.max(axis=1)

    @property
    def m2(self) -> np.ndarray:
        return self.u2.max(axis=1)

    def rows(self, idx) -> "PairedSample":
        return PairedSample(self.u1[idx], self.u2[idx], "split", self.seed, self.meta)


def independent_pair(model1, model2, n: int, seed: int, replication: int | None = None) -> PairedSample:
    rng = make_rng(seed, replication)
    u1 = sample_with_rng(model1, n, rng)
    u2 = sample_with_rng(model2, n, rng)
    meta = {"model1": describe(model1), "model2": describe(model2)}
    return PairedSample(u1, u2, "independent", seed, meta)


def countermonotone_pair(model, n: int, seed: int, replication: int | None = None) -> PairedSample:
    """C1 = ``model`` and C2 its survival copula, built as U2 = 1 - U1."""
    u1 = sample_with_rng(model, n, make_rng(seed, replication))
    meta = {"model1": describe(model), "model2": describe(Survival(model))}
    return PairedSample(u1, 1.0 - u1, "countermonotone", seed, meta)


def save_sample(sample: PairedSample, path) -> Path:
    """Headerless CSV of n x 2d values plus a ``.json`` sidecar."""
    path = Path(path)
    data = np.hstack([sample.u1, sample.u2])
    np.savetxt(path, data, delimiter=",", fmt="%.17g")
    meta = {"d": sample.u1.shape[1], "pairing": sample.pairing, "seed": sample.seed, **(sample.meta or {})}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def load_sample(path, d: int | None = None) -> PairedSample:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    d = d or meta.get("d") or data.shape[1] // 2
    if data.shape[1] != 2 * d:
        raise DataError(f"expected {2 * d} columns, found {data.shape[1]}")
    pairing = meta.get("pairing", "independent")
    return PairedSample(data[:, :d], data[:, d:], pairing, meta.get("seed"), meta)


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc

"""Reproducible drivers for the simulation and market studies plus validation studies.

Every driver takes an ``ExperimentSpec`` and returns plain tables, so a run is
fully determined by the spec (seed included). Replications draw from
per-replication substreams and are aggregated in replication order, so
running them in a worker pool gives the same output as running them serially.
"""
from __future__ import annotations

import dataclasses
import functools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .auxfun import make_clamp, parse_aux
from .copulas import (FGM, Independence, PairedSample, SkewNormal, SkewT, Survival, cdf,
                      countermonotone_pair, diagonal, has_closed_form, independent_pair, make_rng,
                      sample_with_rng)
from .errors import DataError, ParameterError
from .finite import EmpiricalTails, empirical_cdfs, finite_sweep, finite_test
from .garch import filter_prices
from .limit import LimitEstimator, blocks, limit_test
from .svgplot import line_chart
from .theory import TailQuantities, XiConfig, xi_limit, xi_threshold


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """``steps`` equally spaced points from ``lo`` to ``hi`` inclusive."""

    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ParameterError("a grid needs at least one point")
        if self.hi < self.lo:
            raise ParameterError(f"grid upper end {self.hi} is below its lower end {self.lo}")
        if self.steps == 1 and self.hi != self.lo:
            raise ParameterError("a one-point grid needs lo == hi")

    @classmethod
    def parse(cls, text: str) -> "Grid":
        parts = str(text).split(":")
        try:
            if len(parts) == 1:
                v = float(parts[0])
                return cls(v, v, 1)
            lo, hi, steps = parts
            return cls(float(lo), float(hi), int(steps))
        except ValueError as exc:
            raise ParameterError(f"grid must be lo:hi:steps, got {text!r}") from exc

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)

    def integers(self) -> np.ndarray:
        return np.unique(np.rint(self.values()).astype(int))

    def __str__(self):
        return f"{self.lo:g}:{self.hi:g}:{self.steps}"


SCENARIOS = ("simulation", "empirical")


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything that determines a driver's output tables."""

    scenario: str = "simulation"
    case: str = "i"
    n: int = 40000
    seed: int = 1
    reps: int = 1
    w: float = 0.5
    xstar: float = 1.5
    d: int = 2
    h1: str = ""
    h2: str = ""
    u_grid: Grid = Grid(0.0025, 0.25, 100)
    k_grid: Grid = Grid(400, 4000, 19)
    v_fixed: float = 0.025
    v_grid: Grid = Grid(0.01, 0.1, 19)
    k_fixed: int = 1000
    xstar_grid: Grid = Grid(1.0, 2.0, 5)
    xstar_v_grid: Grid = Grid(0.01, 0.1, 10)
    level: float = 0.05
    form: str = "squared"
    innovation: str = "skewt"
    reference_draws: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"scenario must be one of {SCENARIOS}")
        if self.n < 2 or self.reps < 1 or self.jobs < 1:
            raise ParameterError("n >= 2, reps >= 1 and jobs >= 1 are required")
        if not 0 < self.level < 1:
            raise ParameterError("level must lie in (0, 1)")
        for name in ("u_grid", "v_grid", "xstar_v_grid"):
            g = getattr(self, name)
            if not (0 < g.lo and g.hi < 1):
                raise ParameterError(f"{name} must lie inside (0, 1), got {g}")
        if not 0 < self.v_fixed < 1:
            raise ParameterError("v_fixed must lie in (0, 1)")
        if self.k_grid.lo < 1 or self.k_fixed < 1:
            raise ParameterError("k values must be >= 1")
        if self.xstar_grid.lo <= 0 or self.xstar <= 0:
            raise ParameterError("x* must be positive")
        self.config()

    @classmethod
    def defaults(cls, scenario: str = "simulation", **overrides) -> "ExperimentSpec":
        if scenario == "empirical":
            base = dict(scenario="empirical", n=1153, xstar=0.5, u_grid=Grid(0.05, 0.4, 36),
                        k_grid=Grid(50, 500, 10), v_fixed=0.1, v_grid=Grid(0.05, 0.4, 8), k_fixed=100,
                        xstar_grid=Grid(0.25, 1.5, 6), xstar_v_grid=Grid(0.1, 0.2, 3))
        else:
            base = dict(scenario=scenario)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentSpec":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"line {lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key.replace("-", "_")] = value
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(raw)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentSpec":
        try:
            text = Path(path).read_text()
        except FileNotFoundError as exc:
            raise DataError(f"no such spec file: {path}") from exc
        return cls.from_text(text, **overrides)

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentSpec":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = set(raw) - set(types)
        if unknown:
            raise ParameterError(f"unknown spec keys: {sorted(unknown)}")
        scenario = str(raw.get("scenario", "simulation"))
        values = {}
        for key, value in raw.items():
            kind = types[key]
            try:
                if isinstance(value, Grid) or kind != "Grid":
                    values[key] = value if not isinstance(value, str) else _cast(kind, value)
                else:
                    values[key] = Grid.parse(value)
            except ValueError as exc:
                raise ParameterError(f"bad value for {key}: {value!r}") from exc
        values.pop("scenario", None)
        return cls.defaults(scenario, **values)

    def echo(self) -> list[str]:
        # jobs is left out: it changes scheduling, never results
        return [f"{f.name}={getattr(self, f.name)}" for f in dataclasses.fields(self) if f.name != "jobs"]

    def config(self, xstar: float | None = None) -> XiConfig:
        xs = self.xstar if xstar is None else xstar
        h1 = parse_aux(self.h1) if self.h1 else make_clamp(self.d - 1)
        h2 = parse_aux(self.h2) if self.h2 and xstar is None else make_clamp(xs)
        return XiConfig(w=self.w, h1=h1, h2=h2, d=self.d)


def _cast(kind: str, value: str):
    if kind == "int":
        return int(float(value)) if float(value).is_integer() else int(value)
    if kind == "float":
        return float(value)
    return value


# ---------------------------------------------------------------------------
# replication and output helpers
# ---------------------------------------------------------------------------

def default_jobs() -> int:
    return os.cpu_count() or 1


def replicate(fn, reps: int, jobs: int = 1) -> list:
    """``[fn(0), ..., fn(reps - 1)]``, optionally computed in a process pool."""
    if jobs <= 1 or reps <= 1:
        return [fn(r) for r in range(reps)]
    with ProcessPoolExecutor(max_workers=min(jobs, reps)) as pool:
        return list(pool.map(fn, range(reps), chunksize=max(1, reps // (4 * jobs))))


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    tables: dict = field(default_factory=dict)
    title: str = ""

    def header(self, name: str) -> list[str]:
        return [f"tailequiv {__version__}", f"table {name}", f"experiment {self.title}",
                *self.spec.echo()]

    def write(self, out_dir, plots: bool = True) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, df in self.tables.items():
            path = out / f"{name}.csv"
            write_table(df, path, self.header(name))
            written.append(path)
            if plots:
                svg = plot_table(name, df, self.spec)
                if svg is not None:
                    spath = out / f"{name}.svg"
                    spath.write_text(svg)
                    written.append(spath)
        return written


def write_table(df: pd.DataFrame, path, header=()) -> Path:
    """CSV with ``# ``-prefixed provenance lines; floats use a fixed format."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        df.to_csv(fh, index=False, float_format="%.10g", lineterminator="\n")
    return path


_AXES = {"finite": "u", "limit_k": "k", "limit_v": "v", "xstar": "xstar"}


def plot_table(name: str, df: pd.DataFrame, spec: ExperimentSpec) -> str | None:
    """SVG twin of a figure table; the first replication only when reps > 1."""
    axis = next((a for prefix, a in _AXES.items() if name.endswith(prefix)), None)
    if axis is None or df.empty:
        return None
    if "rep" in df:
        df = df[df["rep"] == df["rep"].min()]
    if axis == "xstar":
        series = {f"x*={xs:g}": g["xi_hat"].to_numpy() for xs, g in df.groupby("xstar")}
        x = df[df["xstar"] == df["xstar"].iloc[0]]["v"].to_numpy()
        return line_chart(x, series, hlines=(0.0, spec.w, -spec.w), title=name, xlabel="v",
                          ylabel="xi estimate", ylim=(-1, 1))
    series = {"xi_hat": df["xi_hat"].to_numpy()}
    if "xi_ref" in df:
        series["reference"] = df["xi_ref"].to_numpy()
    return line_chart(df[axis].to_numpy(), series, band=(df["ci_lo"].to_numpy(), df["ci_hi"].to_numpy()),
                      hlines=(0.0, spec.w, -spec.w), title=name, xlabel=axis, ylabel="xi estimate",
                      ylim=(-1, 1))


# ---------------------------------------------------------------------------
# sweeps shared by both studies
# ---------------------------------------------------------------------------

def finite_table(tails: EmpiricalTails, spec: ExperimentSpec) -> pd.DataFrame:
    u = spec.u_grid.values()
    rows = [{"u": float(ui), **r.as_row()} for ui, r in zip(u, finite_sweep(tails, u, spec.config(), spec.level))]
    return pd.DataFrame(rows)


def _limit_row(est: LimitEstimator, k: int, v: float, cfg: XiConfig, level: float, **extra) -> dict:
    e = est.estimate(int(k), float(v), cfg)
    return {**extra, **e.as_row(), **limit_test(e, level).as_row()}


def limit_tables(est: LimitEstimator, spec: ExperimentSpec) -> dict:
    cfg = spec.config()
    n_min = min(est.x1.shape[0], est.x2.shape[0])
    ks = [k for k in spec.k_grid.integers() if k < n_min]
    if not ks or spec.k_fixed >= n_min:
        raise ParameterError(f"k values must be below the block size {n_min}")
    by_k = pd.DataFrame([_limit_row(est, k, spec.v_fixed, cfg, spec.level) for k in ks])
    by_v = pd.DataFrame([_limit_row(est, spec.k_fixed, v, cfg, spec.level) for v in spec.v_grid.values()])
    rows = []
    for xs in spec.xstar_grid.values():
        cfg_x = spec.config(xstar=float(xs))
        rows += [_limit_row(est, spec.k_fixed, v, cfg_x, spec.level, xstar=float(xs))
                 for v in spec.xstar_v_grid.values()]
    return {"limit_k": by_k, "limit_v": by_v, "xstar": pd.DataFrame(rows)}


def _stack(per_rep: list, reps: int) -> dict:
    out = {}
    for name in per_rep[0]:
        frames = []
        for r, tables in enumerate(per_rep):
            df = tables[name]
            frames.append(df.assign(rep=r) if reps > 1 else df)
        out[name] = pd.concat(frames, ignore_index=True)
    return out


# ---------------------------------------------------------------------------
# simulation study
# ---------------------------------------------------------------------------

SIMULATION_CASES = {
    "i": SkewNormal(0.5, -0.4, -0.4),
    "ii": SkewNormal(0.5, -0.7, -0.7),
    "iii": SkewT(0.5, 0.6, 0.6, 5.0),
}


def simulation_models(case: str):
    """(C1, C2) of a simulation case: C against itself for (i), against its survival otherwise."""
    if case not in SIMULATION_CASES:
        raise ParameterError(f"simulation case must be one of {sorted(SIMULATION_CASES)}, got {case!r}")
    c = SIMULATION_CASES[case]
    return (c, c) if case == "i" else (c, Survival(c))


@functools.lru_cache(maxsize=32)
def reference_diagonals(model, u: tuple, draws: int, seed: int) -> tuple:
    """Monte Carlo C(u,u) and its survival counterpart from one large cached sample.

    Returns (lower, upper) where upper is the diagonal of the survival copula.
    """
    rng = make_rng(seed, 10**6)
    chunk = 10**6
    lo_max, hi_min = [], []
    left = draws
    while left > 0:
        x = sample_with_rng(model, min(chunk, left), rng)
        lo_max.append(x.max(axis=1))
        hi_min.append(x.min(axis=1))
        left -= x.shape[0]
    m = np.sort(np.concatenate(lo_max))
    s = np.sort(np.concatenate(hi_min))
    ua = np.asarray(u)
    lower = np.searchsorted(m, ua, side="right") / draws
    upper = (draws - np.searchsorted(s, 1.0 - ua, side="right")) / draws
    return tuple(lower), tuple(upper)


def _simulation_rep(rep: int, case: str, spec: ExperimentSpec) -> dict:
    c1, c2 = simulation_models(case)
    if case == "i":
        paired = independent_pair(c1, c2, spec.n, spec.seed, 2 * rep)
    else:
        paired = countermonotone_pair(c1, spec.n, spec.seed, 2 * rep)
    finite = finite_table(empirical_cdfs(paired), spec)
    if case == "i":
        finite["xi_ref"] = 0.0
    elif spec.reference_draws > 0:
        lower, upper = reference_diagonals(c1, tuple(spec.u_grid.values()), spec.reference_draws, spec.seed)
        finite["xi_ref"] = xi_threshold(np.array(lower), np.array(upper), spec.u_grid.values(), cfg=spec.config())
    blocks_ = independent_pair(c1, c2, spec.n, spec.seed, 2 * rep + 1)
    tables = {"finite": finite}
    tables.update(limit_tables(LimitEstimator(blocks_.u1, blocks_.u2, spec.form), spec))
    return tables


def run_simulation_case(case: str, spec: ExperimentSpec | None = None) -> ExperimentResult:
    """Estimate curves for one simulation case.

    Finite-threshold runs pair C with itself independently in case (i) and
    with its survival copula through U2 = 1 - U1 otherwise; limit runs
    always use mutually independent samples.
    """
    spec = spec or ExperimentSpec.defaults("simulation", case=case)
    simulation_models(case)
    spec = dataclasses.replace(spec, case=case)
    per_rep = replicate(functools.partial(_simulation_rep, case=case, spec=spec), spec.reps, spec.jobs)
    tables = {f"sim_{case}_{k}": v for k, v in _stack(per_rep, spec.reps).items()}
    return ExperimentResult(spec, tables, f"simulation case {case}")


# ---------------------------------------------------------------------------
# market study
# ---------------------------------------------------------------------------

INDICES = ("SP500", "FTSE", "NIKKEI")

EMPIRICAL_CASES = {
    "i": dict(kind="lower-upper", period="1", pair=("FTSE", "NIKKEI")),
    "ii": dict(kind="lower-upper", period="2", pair=("FTSE", "NIKKEI")),
    "iii": dict(kind="upper-upper", period="1", pair=("SP500", "NIKKEI"), other=("SP500", "FTSE")),
    "iv": dict(kind="upper-upper", period="2", pair=("SP500", "NIKKEI"), other=("SP500", "FTSE")),
    "v": dict(kind="periods", pair=("FTSE", "NIKKEI")),
}


def _columns(frame, cols) -> np.ndarray:
    if isinstance(frame, pd.DataFrame):
        missing = [c for c in cols if c not in frame]
        if missing:
            raise DataError(f"pseudo-observations lack columns {missing}")
        return frame[list(cols)].to_numpy(dtype=float)
    raise DataError("pseudo-observations must be given as data frames with index columns")


def empirical_sample(case: str, data: dict) -> tuple[PairedSample, str]:
    """Paired sample for a market case and the split applied to its limit blocks.

    C1 and C2 are arranged so that a positive measure means C2 has the
    stronger tail: the upper tail in the lower-upper cases, the
    (SP500, FTSE) pair in the upper-upper cases and the second period in
    the period comparison.
    """
    if case not in EMPIRICAL_CASES:
        raise ParameterError(f"empirical case must be one of {sorted(EMPIRICAL_CASES)}, got {case!r}")
    spec = EMPIRICAL_CASES[case]
    if spec["kind"] == "periods":
        for p in ("1", "2"):
            if p not in data:
                raise DataError(f"case {case} needs pseudo-observations for period {p}")
        a = 1.0 - _columns(data["1"], spec["pair"])
        b = 1.0 - _columns(data["2"], spec["pair"])
        m = min(len(a), len(b))
        return PairedSample(a[:m], b[:m], "split", meta={"case": case}), "none"
    if spec["period"] not in data:
        raise DataError(f"case {case} needs pseudo-observations for period {spec['period']}")
    frame = data[spec["period"]]
    u = _columns(frame, spec["pair"])
    if spec["kind"] == "lower-upper":
        return PairedSample(u, 1.0 - u, "countermonotone", meta={"case": case}), "halves"
    b = _columns(frame, spec["other"])
    return PairedSample(1.0 - u, 1.0 - b, "split", meta={"case": case}), "halves"


def run_empirical_case(case: str, data: dict, spec: ExperimentSpec | None = None) -> ExperimentResult:
    """Estimate curves for one market case from pseudo-observations per period.

    ``data`` maps a period label ("1", "2") to a frame with one column of
    pseudo-observations per index.
    """
    spec = spec or ExperimentSpec.defaults("empirical", case=case)
    paired, split = empirical_sample(case, data)
    spec = dataclasses.replace(spec, case=case, n=paired.n)
    x1, x2 = blocks(paired, split)
    tables = {"finite": finite_table(empirical_cdfs(paired), spec)}
    tables.update(limit_tables(LimitEstimator(x1, x2, spec.form), spec))
    tables = {f"emp_{case}_{k}": v.assign(split=split) for k, v in tables.items()}
    return ExperimentResult(spec, tables, f"empirical case {case}")


# Latent correlations of the synthetic market per period, in INDICES order.
SYNTHETIC_CORR = {
    "1": np.array([[1.0, 0.6, 0.25], [0.6, 1.0, 0.35], [0.25, 0.35, 1.0]]),
    "2": np.array([[1.0, 0.6, 0.25], [0.6, 1.0, 0.6], [0.25, 0.6, 1.0]]),
}
SYNTHETIC_SKEW = 0.8
SYNTHETIC_GARCH = (0.02, 0.08, 0.9)
SYNTHETIC_START = {"1": "2004-01-01", "2": "2012-01-01"}


def synthetic_market(n: int = 1153, seed: int = 0, skew: float = SYNTHETIC_SKEW) -> dict:
    """Price paths of three indices in two periods with a known tail asymmetry.

    Innovations share the skew normal construction Y = delta |Z0| + sqrt(1 - delta^2) Z
    with one common Z0, which strengthens joint large losses (the upper
    tail of negative returns). Period 2 raises the FTSE-NIKKEI correlation.
    Volatility follows a GARCH(1,1) recursion, so filtering is needed before
    ranks recover the copula.
    """
    if not 0 <= skew < 1:
        raise ParameterError("skew must lie in [0, 1)")
    omega, alpha, beta = SYNTHETIC_GARCH
    mean = skew * math.sqrt(2.0 / math.pi)
    sd = math.sqrt(1.0 - mean * mean)
    out = {}
    for p, corr in SYNTHETIC_CORR.items():
        rng = make_rng(seed, int(p))
        z0 = np.abs(rng.standard_normal(n))
        z = rng.multivariate_normal(np.zeros(3), corr, size=n, method="cholesky")
        eps = (skew * z0[:, None] + math.sqrt(1.0 - skew * skew) * z - mean) / sd
        r = np.empty_like(eps)
        s2 = np.full(3, omega / (1.0 - alpha - beta))
        for t in range(n):
            r[t] = np.sqrt(s2) * eps[t]
            s2 = omega + alpha * r[t] ** 2 + beta * s2
        logp = np.vstack([np.zeros(3), -np.cumsum(r, axis=0) / 100.0]) + math.log(100.0)
        dates = pd.bdate_range(SYNTHETIC_START[p], periods=n + 1).strftime("%Y-%m-%d")
        out[p] = {name: pd.DataFrame({"date": dates, "price": np.exp(logp[:, j])})
                  for j, name in enumerate(INDICES)}
    return out


def synthetic_pseudo_obs(n: int = 1153, seed: int = 0, innovation: str = "skewt") -> dict:
    """GARCH-filtered pseudo-observations of ``synthetic_market`` per period."""
    return {p: filter_prices(frames, innovation)[0] for p, frames in synthetic_market(n, seed).items()}


# ---------------------------------------------------------------------------
# validation studies
# ---------------------------------------------------------------------------

def oracle_tail_quantities(model) -> TailQuantities:
    """Tail order and parameter for the closed-form families.

    FGM and independence are radially symmetric, so their survival copulas
    share the same values.
    """
    if isinstance(model, Survival):
        return oracle_tail_quantities(model.inner)
    if isinstance(model, Independence):
        return TailQuantities(float(model.d), 1.0)
    if isinstance(model, FGM):
        if model.delta == -1.0:
            return TailQuantities(3.0, 2.0)
        return TailQuantities(2.0, 1.0 + model.delta)
    raise ParameterError(f"no closed-form tail quantities for {type(model).__name__}")


@dataclass(frozen=True)
class CoverageResult:
    mode: str
    truth: float
    reps: int
    coverage: float
    rejection: float
    mean_estimate: float
    sd_estimate: float
    mean_se: float
    degenerate: int
    estimates: np.ndarray = field(repr=False)
    ses: np.ndarray = field(repr=False)
    n: int = 0

    def as_row(self) -> dict:
        label = "size" if self.truth == 0 else "power"
        return {"mode": self.mode, "truth": self.truth, "reps": self.reps, "coverage": self.coverage,
                label: self.rejection, "mean_estimate": self.mean_estimate, "sd_estimate": self.sd_estimate,
                "mean_se": self.mean_se, "degenerate": self.degenerate}


def _coverage_rep(rep, model1, model2, n, mode, u, k, v, pairing, cfg, seed, level, form, regime):
    if mode == "finite":
        if pairing == "countermonotone":
            paired = countermonotone_pair(model1, n, seed, rep)
        else:
            paired = independent_pair(model1, model2, n, seed, rep)
        res = finite_test(empirical_cdfs(paired), u, cfg, level)
    else:
        paired = independent_pair(model1, model2, n, seed, rep)
        est = LimitEstimator(paired.u1, paired.u2, form).estimate(k, v, cfg)
        res = limit_test(est, level, regime=regime)
    return res.estimate, res.se, res.ci_low, res.ci_high, res.rejects(level), res.degenerate


def coverage_study(model1, model2, n: int, reps: int = 300, level: float = 0.05, mode: str = "finite",
                   u: float = 0.1, k: int | None = None, v: float | None = None,
                   pairing: str = "independent", cfg: XiConfig | None = None, seed: int = 0,
                   jobs: int = 1, truth: float | None = None, form: str = "squared",
                   regime: str = "case-I") -> CoverageResult:
    """Coverage of the level-``level`` intervals and rejection frequency of H0: xi = 0.

    The oracle value is the closed-form measure at ``u`` (finite mode) or
    the limit value (limit mode) unless ``truth`` is given.
    """
    cfg = cfg or XiConfig()
    if reps < 1:
        raise ParameterError("reps must be positive")
    if mode not in ("finite", "limit"):
        raise ParameterError("mode must be finite or limit")
    if mode == "limit" and (k is None or v is None):
        raise ParameterError("limit mode needs k and v")
    if pairing == "countermonotone" and model2 != Survival(model1):
        raise ParameterError("countermonotone pairing compares a model with its survival copula")
    if truth is None:
        if mode == "finite":
            if not (has_closed_form(model1) and has_closed_form(model2)):
                raise ParameterError("an oracle value needs closed-form models; pass truth explicitly")
            truth = float(xi_threshold(diagonal(model1, u), diagonal(model2, u), u, cfg=cfg))
        else:
            truth = xi_limit(oracle_tail_quantities(model1), oracle_tail_quantities(model2), cfg)
    fn = functools.partial(_coverage_rep, model1=model1, model2=model2, n=n, mode=mode, u=u, k=k, v=v,
                           pairing=pairing, cfg=cfg, seed=seed, level=level, form=form,
                           regime=regime)
    out = np.array(replicate(fn, reps, jobs), dtype=float)
    est, se, lo, hi, rej, deg = out.T
    return CoverageResult(mode, float(truth), reps, float(np.mean((lo <= truth) & (truth <= hi))),
                          float(np.mean(rej)), float(np.mean(est)), float(np.std(est, ddof=1)) if reps > 1 else 0.0,
                          float(np.mean(se)), int(deg.sum()), est, se, n)


def theoretical_H(model1, model2, pairing: str, u: float, v: float) -> float:
    """P(M1 <= u, M2 <= v) for the independent and counter-monotone pairings."""
    f1 = float(diagonal(model1, u))
    f2 = float(diagonal(model2, v))
    if pairing == "independent":
        return f1 * f2
    if pairing != "countermonotone":
        raise ParameterError("pairing must be independent or countermonotone")
    # M2 <= v with U2 = 1 - U1 means every coordinate of U1 lies in [1 - v, u]
    a, b = 1.0 - v, u
    if a >= b:
        return 0.0
    return float(cdf(model1, b, b) - cdf(model1, a, b) - cdf(model1, b, a) + cdf(model1, a, a))


def _moment_rep(rep, model1, model2, n, u, v, pairing, seed):
    if pairing == "countermonotone":
        paired = countermonotone_pair(model1, n, seed, rep)
    else:
        paired = independent_pair(model1, model2, n, seed, rep)
    t = empirical_cdfs(paired)
    return float(t.F1(u)), float(t.F2(u)), float(t.F1(v)), float(t.F2(v))


def moment_check(model1, model2, n: int = 50, u: float = 0.2, v: float = 0.35, reps: int = 2000,
                 pairing: str = "independent", seed: int = 0, jobs: int = 1) -> pd.DataFrame:
    """Replication moments of the modified empirical CDFs against their exact values.

    Checks E F_k(u) = 1/n + F_k(u), Var F_k(u) = F_k(u)(1 - F_k(u))/n,
    Cov(F_k(u), F_k(v)) = (F_k(min(u, v)) - F_k(u) F_k(v))/n and
    Cov(F_1(u), F_2(v)) = (H(u, v) - F_1(u) F_2(v))/n.
    """
    if pairing == "countermonotone":
        model2 = Survival(model1)
    fn = functools.partial(_moment_rep, model1=model1, model2=model2, n=n, u=u, v=v, pairing=pairing, seed=seed)
    x = np.array(replicate(fn, reps, jobs))
    f1u, f2u, f1v, f2v = x.T
    F = {(1, "u"): float(diagonal(model1, u)), (2, "u"): float(diagonal(model2, u)),
         (1, "v"): float(diagonal(model1, v)), (2, "v"): float(diagonal(model2, v))}
    emp = {(1, "u"): f1u, (2, "u"): f2u, (1, "v"): f1v, (2, "v"): f2v}
    lo = "u" if u <= v else "v"
    rows = []

    def mean_row(name, s, target):
        se = np.std(s, ddof=1) / math.sqrt(reps)
        rows.append((name, float(np.mean(s)), target, float(se)))

    def cov_row(name, a, b, target):
        prod = (a - a.mean()) * (b - b.mean())
        rows.append((name, float(prod.sum() / (reps - 1)), target, float(np.std(prod, ddof=1) / math.sqrt(reps))))

    for (l, t), s in emp.items():
        mean_row(f"mean F{l}({t})", s, 1.0 / n + F[(l, t)])
    for (l, t), s in emp.items():
        cov_row(f"var F{l}({t})", s, s, F[(l, t)] * (1.0 - F[(l, t)]) / n)
    for l in (1, 2):
        cov_row(f"cov F{l}(u),F{l}(v)", emp[(l, "u")], emp[(l, "v")],
                (F[(l, lo)] - F[(l, "u")] * F[(l, "v")]) / n)
    cov_row("cov F1(u),F2(v)", f1u, f2v,
            (theoretical_H(model1, model2, pairing, u, v) - F[(1, "u")] * F[(2, "v")]) / n)
    cov_row("cov F1(v),F2(u)", f1v, f2u,
            (theoretical_H(model1, model2, pairing, v, u) - F[(1, "v")] * F[(2, "u")]) / n)
    df = pd.DataFrame(rows, columns=["quantity", "empirical", "theoretical", "se"])
    df["z"] = (df["empirical"] - df["theoretical"]) / df["se"]
    df.insert(0, "pairing", pairing)
    return df

"""Command-line entry point.

Exit codes: 0 success, 2 usage or parameter error, 3 data error,
4 numerical or degeneracy error. Failures also print one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import pandas as pd

from . import __version__
from .auxfun import parse_aux
from .copulas import (PAIRINGS, PairedSample, Survival, countermonotone_pair, independent_pair, load_matrix,
                      load_sample, parse_model, save_sample)
from .errors import DataError, NumericalError, ParameterError, TailEquivError
from .experiments import (EMPIRICAL_CASES, SIMULATION_CASES, ExperimentSpec, Grid, coverage_study,
                          default_jobs, moment_check, run_empirical_case, run_simulation_case,
                          synthetic_pseudo_obs, write_table)
from .finite import EmpiricalTails, finite_sweep
from .garch import INNOVATIONS, filter_prices, read_price_csv
from .limit import VARIANCE_FORMS, LimitEstimator, blocks, limit_test
from .theory import XiConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
FINITE_COLUMNS = ["u", "xi_hat", "se", "ci_lo", "ci_hi", "p_left", "p_right", "p_two", "degenerate"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _report("usage", message)
        raise SystemExit(EXIT_USAGE)


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except empty ones and those the help text already names."""

    def _get_help_string(self, action):
        text = action.help or ""
        if "default" in text or action.default in (None, "", False, argparse.SUPPRESS):
            return text
        return super()._get_help_string(action)


def _report(kind: str, message: str, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def _grid(text: str) -> Grid:
    try:
        return Grid.parse(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _config(args) -> XiConfig:
    h1 = parse_aux(args.h1) if args.h1 else None
    h2 = parse_aux(args.h2) if args.h2 else None
    cfg = XiConfig.with_xstar(args.xstar, args.w, args.d)
    return XiConfig(w=cfg.w, h1=h1 or cfg.h1, h2=h2 or cfg.h2, d=cfg.d)


def _add_measure(p, xstar: float = 1.5):
    p.add_argument("--w", type=float, default=0.5, help="weight of the tail-order-parameter part")
    p.add_argument("--xstar", type=float, default=xstar, help="saturation point x* of the clamp link h2")
    p.add_argument("--d", type=int, default=2, help="copula dimension")
    p.add_argument("--h1", default="", help="link h1 as clamp(s), arctan or normcdf (default clamp(d-1))")
    p.add_argument("--h2", default="", help="link h2 overriding --xstar, same syntax as --h1")
    p.add_argument("--level", type=float, default=0.05, help="test level; intervals have coverage 1 - level")


def _add_inputs(p):
    p.add_argument("--sample", help="paired sample CSV (n x 2d, written by 'sample')")
    p.add_argument("--c1", help="sample CSV attributed to C1 (n x d)")
    p.add_argument("--c2", help="sample CSV attributed to C2 (n x d)")


def _load_pair(args) -> PairedSample:
    if args.sample and (args.c1 or args.c2):
        raise UsageError("give either --sample or --c1/--c2, not both")
    if args.sample:
        return load_sample(args.sample, args.d)
    if not (args.c1 and args.c2):
        raise UsageError("need --sample or both --c1 and --c2")
    a, b = load_matrix(args.c1), load_matrix(args.c2)
    if a.shape[1] != args.d or b.shape[1] != args.d:
        raise DataError(f"expected {args.d} columns in --c1 and --c2")
    if a.shape[0] != b.shape[0]:
        m = min(a.shape[0], b.shape[0])
        a, b = a[:m], b[:m]
    return PairedSample(a, b, "independent")


def _emit(df: pd.DataFrame, out, header=()):
    if out:
        write_table(df, out, header)
    else:
        df.to_csv(sys.stdout, index=False, float_format="%.10g", lineterminator="\n")


# --- subcommands -----------------------------------------------------------

def cmd_sample(args):
    model = parse_model(args.model)
    if args.pairing == "countermonotone":
        if args.model2:
            raise UsageError("countermonotone pairing takes a single --model")
        paired = countermonotone_pair(model, args.n, args.seed)
    else:
        model2 = parse_model(args.model2) if args.model2 else model
        paired = independent_pair(model, model2, args.n, args.seed)
    save_sample(paired, args.out)


def cmd_filter(args):
    frames = {}
    for item in args.prices:
        name, _, path = item.rpartition("=")
        name = name or Path(path).stem
        if name in frames:
            raise UsageError(f"duplicate series name {name!r}")
        frames[name] = read_price_csv(path)
    pobs, fits = filter_prices(frames, args.innovation, args.mean, args.jobs)
    _emit(pobs, args.out)
    for name, fit in fits.items():
        if not fit.converged:
            _report("warning", f"GARCH fit for {name} did not meet the tolerance", series=name)


def cmd_estimate_finite(args):
    paired = _load_pair(args)
    cfg = _config(args)
    tails = EmpiricalTails(paired.m1, paired.m2)
    u = args.u_grid.values()
    rows = [{"u": float(ui), **r.as_row()} for ui, r in zip(u, finite_sweep(tails, u, cfg, args.level))]
    _emit(pd.DataFrame(rows, columns=FINITE_COLUMNS), args.out)


def cmd_estimate_limit(args):
    paired = _load_pair(args)
    split = args.split or ("none" if paired.pairing == "independent" else "halves")
    x1, x2 = blocks(paired, split)
    est = LimitEstimator(x1, x2, args.form).estimate(args.k, args.v, _config(args))
    regime = "case-II" if args.case2_se else "case-I"
    res = limit_test(est, args.level, regime=regime, tau=args.tau)
    row = {**est.as_row(), **res.as_row(), "regime": regime, "split": split}
    _emit(pd.DataFrame([row]), args.out)


def _spec(args, scenario):
    overrides = {"seed": args.seed, "n": args.n, "reps": args.reps, "jobs": args.jobs,
                 "xstar": args.xstar, "w": args.w}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.spec:
        return ExperimentSpec.from_file(args.spec, scenario=scenario, **overrides)
    return ExperimentSpec.defaults(scenario, **overrides)


def cmd_simulate(args):
    cases = sorted(SIMULATION_CASES) if args.case == "all" else [args.case]
    spec = _spec(args, "simulation")
    for case in cases:
        run_simulation_case(case, spec).write(args.out_dir, plots=not args.no_plots)


def _read_pobs(path) -> pd.DataFrame:
    if not Path(path).exists():
        raise DataError(f"no such file: {path}")
    try:
        return pd.read_csv(path, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc


def cmd_empirical(args):
    spec = _spec(args, "empirical")
    if args.synthetic:
        data = synthetic_pseudo_obs(n=args.n or 1153, seed=spec.seed, innovation=spec.innovation)
    else:
        if not (args.period1 or args.period2):
            raise UsageError("need --period1/--period2 pseudo-observation files or --synthetic")
        data = {p: _read_pobs(f) for p, f in (("1", args.period1), ("2", args.period2)) if f}
    cases = sorted(EMPIRICAL_CASES) if args.case == "all" else [args.case]
    for case in cases:
        run_empirical_case(case, data, spec).write(args.out_dir, plots=not args.no_plots)


def cmd_coverage(args):
    m1 = parse_model(args.model1)
    m2 = Survival(m1) if args.pairing == "countermonotone" else parse_model(args.model2 or args.model1)
    res = coverage_study(m1, m2, args.n, args.reps, args.level, args.mode, args.u, args.k, args.v,
                         args.pairing, _config(args), args.seed, args.jobs, args.truth, args.form,
                         args.regime)
    _emit(pd.DataFrame([{"model1": args.model1, "model2": str(m2), "n": args.n, **res.as_row()}]), args.out)


def cmd_moment_check(args):
    m1 = parse_model(args.model1)
    m2 = parse_model(args.model2 or args.model1)
    df = moment_check(m1, m2, args.n, args.u, args.v, args.reps, args.pairing, args.seed, args.jobs)
    _emit(df, args.out)


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = _Formatter
    parser = _Parser(prog="tailequiv", description="Measure and test tail equivalence of copulas.",
                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="draw a paired copula sample", formatter_class=fmt)
    p.add_argument("--model", required=True,
                   help="independence[:d], fgm:delta, skewnormal:rho,d1,d2, skewt:rho,d1,d2,nu or survival:<model>")
    p.add_argument("--model2", default="", help="model for C2 under independent pairing (default --model)")
    p.add_argument("--pairing", choices=[x for x in PAIRINGS if x != "split"], default="independent",
                   help="independent draws or U2 = 1 - U1")
    p.add_argument("--n", type=_positive_int, default=40000, help="rows")
    p.add_argument("--seed", type=int, default=1, help="generator seed")
    p.add_argument("--out", required=True, help="output CSV; a .json sidecar is written next to it")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("filter", help="GARCH-filter price series into pseudo-observations", formatter_class=fmt)
    p.add_argument("prices", nargs="+", help="date,price CSV per index, optionally NAME=path")
    p.add_argument("--innovation", choices=INNOVATIONS, default="skewt", help="innovation family")
    p.add_argument("--mean", choices=("zero", "constant"), default="zero", help="conditional mean")
    p.add_argument("--jobs", type=_positive_int, default=default_jobs(), help="parallel fits")
    p.add_argument("--out", default="", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("estimate-finite", help="finite-threshold estimates and tests over a u-grid",
                       formatter_class=fmt)
    _add_inputs(p)
    p.add_argument("--u-grid", type=_grid, default=Grid(0.0025, 0.25, 100), help="thresholds lo:hi:steps")
    _add_measure(p)
    p.add_argument("--out", default="", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_estimate_finite)

    p = sub.add_parser("estimate-limit", help="limit estimate and test", formatter_class=fmt)
    _add_inputs(p)
    p.add_argument("--k", type=_positive_int, default=1000, help="Hill order statistics")
    p.add_argument("--v", type=float, default=0.025, help="threshold v_n for the tail-order-parameter part")
    p.add_argument("--split", choices=("halves", "interleave", "none"), default=None,
                   help="row split into independent blocks (default none for independent samples, halves otherwise)")
    se = p.add_mutually_exclusive_group()
    se.add_argument("--case1-se", action="store_true", help="standard error for unequal tail orders (the default)")
    se.add_argument("--case2-se", action="store_true", help="standard error for equal tail orders")
    p.add_argument("--tau", type=float, default=1.0, help="m_n / (n v_n^kappa) used by --case2-se")
    p.add_argument("--form", choices=VARIANCE_FORMS, default="squared", help="Hill variance plug-in")
    _add_measure(p)
    p.add_argument("--out", default="", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_estimate_limit)

    for name, cases, xstar, helptext in (
            ("simulate", sorted(SIMULATION_CASES), 1.5, "simulation study tables and plots"),
            ("empirical", sorted(EMPIRICAL_CASES), 0.5, "market study tables and plots")):
        p = sub.add_parser(name, help=helptext, formatter_class=fmt)
        p.add_argument("--case", choices=[*cases, "all"], default="all", help="case to run")
        p.add_argument("--spec", default="", help="key=value spec file")
        p.add_argument("--out-dir", default="results", help="directory for CSV and SVG output")
        p.add_argument("--seed", type=int, default=None, help="override the spec seed (spec default 1)")
        p.add_argument("--n", type=_positive_int, default=None,
                       help="override the sample size" + (" of the synthetic fixture" if name == "empirical" else ""))
        p.add_argument("--reps", type=_positive_int, default=None, help="override replications (spec default 1)")
        p.add_argument("--w", type=float, default=None, help="override w (spec default 0.5)")
        p.add_argument("--xstar", type=float, default=None, help=f"override x* (spec default {xstar})")
        p.add_argument("--jobs", type=_positive_int, default=default_jobs(), help="worker processes")
        p.add_argument("--no-plots", action="store_true", help="skip SVG output")
        if name == "empirical":
            p.add_argument("--period1", default="", help="pseudo-observations of period 1 (output of filter)")
            p.add_argument("--period2", default="", help="pseudo-observations of period 2")
            p.add_argument("--synthetic", action="store_true", help="use the built-in synthetic market")
            p.set_defaults(func=cmd_empirical)
        else:
            p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coverage", help="coverage and rejection rates over replications", formatter_class=fmt)
    p.add_argument("--model1", default="fgm:0.5", help="C1 model")
    p.add_argument("--model2", default="", help="C2 model (default C1)")
    p.add_argument("--pairing", choices=("independent", "countermonotone"), default="independent",
                   help="pairing of the finite-threshold samples")
    p.add_argument("--mode", choices=("finite", "limit"), default="finite", help="which test")
    p.add_argument("--n", type=_positive_int, default=10000, help="rows per replication")
    p.add_argument("--reps", type=_positive_int, default=300, help="replications")
    p.add_argument("--u", type=float, default=0.1, help="finite threshold")
    p.add_argument("--k", type=_positive_int, default=None, help="Hill order statistics (limit mode)")
    p.add_argument("--v", type=float, default=None, help="threshold v_n (limit mode)")
    p.add_argument("--truth", type=float, default=None, help="oracle value (default closed form)")
    p.add_argument("--form", choices=VARIANCE_FORMS, default="squared", help="Hill variance plug-in")
    p.add_argument("--regime", choices=("case-I", "case-II"), default="case-I",
                   help="limit-mode standard error: unequal tail orders (case-I) or equal ones (case-II)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--jobs", type=_positive_int, default=default_jobs(), help="worker processes")
    _add_measure(p)
    p.add_argument("--out", default="", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("moment-check", help="replication moments of the empirical CDFs", formatter_class=fmt)
    p.add_argument("--model1", default="fgm:0.5", help="C1 model")
    p.add_argument("--model2", default="", help="C2 model for independent pairing (default C1)")
    p.add_argument("--pairing", choices=("independent", "countermonotone"), default="independent",
                   help="pairing of the two samples")
    p.add_argument("--n", type=_positive_int, default=50, help="rows per replication")
    p.add_argument("--u", type=float, default=0.2, help="first threshold")
    p.add_argument("--v", type=float, default=0.35, help="second threshold")
    p.add_argument("--reps", type=_positive_int, default=2000, help="replications")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    p.add_argument("--out", default="", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_moment_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (UsageError, ParameterError) as exc:
        _report("usage", str(exc))
        return EXIT_USAGE
    except DataError as exc:
        _report("data", str(exc))
        return EXIT_DATA
    except NumericalError as exc:
        _report("numerical", str(exc), diagnostics=_jsonable(exc.diagnostics))
        return EXIT_NUMERIC
    except TailEquivError as exc:
        _report("error", str(exc))
        return 1
    return EXIT_OK


def _jsonable(obj):
    try:
        json.dumps(obj)
        return obj
    except TypeError:
        return repr(obj)


if __name__ == "__main__":
    sys.exit(main())

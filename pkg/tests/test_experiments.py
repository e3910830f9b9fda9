import dataclasses
import math
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from tailequiv.copulas import (FGM, Independence, SkewNormal, Survival, countermonotone_pair, diagonal,
                              independent_pair)
from tailequiv.errors import DataError, ParameterError
from tailequiv.experiments import (EMPIRICAL_CASES, ExperimentSpec, Grid, coverage_study, empirical_sample,
                                   moment_check, oracle_tail_quantities, reference_diagonals, replicate,
                                   run_empirical_case, run_simulation_case, simulation_models,
                                   synthetic_market, synthetic_pseudo_obs, theoretical_H, write_table)
from tailequiv.svgplot import line_chart
from tailequiv.theory import TailQuantities

SMALL = """
# a quick simulation
n = 4000
seed = 3
u_grid = 0.02:0.2:7
k_grid = 50:300:4
v_fixed = 0.05
v_grid = 0.03:0.2:5
k_fixed = 100
xstar_grid = 1:2:3
xstar_v_grid = 0.05:0.15:3
"""


def _square(x):
    return x * x


@pytest.fixture(scope="module")
def small_spec():
    return ExperimentSpec.from_text(SMALL)


@pytest.fixture(scope="module")
def market():
    return synthetic_pseudo_obs(seed=0)


# ---------------------------------------------------------------- specs


def test_grid_parse_and_values():
    g = Grid.parse("0.1:0.5:5")
    assert np.allclose(g.values(), [0.1, 0.2, 0.3, 0.4, 0.5])
    assert str(g) == "0.1:0.5:5"
    assert Grid.parse("0.3").values().tolist() == [0.3]
    assert Grid.parse("400:4000:19").integers().tolist()[:3] == [400, 600, 800]
    for bad in ("a:b:c", "0.5:0.1:3", "0.1:0.2:0", "1:2"):
        with pytest.raises(ParameterError):
            Grid.parse(bad)


def test_spec_from_text(small_spec):
    assert small_spec.n == 4000 and small_spec.seed == 3
    assert small_spec.u_grid == Grid(0.02, 0.2, 7)
    assert small_spec.w == 0.5  # untouched keys keep their defaults
    with pytest.raises(ParameterError, match="unknown"):
        ExperimentSpec.from_text("colour = red")
    with pytest.raises(ParameterError):
        ExperimentSpec.from_text("n = many")
    with pytest.raises(ParameterError):
        ExperimentSpec.from_text("just words")
    with pytest.raises(ParameterError):
        ExperimentSpec.from_text("u_grid = 0.1:1.5:4")


def test_spec_overrides_and_file(tmp_path):
    path = tmp_path / "spec.txt"
    path.write_text(SMALL)
    spec = ExperimentSpec.from_file(path, seed="9", n=None)
    assert spec.seed == 9 and spec.n == 4000
    with pytest.raises(DataError):
        ExperimentSpec.from_file(tmp_path / "missing.txt")


def test_empirical_defaults():
    spec = ExperimentSpec.defaults("empirical")
    assert (spec.n, spec.xstar, spec.k_fixed, spec.v_fixed) == (1153, 0.5, 100, 0.1)
    assert spec.k_grid == Grid(50, 500, 10)
    with pytest.raises(ParameterError):
        ExperimentSpec(scenario="other")


def test_echo_leaves_out_jobs(small_spec):
    lines = ExperimentSpec(jobs=3).echo()
    assert not any(line.startswith("jobs=") for line in lines)
    assert "seed=3" in small_spec.echo()


def test_config_xstar_override(small_spec):
    assert small_spec.config().h2(3.0) == 1.0
    assert small_spec.config(xstar=2.0).h2(1.0) == pytest.approx(0.5)


# ---------------------------------------------------------------- replication


def test_replicate_keeps_order():
    assert replicate(_square, 7, jobs=2) == [r * r for r in range(7)]
    assert replicate(_square, 3) == [0, 1, 4]


# ---------------------------------------------------------------- simulation driver


def test_simulation_models():
    c1, c2 = simulation_models("i")
    assert c1 == c2
    c1, c2 = simulation_models("ii")
    assert c2 == Survival(c1)
    with pytest.raises(ParameterError):
        simulation_models("iv")


def test_simulation_tables_follow_grids(small_spec):
    res = run_simulation_case("iii", small_spec)
    t = res.tables
    assert set(t) == {f"sim_iii_{k}" for k in ("finite", "limit_k", "limit_v", "xstar")}
    assert len(t["sim_iii_finite"]) == 7
    assert t["sim_iii_limit_k"]["k"].tolist() == [50, 133, 217, 300]
    assert len(t["sim_iii_limit_v"]) == 5
    assert len(t["sim_iii_xstar"]) == 9
    assert t["sim_iii_finite"]["xi_hat"].between(-1, 1).all()


def test_case_one_reference_is_zero(small_spec):
    df = run_simulation_case("i", small_spec).tables["sim_i_finite"]
    assert (df["xi_ref"] == 0.0).all()


def test_outputs_are_byte_identical(small_spec, tmp_path):
    a = run_simulation_case("ii", small_spec).write(tmp_path / "a")
    b = run_simulation_case("ii", small_spec).write(tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    head = a[0].read_text().splitlines()
    assert head[0].startswith("# tailequiv") and "# seed=3" in head


def test_workers_do_not_change_results(small_spec):
    serial = run_simulation_case("i", dataclasses.replace(small_spec, reps=3, jobs=1)).tables
    pooled = run_simulation_case("i", dataclasses.replace(small_spec, reps=3, jobs=2)).tables
    for name in serial:
        pd.testing.assert_frame_equal(serial[name], pooled[name])
    assert sorted(serial["sim_i_finite"]["rep"].unique()) == [0, 1, 2]


def test_svg_twins_are_well_formed(small_spec, tmp_path):
    written = run_simulation_case("ii", small_spec).write(tmp_path)
    svgs = [p for p in written if p.suffix == ".svg"]
    assert len(svgs) == 4
    for p in svgs:
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")
        assert root.findall(".//{http://www.w3.org/2000/svg}polyline")
    assert not [p for p in run_simulation_case("ii", small_spec).write(tmp_path / "np", plots=False)
                if p.suffix == ".svg"]


def test_line_chart_handles_gaps_and_flat_series():
    svg = line_chart([0, 1, 2, 3], {"a": [0.1, math.nan, 0.2, 0.3], "b": [0.5] * 4},
                     band=([0, 0, 0, 0], [1, 1, 1, 1]), hlines=(0.0,), title="t <1>")
    root = ET.fromstring(svg)
    assert len(root.findall(".//{http://www.w3.org/2000/svg}polyline")) == 3
    ET.fromstring(line_chart([1], {"a": [0.0]}))


def test_write_table_header(tmp_path):
    p = write_table(pd.DataFrame({"x": [1.0 / 3]}), tmp_path / "t.csv", ["one", "two"])
    assert p.read_text() == "# one\n# two\nx\n0.3333333333\n"


def test_reference_diagonals_match_closed_form():
    u = (0.1, 0.3)
    lower, upper = reference_diagonals(FGM(0.5), u, 400_000, 0)
    exact = diagonal(FGM(0.5), np.array(u))
    assert np.allclose(lower, exact, atol=3e-3)
    assert np.allclose(upper, exact, atol=3e-3)  # FGM is radially symmetric


# ---------------------------------------------------------------- market driver


def test_synthetic_market_shape():
    m = synthetic_market(n=50, seed=1)
    assert set(m) == {"1", "2"}
    for frames in m.values():
        assert set(frames) == {"SP500", "FTSE", "NIKKEI"}
        for df in frames.values():
            assert len(df) == 51 and (df["price"] > 0).all()
    assert synthetic_market(n=50, seed=1)["1"]["FTSE"].equals(m["1"]["FTSE"])


def test_synthetic_market_has_known_tail_sign(market):
    spec = ExperimentSpec.defaults("empirical")
    res = run_empirical_case("i", market, spec)
    finite = res.tables["emp_i_finite"]
    assert len(finite) == 36
    assert np.median(finite["xi_hat"]) > 0
    assert np.median(res.tables["emp_i_limit_k"]["xi_hat"]) > 0
    assert (finite["split"] == "halves").all()


def test_period_case_keeps_all_rows(market):
    paired, split = empirical_sample("v", market)
    assert split == "none"
    assert paired.n == min(len(market["1"]), len(market["2"]))
    res = run_empirical_case("v", market)
    assert (res.tables["emp_v_limit_k"]["split"] == "none").all()


def test_empirical_errors(market):
    with pytest.raises(ParameterError):
        empirical_sample("vi", market)
    with pytest.raises(DataError):
        empirical_sample("ii", {"1": market["1"]})
    with pytest.raises(DataError):
        empirical_sample("i", {"1": market["1"].drop(columns="FTSE")})
    assert set(EMPIRICAL_CASES) == {"i", "ii", "iii", "iv", "v"}


# ---------------------------------------------------------------- validation studies


def test_oracle_tail_quantities():
    assert oracle_tail_quantities(Independence(3)) == TailQuantities(3.0, 1.0)
    assert oracle_tail_quantities(FGM(0.4)) == TailQuantities(2.0, 1.4)
    assert oracle_tail_quantities(FGM(-1.0)) == TailQuantities(3.0, 2.0)
    assert oracle_tail_quantities(Survival(FGM(0.4))) == TailQuantities(2.0, 1.4)
    with pytest.raises(ParameterError):
        oracle_tail_quantities(SkewNormal(0.5, 1.0, 1.0))


@pytest.mark.parametrize("pairing", ["independent", "countermonotone"])
def test_theoretical_H_matches_simulation(pairing):
    model = FGM(0.5)
    n, u, v = 200_000, 0.5, 0.7
    if pairing == "independent":
        p = independent_pair(model, FGM(-0.5), n, 1)
        exact = theoretical_H(model, FGM(-0.5), pairing, u, v)
    else:
        p = countermonotone_pair(model, n, 1)
        exact = theoretical_H(model, Survival(model), pairing, u, v)
    mc = np.mean((p.m1 <= u) & (p.m2 <= v))
    assert mc == pytest.approx(exact, abs=4 * math.sqrt(exact * (1 - exact) / n) + 1e-12)
    assert theoretical_H(model, Survival(model), "countermonotone", 0.2, 0.3) == 0.0
    with pytest.raises(ParameterError):
        theoretical_H(model, model, "other", u, v)


def test_moment_check_layout():
    df = moment_check(FGM(0.5), FGM(0.5), reps=400, seed=2)
    assert len(df) == 12
    assert list(df.columns) == ["pairing", "quantity", "empirical", "theoretical", "se", "z"]
    assert (df["z"].abs() < 4).all()


def test_coverage_study_finite_mode():
    r = coverage_study(FGM(0.0), FGM(1.0), 5000, reps=200, u=0.1, seed=4)
    assert r.truth > 0
    assert 0.90 <= r.coverage <= 0.99
    assert r.as_row()["power"] == r.rejection
    assert len(r.estimates) == len(r.ses) == 200
    null = coverage_study(FGM(0.5), FGM(0.5), 2000, reps=20, u=0.1, seed=4)
    assert "size" in null.as_row()


def test_coverage_study_errors():
    with pytest.raises(ParameterError):
        coverage_study(FGM(0.1), FGM(0.1), 100, reps=0)
    with pytest.raises(ParameterError):
        coverage_study(FGM(0.1), FGM(0.1), 100, mode="limit")
    with pytest.raises(ParameterError):
        coverage_study(FGM(0.1), FGM(0.2), 100, pairing="countermonotone")
    with pytest.raises(ParameterError):
        coverage_study(SkewNormal(0.5, 1, 1), SkewNormal(0.5, 1, 1), 100)

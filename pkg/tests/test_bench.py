import csv
import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest

from finitemc.bench import (
    ExperimentPlan,
    RateFit,
    fit_rate,
    parse_plan,
    relative_error_table,
    run_plan,
)
from finitemc.errors import ConfigError, InputDomainError
from finitemc.measures import (
    DiscreteDistribution,
    PerformanceFunctional,
    discrete_distribution,
    point_mass,
)


# ---------------------------------------------------------------------------
# plan validation and parsing
# ---------------------------------------------------------------------------


def test_plan_defaults():
    plan = ExperimentPlan(model="a")
    assert plan.methods == ("finite", "mcmc", "fluid")
    assert plan.ladder == (3, 4, 5, 6, 7, 8, 9)
    assert plan.residue_grid == 100_000
    assert plan.cert_max_r == 7
    assert plan.seeds == (1,)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(model="a", methods=()),
        dict(model="a", methods=("finite", "simplex")),
        dict(model="a", methods=("finite", "finite")),
        dict(model="a", ladder=()),
        dict(model="a", ladder=(5, 3)),
        dict(model="a", ladder=(3, 3, 4)),
        dict(model="a", residue_grid=999),
        dict(model="a", methods=("mcmc",), seeds=()),
    ],
)
def test_plan_rejects_bad_fields(kwargs):
    with pytest.raises(InputDomainError):
        ExperimentPlan(**kwargs)


def test_plan_hash_ignores_output_location():
    one = ExperimentPlan(model="a", out="x")
    two = ExperimentPlan(model="a", out="y")
    assert one.config_hash() == two.config_hash()
    assert one.config_hash() != ExperimentPlan(model="b").config_hash()


def test_parse_plan_round_trip(tmp_path):
    path = tmp_path / "plan.txt"
    path.write_text(
        "# comment line\n"
        "model = b\n"
        "methods = finite, fluid\n"
        "ladder = 3, 4, 5, 6\n"
        "residue_grid = 2000\n"
        "cert_max_r = 4\n"
        "seeds = 7, 8\n"
        "burn_in = 500\n"
        "thinning = 10\n"
        "out = somewhere\n"
    )
    plan = parse_plan(path)
    assert plan == ExperimentPlan(
        model="b",
        methods=("finite", "fluid"),
        ladder=(3, 4, 5, 6),
        residue_grid=2000,
        cert_max_r=4,
        seeds=(7, 8),
        burn_in=500,
        thinning=10,
        out="somewhere",
    )


def test_parse_plan_defaults_when_omitted(tmp_path):
    path = tmp_path / "plan.txt"
    path.write_text("model = a\n")
    assert parse_plan(path) == ExperimentPlan(model="a")


@pytest.mark.parametrize(
    "body",
    [
        "ladder = 3,4\n",  # missing model
        "model = a\nmodel = b\n",
        "model = a\nwidget = 3\n",
        "model = a\nladder = 3;4\n",
        "model = a\nresidue_grid = big\n",
        "model = a\nmethods = finite, simplex\n",
        "model = a\njust a line\n",
    ],
)
def test_parse_plan_rejects_malformed(tmp_path, body):
    path = tmp_path / "plan.txt"
    path.write_text(body)
    with pytest.raises(ConfigError):
        parse_plan(path)


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------


def test_fit_rate_exact_inverse_n():
    points = [(r, 1.0 / (2.0**r + 1.0)) for r in range(3, 9)]
    fit = fit_rate(points, method="finite")
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert fit.method == "finite"
    assert fit.r_range == (3, 8)


def test_fit_rate_exact_inverse_sqrt_n():
    points = [(r, 1.0 / math.sqrt(2.0**r + 1.0)) for r in range(3, 9)]
    assert fit_rate(points).slope == pytest.approx(-0.5, abs=1e-12)


def test_fit_rate_intercept_recovers_constant():
    points = [(r, 7.5 / (2.0**r + 1.0)) for r in range(3, 7)]
    fit = fit_rate(points)
    assert math.exp(fit.intercept) == pytest.approx(7.5, rel=1e-10)


def test_fit_rate_needs_four_positive_points():
    with pytest.raises(InputDomainError):
        fit_rate([(3, 0.1), (4, 0.05), (5, 0.02)])
    with pytest.raises(InputDomainError):
        fit_rate([(3, 0.1), (4, 0.05), (5, 0.0), (6, 0.01)])


# ---------------------------------------------------------------------------
# relative errors
# ---------------------------------------------------------------------------


def _identity_functional():
    return PerformanceFunctional(
        name="mean",
        evaluator=lambda x: np.asarray(x, dtype=float),
        total_variation=1.0,
        continuous=True,
    )


def test_relative_error_reference_against_itself_is_zero():
    ref = discrete_distribution([0.2, 0.6], [0.5, 0.5])
    rows = relative_error_table(ref, {"finite": ref}, [_identity_functional()])
    assert len(rows) == 1
    assert rows[0].error == 0.0
    assert rows[0].error_kind == "relative"


def test_relative_error_hand_value():
    ref = discrete_distribution([0.2, 0.6], [0.5, 0.5])  # mean 0.4
    other = point_mass(0.5)  # mean 0.5
    rows = relative_error_table(ref, {"fluid": other}, [_identity_functional()])
    assert rows[0].error == pytest.approx(0.25)
    assert rows[0].value == pytest.approx(0.5)
    assert rows[0].reference == pytest.approx(0.4)


def test_relative_error_zero_reference_flags_absolute():
    ref = point_mass(0.0)  # mean 0 under the identity functional
    other = point_mass(0.25)
    rows = relative_error_table(ref, {"mcmc": other}, [_identity_functional()])
    assert rows[0].error_kind == "absolute"
    assert rows[0].error == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# full plan execution
# ---------------------------------------------------------------------------


_PLAN = ExperimentPlan(
    model="a",
    methods=("finite", "mcmc", "fluid"),
    ladder=(3, 4, 5, 6),
    residue_grid=2000,
    cert_max_r=4,
    seeds=(1, 2),
    burn_in=2000,
    thinning=10,
)


@pytest.fixture(scope="module")
def plan_runs(tmp_path_factory):
    first = dataclasses.replace(_PLAN, out=str(tmp_path_factory.mktemp("run") / "one"))
    second = dataclasses.replace(_PLAN, out=str(tmp_path_factory.mktemp("run") / "two"))
    return run_plan(first), run_plan(second)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_plan_writes_expected_artifacts(plan_runs):
    out, _ = plan_runs
    expected = {
        "residues.csv",
        "certificates.csv",
        "measure_bounds.csv",
        "rates.csv",
        "residue_summary.csv",
        "measure_summary.csv",
        "index.csv",
        "timing.csv",
        "run_metadata.txt",
    }
    assert expected <= {p.name for p in out.iterdir()}
    proxies = {p.name for p in (out / "proxies").iterdir()}
    assert {"finite_r3.csv", "finite_r6.csv", "fluid.csv"} <= proxies
    assert {"mcmc_r3_seed1.csv", "mcmc_r6_seed2.csv"} <= proxies
    assert len(proxies) == 4 + 4 * 2 + 1


def test_run_plan_residue_rows(plan_runs):
    out, _ = plan_runs
    rows = _read(out / "residues.csv")
    assert rows[0] == ["method", "r", "seed", "l_inf", "l_1", "status"]
    body = rows[1:]
    assert len(body) == 4 + 8 + 1
    assert all(row[5] == "ok" for row in body)
    finite = {int(row[1]): float(row[3]) for row in body if row[0] == "finite"}
    # residues halve with each extra level
    for r in (3, 4, 5):
        assert finite[r] / finite[r + 1] == pytest.approx(2.0, rel=0.12)
    fluid_rows = [row for row in body if row[0] == "fluid"]
    assert len(fluid_rows) == 1 and fluid_rows[0][1] == "" and fluid_rows[0][2] == ""


def test_run_plan_certificates_respect_cap(plan_runs):
    out, _ = plan_runs
    rows = _read(out / "certificates.csv")
    assert rows[0] == ["r", "e1", "e2", "dist_bound", "argmin_k"]
    assert [int(row[0]) for row in rows[1:]] == [3, 4]
    for row in rows[1:]:
        assert float(row[3]) == pytest.approx(float(row[1]) * float(row[2]), rel=1e-12)


def test_run_plan_measure_bounds_schema(plan_runs):
    out, _ = plan_runs
    rows = _read(out / "measure_bounds.csv")
    assert rows[0] == ["r", "functional", "value", "half_width", "a"]
    body = rows[1:]
    assert len(body) == 2 * 3
    assert [row[1] for row in body[:3]] == ["no_wait", "abandonment", "queue_length"]
    assert {row[4] for row in body} == {"1", "2"}


def test_run_plan_rates(plan_runs):
    out, _ = plan_runs
    rows = _read(out / "rates.csv")
    assert rows[0] == ["method", "slope", "intercept", "r_min", "r_max"]
    slopes = {row[0]: float(row[1]) for row in rows[1:]}
    assert set(slopes) == {"finite", "mcmc"}
    assert slopes["finite"] < -0.7
    assert slopes["mcmc"] < 0.0


def test_run_plan_residue_summary(plan_runs):
    out, _ = plan_runs
    rows = _read(out / "residue_summary.csv")
    assert rows[0] == ["r", "finite_l_inf", "mcmc_l_inf"]
    assert [int(row[0]) for row in rows[1:]] == [3, 4, 5, 6]
    assert all(row[1] and row[2] for row in rows[1:])


def test_run_plan_measure_summary(plan_runs):
    out, _ = plan_runs
    rows = _read(out / "measure_summary.csv")
    assert rows[0] == [
        "method", "l_inf", "l_1", "functional", "value", "reference", "error", "error_kind",
    ]
    body = rows[1:]
    assert len(body) == 3 * 3
    finite_rows = [row for row in body if row[0] == "finite"]
    assert all(float(row[6]) == 0.0 for row in finite_rows)
    # fluid concentrates away from 0, so its no-wait mass is off by 100%
    fluid_no_wait = next(r for r in body if r[0] == "fluid" and r[3] == "no_wait")
    assert float(fluid_no_wait[6]) == 1.0
    assert fluid_no_wait[7] == "relative"


def test_run_plan_index_lists_artifacts(plan_runs):
    out, _ = plan_runs
    rows = _read(out / "index.csv")
    assert rows[0] == ["artifact", "config_hash", "seed", "code_version"]
    listed = {row[0] for row in rows[1:]}
    assert "residues.csv" in listed
    assert "proxies/finite_r3.csv" in listed
    hashes = {row[1] for row in rows[1:]}
    assert hashes == {_PLAN.config_hash()}
    seeds = {row[2] for row in rows[1:] if row[0].startswith("proxies/mcmc")}
    assert seeds == {"1", "2"}


def test_run_plan_reruns_are_byte_identical(plan_runs):
    first, second = plan_runs
    volatile = {"timing.csv", "run_metadata.txt"}
    names = sorted(
        str(p.relative_to(first)) for p in first.rglob("*") if p.is_file()
    )
    assert names == sorted(str(p.relative_to(second)) for p in second.rglob("*") if p.is_file())
    for name in names:
        if Path(name).name in volatile:
            continue
        assert (first / name).read_bytes() == (second / name).read_bytes(), name



def test_run_plan_failed_cell_keeps_going(tmp_path):
    # underloaded model: the fluid limit does not exist but the finite
    # method still runs, so the plan finishes with one error row
    config = tmp_path / "under.txt"
    config.write_text("lambda = 3.9\nmu = 4.0\n")
    plan = ExperimentPlan(
        model=str(config),
        methods=("finite", "fluid"),
        ladder=(3,),
        residue_grid=1000,
        cert_max_r=0,
        out=str(tmp_path / "out"),
    )
    out = run_plan(plan)
    rows = _read(out / "residues.csv")
    by_method = {row[0]: row for row in rows[1:]}
    assert by_method["finite"][5] == "ok"
    assert by_method["fluid"][5] == "error:RegimeError"
    assert by_method["fluid"][3] == ""
    summary = _read(out / "measure_summary.csv")
    assert {row[0] for row in summary[1:]} == {"finite"}

"""Experiment harness: run every method over a resolution ladder.

A plan names the model, the methods to run (finite / mcmc / fluid), the
ladder of resolutions r (the finite chain has 2^r + 1 states and the
simulation collects 2^r + 1 samples), the residue evaluation grid, and
the seeds for the simulation cells. ``run_plan`` executes every cell,
writes one CSV per artifact into the output directory, and aggregates
summary tables: per-cell balance residues, error certificates with
per-functional bounds, fitted convergence rates, and relative errors of
the performance measures against the finite reference at the ladder top.

Everything except ``timing.csv`` and ``run_metadata.txt`` is a pure
function of the plan, so re-running a plan reproduces those artifacts
byte for byte; wall-clock data is quarantined in the two named files.
"""

from __future__ import annotations

import csv
import hashlib
import math
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .certificates import ErrorCertificate, MeasureBound, bound_measure, certify, write_certificates_csv
from .errors import ConfigError, FiniteMcError, InputDomainError
from .kernels import balance_residue, dyadic_grid, truncate_kernel
from .mcmc import McmcConfig, run_mcmc
from .measures import DiscreteDistribution, PerformanceFunctional, expectation
from .queueing import (
    QueueModel,
    fluid_approximation,
    functionals,
    load_queue_config,
    model_a,
    model_b,
    vwt_kernel,
)
from .stationary import stationary_direct

__all__ = [
    "ExperimentPlan",
    "RateFit",
    "RelativeError",
    "parse_plan",
    "run_plan",
    "fit_rate",
    "relative_error_table",
]

_METHODS = ("finite", "mcmc", "fluid")

_PLAN_KEYS = (
    "model",
    "methods",
    "ladder",
    "residue_grid",
    "cert_max_r",
    "seeds",
    "burn_in",
    "thinning",
    "out",
)


@dataclass(frozen=True)
class ExperimentPlan:
    """Validated description of one benchmark run."""

    model: str
    methods: tuple[str, ...] = _METHODS
    ladder: tuple[int, ...] = (3, 4, 5, 6, 7, 8, 9)
    residue_grid: int = 100_000
    cert_max_r: int = 7
    seeds: tuple[int, ...] = (1,)
    burn_in: int = 100_000
    thinning: int = 100
    out: str = "bench_out"

    def __post_init__(self) -> None:
        if not self.methods:
            raise InputDomainError("method set must not be empty")
        for method in self.methods:
            if method not in _METHODS:
                raise InputDomainError(f"unknown method {method!r}")
        if len(set(self.methods)) != len(self.methods):
            raise InputDomainError("duplicate method")
        if not self.ladder:
            raise InputDomainError("ladder must not be empty")
        if list(self.ladder) != sorted(set(self.ladder)):
            raise InputDomainError("ladder must be strictly ascending")
        if self.residue_grid < 1000:
            raise InputDomainError("residue grid must have at least 1000 cells")
        if "mcmc" in self.methods and not self.seeds:
            raise InputDomainError("mcmc cells need at least one seed")
        if any(seed < 1 for seed in self.seeds):
            raise InputDomainError("seeds must be positive")

    def canonical(self) -> str:
        """One line per field in fixed order; the basis of the config hash.

        The output directory is a location, not a configuration, so it is
        excluded: the same experiment written elsewhere hashes the same.
        """
        return "\n".join(
            [
                f"model = {self.model}",
                f"methods = {','.join(self.methods)}",
                f"ladder = {','.join(str(r) for r in self.ladder)}",
                f"residue_grid = {self.residue_grid}",
                f"cert_max_r = {self.cert_max_r}",
                f"seeds = {','.join(str(s) for s in self.seeds)}",
                f"burn_in = {self.burn_in}",
                f"thinning = {self.thinning}",
            ]
        )

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log residue against log state count."""

    method: str
    slope: float
    intercept: float
    r_range: tuple[int, int]


@dataclass(frozen=True)
class RelativeError:
    """One functional's deviation from the reference proxy.

    error_kind is "relative" normally and "absolute" when the reference
    value is exactly zero (a relative error would divide by zero).
    """

    method: str
    functional: str
    value: float
    reference: float
    error: float
    error_kind: str


def parse_plan(path: str | Path) -> ExperimentPlan:
    """Read a `key = value` plan file; list values are comma-separated."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _PLAN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value.strip()

    if "model" not in values:
        raise ConfigError(f"{path}: missing required key 'model'")

    kwargs: dict[str, object] = {"model": values["model"]}
    try:
        if "methods" in values:
            kwargs["methods"] = tuple(
                part.strip() for part in values["methods"].split(",") if part.strip()
            )
        if "ladder" in values:
            kwargs["ladder"] = tuple(int(part) for part in values["ladder"].split(","))
        if "seeds" in values:
            kwargs["seeds"] = tuple(int(part) for part in values["seeds"].split(","))
        for key in ("residue_grid", "cert_max_r", "burn_in", "thinning"):
            if key in values:
                kwargs[key] = int(values[key])
        if "out" in values:
            kwargs["out"] = values["out"]
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return ExperimentPlan(**kwargs)
    except InputDomainError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def fit_rate(points: Sequence[tuple[int, float]], method: str = "") -> RateFit:
    """Slope of ln(value) against ln(2^r + 1) by least squares."""
    if len(points) < 4:
        raise InputDomainError("rate fit needs at least 4 points")
    rs = [int(r) for r, _ in points]
    vals = [float(v) for _, v in points]
    if min(vals) <= 0.0:
        raise InputDomainError("rate fit needs positive values")
    x = np.log([2.0**r + 1.0 for r in rs])
    y = np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    return RateFit(
        method=method,
        slope=float(slope),
        intercept=float(intercept),
        r_range=(min(rs), max(rs)),
    )


def relative_error_table(
    reference: DiscreteDistribution,
    others: Mapping[str, DiscreteDistribution],
    phis: Sequence[PerformanceFunctional],
) -> list[RelativeError]:
    """Per method and functional: |m - m_ref| / |m_ref| against the reference."""
    rows = []
    for method, proxy in others.items():
        for phi in phis:
            m_ref = expectation(phi, reference)
            m = expectation(phi, proxy)
            if m_ref == 0.0:
                error, kind = abs(m - m_ref), "absolute"
            else:
                error, kind = abs(m - m_ref) / abs(m_ref), "relative"
            rows.append(
                RelativeError(
                    method=method,
                    functional=phi.name,
                    value=m,
                    reference=m_ref,
                    error=error,
                    error_kind=kind,
                )
            )
    return rows


def _load_model(name: str) -> QueueModel:
    if name == "a":
        return model_a()
    if name == "b":
        return model_b()
    return load_queue_config(name)


@dataclass
class _Cell:
    method: str
    r: int | None
    seed: int | None
    l_inf: float | None = None
    l_1: float | None = None
    status: str = "ok"

    def row(self) -> list[str]:
        return [
            self.method,
            "" if self.r is None else str(self.r),
            "" if self.seed is None else str(self.seed),
            "" if self.l_inf is None else f"{self.l_inf:.17g}",
            "" if self.l_1 is None else f"{self.l_1:.17g}",
            self.status,
        ]


def _write_rows(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def run_plan(plan: ExperimentPlan) -> Path:
    """Execute every plan cell and write the artifact directory.

    A failing cell contributes an error row to residues.csv and is left
    out of the summaries; the rest of the plan still runs. Every artifact
    except timing.csv and run_metadata.txt depends only on the plan.
    """
    from finitemc import __version__  # deferred: this module is part of the package

    out = Path(plan.out)
    (out / "proxies").mkdir(parents=True, exist_ok=True)

    model = _load_model(plan.model)
    kernel = vwt_kernel(model)
    phis = functionals(model)

    cells: list[_Cell] = []
    timings: list[tuple[str, int | None, int | None, float]] = []
    artifacts: list[tuple[str, int | None]] = []  # (relative path, seed)
    certificates: list[ErrorCertificate] = []
    bounds: list[tuple[int, MeasureBound]] = []
    finite_proxies: dict[int, DiscreteDistribution] = {}
    mcmc_proxies: dict[tuple[int, int], DiscreteDistribution] = {}
    fluid_proxy: DiscreteDistribution | None = None
    notes: list[str] = []

    if "finite" in plan.methods:
        for r in plan.ladder:
            cell = _Cell(method="finite", r=r, seed=None)
            started = time.perf_counter()
            try:
                grid = dyadic_grid(r)
                q = truncate_kernel(kernel, grid)
                sol = stationary_direct(q, grid)
                report = balance_residue(kernel, sol.distribution, plan.residue_grid)
                cell.l_inf, cell.l_1 = report.l_inf, report.l_1
                finite_proxies[r] = sol.distribution
                name = f"proxies/finite_r{r}.csv"
                sol.distribution.write_csv(out / name)
                artifacts.append((name, None))
                if r <= plan.cert_max_r:
                    cert = certify(kernel, q, grid)
                    certificates.append(cert)
                    for phi in phis:
                        bounds.append((r, bound_measure(phi, sol, cert)))
            except FiniteMcError as exc:
                cell.status = f"error:{type(exc).__name__}"
                notes.append(f"finite r={r} failed: {exc}")
            timings.append(("finite", r, None, time.perf_counter() - started))
            cells.append(cell)

    if "mcmc" in plan.methods:
        for r in plan.ladder:
            for seed in plan.seeds:
                cell = _Cell(method="mcmc", r=r, seed=seed)
                started = time.perf_counter()
                try:
                    config = McmcConfig(
                        samples=2**r + 1,
                        seed=seed,
                        burn_in=plan.burn_in,
                        thinning=plan.thinning,
                    )
                    result = run_mcmc(model, config)
                    report = balance_residue(kernel, result.empirical, plan.residue_grid)
                    cell.l_inf, cell.l_1 = report.l_inf, report.l_1
                    mcmc_proxies[(r, seed)] = result.empirical
                    name = f"proxies/mcmc_r{r}_seed{seed}.csv"
                    result.empirical.write_csv(out / name)
                    artifacts.append((name, seed))
                except FiniteMcError as exc:
                    cell.status = f"error:{type(exc).__name__}"
                    notes.append(f"mcmc r={r} seed={seed} failed: {exc}")
                timings.append(("mcmc", r, seed, time.perf_counter() - started))
                cells.append(cell)

    if "fluid" in plan.methods:
        cell = _Cell(method="fluid", r=None, seed=None)
        started = time.perf_counter()
        try:
            _, fluid_proxy = fluid_approximation(model)
            report = balance_residue(kernel, fluid_proxy, plan.residue_grid)
            cell.l_inf, cell.l_1 = report.l_inf, report.l_1
            fluid_proxy.write_csv(out / "proxies/fluid.csv")
            artifacts.append(("proxies/fluid.csv", None))
        except FiniteMcError as exc:
            cell.status = f"error:{type(exc).__name__}"
            fluid_proxy = None
            notes.append(f"fluid failed: {exc}")
        timings.append(("fluid", None, None, time.perf_counter() - started))
        cells.append(cell)

    # --- residues ---------------------------------------------------------
    _write_rows(
        out / "residues.csv",
        ["method", "r", "seed", "l_inf", "l_1", "status"],
        [cell.row() for cell in cells],
    )
    artifacts.append(("residues.csv", None))

    # --- certificates and measure bounds ---------------------------------
    if "finite" in plan.methods:
        write_certificates_csv(certificates, out / "certificates.csv")
        artifacts.append(("certificates.csv", None))
        _write_rows(
            out / "measure_bounds.csv",
            ["r", "functional", "value", "half_width", "a"],
            [
                [str(r), b.functional, f"{b.value:.17g}", f"{b.half_width:.17g}", str(b.a)]
                for r, b in bounds
            ],
        )
        artifacts.append(("measure_bounds.csv", None))

    # --- fitted rates -----------------------------------------------------
    rate_rows = []
    finite_points = [
        (c.r, c.l_inf) for c in cells if c.method == "finite" and c.status == "ok"
    ]
    mcmc_means = []
    for r in plan.ladder:
        seed_vals = [
            c.l_inf for c in cells if c.method == "mcmc" and c.r == r and c.status == "ok"
        ]
        if seed_vals:
            mcmc_means.append((r, float(np.mean(seed_vals))))
    for method, points in (("finite", finite_points), ("mcmc", mcmc_means)):
        if method not in plan.methods:
            continue
        try:
            fit = fit_rate(points, method=method)
            rate_rows.append(
                [
                    fit.method,
                    f"{fit.slope:.17g}",
                    f"{fit.intercept:.17g}",
                    str(fit.r_range[0]),
                    str(fit.r_range[1]),
                ]
            )
        except InputDomainError as exc:
            notes.append(f"rate fit skipped for {method}: {exc}")
    if "fluid" in plan.methods:
        notes.append("rate fit skipped for fluid: single resolution-free cell")
    _write_rows(out / "rates.csv", ["method", "slope", "intercept", "r_min", "r_max"], rate_rows)
    artifacts.append(("rates.csv", None))

    # --- residue summary per resolution -----------------------------------
    by_finite = {c.r: c for c in cells if c.method == "finite" and c.status == "ok"}
    by_mcmc = dict(mcmc_means)
    summary = []
    for r in plan.ladder:
        finite_cell = by_finite.get(r)
        summary.append(
            [
                str(r),
                "" if finite_cell is None else f"{finite_cell.l_inf:.17g}",
                "" if r not in by_mcmc else f"{by_mcmc[r]:.17g}",
            ]
        )
    _write_rows(
        out / "residue_summary.csv", ["r", "finite_l_inf", "mcmc_l_inf"], summary
    )
    artifacts.append(("residue_summary.csv", None))

    # --- measure summary: residues plus relative errors -------------------
    top = plan.ladder[-1]
    measure_rows: list[list[str]] = []
    if top in finite_proxies:
        others: dict[str, DiscreteDistribution] = {"finite": finite_proxies[top]}
        residue_of = {
            "finite": next(c for c in cells if c.method == "finite" and c.r == top)
        }
        first_seed = plan.seeds[0] if plan.seeds else None
        if (top, first_seed) in mcmc_proxies:
            others["mcmc"] = mcmc_proxies[(top, first_seed)]
            residue_of["mcmc"] = next(
                c for c in cells if c.method == "mcmc" and c.r == top and c.seed == first_seed
            )
            notes.append(f"measure summary mcmc proxy: r={top} seed={first_seed}")
        if fluid_proxy is not None:
            others["fluid"] = fluid_proxy
            residue_of["fluid"] = next(c for c in cells if c.method == "fluid")
        for row in relative_error_table(finite_proxies[top], others, phis):
            cell = residue_of[row.method]
            measure_rows.append(
                [
                    row.method,
                    f"{cell.l_inf:.17g}",
                    f"{cell.l_1:.17g}",
                    row.functional,
                    f"{row.value:.17g}",
                    f"{row.reference:.17g}",
                    f"{row.error:.17g}",
                    row.error_kind,
                ]
            )
        notes.append(f"measure summary reference: finite r={top}")
    else:
        notes.append("measure summary skipped: no finite reference at the ladder top")
    _write_rows(
        out / "measure_summary.csv",
        ["method", "l_inf", "l_1", "functional", "value", "reference", "error", "error_kind"],
        measure_rows,
    )
    artifacts.append(("measure_summary.csv", None))

    # --- provenance index (deterministic) and quarantined wall-clock ------
    config_hash = plan.config_hash()
    _write_rows(
        out / "index.csv",
        ["artifact", "config_hash", "seed", "code_version"],
        [
            [name, config_hash, "" if seed is None else str(seed), __version__]
            for name, seed in artifacts
        ],
    )

    _write_rows(
        out / "timing.csv",
        ["method", "r", "seed", "seconds"],
        [
            [
                method,
                "" if r is None else str(r),
                "" if seed is None else str(seed),
                f"{seconds:.3f}",
            ]
            for method, r, seed, seconds in timings
        ],
    )

    metadata = [
        f"written_utc = {datetime.now(timezone.utc).isoformat()}",
        f"config_hash = {config_hash}",
        f"code_version = {__version__}",
        "sampling = first record at burn_in + thinning, then every thinning steps",
        "timing.csv and this file are the only artifacts that vary between reruns",
        "",
        plan.canonical(),
        "",
        *notes,
    ]
    (out / "run_metadata.txt").write_text("\n".join(metadata) + "\n")
    return out

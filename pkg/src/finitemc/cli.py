"""Command-line entry points.

Subcommands mirror the library stages: ``solve`` (truncate and solve one
resolution, with a certificate when cheap enough), ``residue`` (balance
residue of the finite solution), ``mcmc`` and ``fluid`` (the baselines),
``bench`` (a full experiment plan), and ``check`` (kernel diagnostics).
Model selection is ``--model a|b`` or ``--config path`` to a model file;
``bench`` instead reads an experiment plan via ``--config``.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .bench import parse_plan, run_plan
from .certificates import certify, bound_measure, write_certificates_csv
from .errors import FiniteMcError
from .kernels import balance_residue, dyadic_grid, e1_factor, estimate_condition_bounds, truncate_kernel
from .mcmc import McmcConfig, run_mcmc, write_samples_csv, write_statistics_csv
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

__all__ = ["main"]


def _model_from_args(args: argparse.Namespace) -> QueueModel:
    if args.config is not None:
        return load_queue_config(args.config)
    if args.model == "a":
        return model_a()
    if args.model == "b":
        return model_b()
    raise FiniteMcError(f"unknown model {args.model!r}")  # argparse restricts choices


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=("a", "b"), default="a", help="built-in model")
    parser.add_argument("--config", default=None, help="model file overriding --model")


def _finite_solution(model: QueueModel, r: int):
    kernel = vwt_kernel(model)
    grid = dyadic_grid(r)
    q = truncate_kernel(kernel, grid)
    sol = stationary_direct(q, grid)
    return kernel, grid, q, sol


def _cmd_solve(args: argparse.Namespace) -> int:
    model = _model_from_args(args)
    kernel, grid, q, sol = _finite_solution(model, args.r)
    print(f"states = {grid.n_states}")
    print(f"solver_residual = {sol.residual:.6e}")
    out = None if args.out is None else Path(args.out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        sol.distribution.write_csv(out / f"finite_r{args.r}.csv")
        print(f"wrote {out / f'finite_r{args.r}.csv'}")
    if args.r <= args.cert_max_r:
        cert = certify(kernel, q, grid)
        print(f"e1 = {cert.e1:.6e}")
        print(f"e2 = {cert.e2:.6e}")
        print(f"dist_bound = {cert.dist_bound:.6e}")
        for phi in functionals(model):
            bound = bound_measure(phi, sol, cert)
            print(
                f"{bound.functional}: value = {bound.value:.6e} "
                f"half_width = {bound.half_width:.6e}"
            )
        if out is not None:
            write_certificates_csv([cert], out / f"certificate_r{args.r}.csv")
            print(f"wrote {out / f'certificate_r{args.r}.csv'}")
    else:
        print(f"certificate skipped (r > {args.cert_max_r}; raise --cert-max-r to force)")
    return 0


def _cmd_residue(args: argparse.Namespace) -> int:
    model = _model_from_args(args)
    kernel, _, _, sol = _finite_solution(model, args.r)
    report = balance_residue(kernel, sol.distribution, args.grid)
    print(f"l_inf = {report.l_inf:.6e}")
    print(f"l_1 = {report.l_1:.6e}")
    return 0


def _cmd_mcmc(args: argparse.Namespace) -> int:
    model = _model_from_args(args)
    config = McmcConfig(samples=2**args.r + 1, seed=args.seed)
    result = run_mcmc(model, config)
    for stat in result.statistics:
        print(f"{stat.name}: mean = {stat.mean:.6e} ci_half_width = {stat.ci_half_width:.6e}")
    report = balance_residue(vwt_kernel(model), result.empirical, args.grid)
    print(f"l_inf = {report.l_inf:.6e}")
    print(f"l_1 = {report.l_1:.6e}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_samples_csv(result, out / f"mcmc_r{args.r}_seed{args.seed}_samples.csv")
        write_statistics_csv(result, out / f"mcmc_r{args.r}_seed{args.seed}_stats.csv")
        print(f"wrote {out / f'mcmc_r{args.r}_seed{args.seed}_samples.csv'}")
        print(f"wrote {out / f'mcmc_r{args.r}_seed{args.seed}_stats.csv'}")
    return 0


def _cmd_fluid(args: argparse.Namespace) -> int:
    model = _model_from_args(args)
    w_fluid, proxy = fluid_approximation(model)
    print(f"w_fluid = {w_fluid:.12f}")
    report = balance_residue(vwt_kernel(model), proxy, args.grid)
    print(f"l_inf = {report.l_inf:.6e}")
    print(f"l_1 = {report.l_1:.6e}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        proxy.write_csv(out / "fluid.csv")
        print(f"wrote {out / 'fluid.csv'}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    plan = parse_plan(args.config)
    if args.out is not None:
        plan = dataclasses.replace(plan, out=args.out)
    out = run_plan(plan)
    print(f"wrote {out}")
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    model = _model_from_args(args)
    kernel = vwt_kernel(model)
    failures = 0

    us = np.linspace(0.0, 1.0, 1001)
    markov_gap = float(np.abs(kernel(np.ones_like(us), us) - 1.0).max())
    ok = markov_gap <= 1e-9
    failures += not ok
    print(f"markov row mass: max |kbar(1,u) - 1| = {markov_gap:.3e} [{'ok' if ok else 'FAIL'}]")

    estimates = estimate_condition_bounds(kernel, sample_grid=args.grid_check)
    for label, declared, estimated in (
        ("d/dx", kernel.lipschitz_x, estimates.dx_max),
        ("d/du", kernel.lipschitz_u, estimates.du_max),
        ("mixed", kernel.mixed_bound, estimates.mixed_max),
        ("edge", kernel.edge_bound, estimates.edge_max),
    ):
        if declared is None:
            print(f"{label}: declared none, estimated {estimated:.6f}")
            continue
        ok = estimated <= declared * (1.0 + 1e-6)
        failures += not ok
        print(
            f"{label}: declared {declared:.6f}, estimated {estimated:.6f} "
            f"[{'ok' if ok else 'FAIL'}]"
        )

    grid = dyadic_grid(args.r)
    q = truncate_kernel(kernel, grid)
    sums = np.abs(q.q.sum(axis=1) - 1.0).max()
    print(f"truncated rows at r={args.r}: max |row sum - 1| = {sums:.3e} [ok]")
    analytic = e1_factor(kernel, q, grid, mode="analytic")
    empirical = e1_factor(kernel, q, grid, mode="empirical")
    ok = empirical <= analytic * (1.0 + 1e-9)
    failures += not ok
    print(f"e1 at r={args.r}: analytic {analytic:.6e}, empirical {empirical:.6e} "
          f"[{'ok' if ok else 'FAIL'}]")

    print(f"check {'passed' if failures == 0 else f'failed ({failures} finding(s))'}")
    return 0 if failures == 0 else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finitemc",
        description="Certified finite-state approximation of a continuous-state chain",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="stationary law and certificate at one resolution")
    _add_model_flags(p)
    p.add_argument("--r", type=int, default=6, help="dyadic resolution level")
    p.add_argument("--out", default=None, help="directory for CSV artifacts")
    p.add_argument("--cert-max-r", type=int, default=8, help="certify only when r is at most this")
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("residue", help="balance residue of the finite solution")
    _add_model_flags(p)
    p.add_argument("--r", type=int, default=6)
    p.add_argument("--grid", type=int, default=100_000, help="residue evaluation cells")
    p.set_defaults(handler=_cmd_residue)

    p = sub.add_parser("mcmc", help="trajectory-simulation baseline")
    _add_model_flags(p)
    p.add_argument("--r", type=int, default=9, help="collect 2^r + 1 samples")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--grid", type=int, default=100_000)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_mcmc)

    p = sub.add_parser("fluid", help="deterministic overload baseline")
    _add_model_flags(p)
    p.add_argument("--grid", type=int, default=100_000)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_fluid)

    p = sub.add_parser("bench", help="run a full experiment plan")
    p.add_argument("--config", required=True, help="experiment plan file")
    p.add_argument("--out", default=None, help="override the plan's output directory")
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("check", help="kernel and truncation diagnostics")
    _add_model_flags(p)
    p.add_argument("--r", type=int, default=6)
    # 60 keeps the stencil batches small enough for direct quadrature; the
    # lookup-table error is amplified by the second-difference step otherwise
    p.add_argument("--grid-check", type=int, default=60, help="condition-estimate sample grid")
    p.set_defaults(handler=_cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (FiniteMcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

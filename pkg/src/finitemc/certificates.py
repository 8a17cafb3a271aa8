"""Deterministic error certificates for truncated chains.

The sup-norm gap between the true stationary law and the finite one factors
into e1 (kernel truncation quality, from declared Lipschitz bounds) times e2
(conditioning of the approximate balance operator). e2 comes from a family of
small linear programs, one per grid state plus one for the origin cell; the
reciprocal of the smallest optimum bounds the inverse operator norm. Both
factors are computable, so the product is a certificate, not an estimate.

LP row layout (relied on by tests): for each indicator flag eta in {0, 1}, in
that order, and each constraint index j in 0..J ascending, two rows encode
|C_j| <= y as (+C_j - y <= -const) then (-C_j - y <= +const).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InfeasibleProgramError,
    InputDomainError,
    InvertibilityError,
    StructuralChainError,
    UnboundedProgramError,
)
from .kernels import Grid, KernelHandle, TransitionMatrix, e1_factor
from .measures import PerformanceFunctional, expectation
from .numerics import LinearProgram, solve_lp
from .stationary import StationarySolution, check_absorbing_class

__all__ = [
    "ErrorCertificate",
    "MeasureBound",
    "build_lp",
    "e2_factor",
    "certify",
    "bound_measure",
    "write_certificates_csv",
]

_MIN_OPTIMUM = 1e-12


@dataclass(frozen=True, eq=False)
class ErrorCertificate:
    """Certified sup-norm bound ||p - p_finite||_inf <= e1 * e2."""

    e1: float
    e2: float
    dist_bound: float
    y_star: np.ndarray
    argmin_k: int
    level: int

    def __post_init__(self) -> None:
        y = np.asarray(self.y_star, dtype=float)
        y.flags.writeable = False
        object.__setattr__(self, "y_star", y)
        if y.min(initial=np.inf) <= 0.0:
            raise InputDomainError("every LP optimum must be strictly positive")
        if abs(self.dist_bound - self.e1 * self.e2) > 1e-12 * max(1.0, abs(self.dist_bound)):
            raise InputDomainError("dist_bound must equal e1 * e2")
        if not 0 <= self.argmin_k < y.size:
            raise InputDomainError("argmin index outside the LP family")


@dataclass(frozen=True)
class MeasureBound:
    """Two-sided bound on a stationary performance measure.

    half_width = a * V(g) * dist_bound with a = 1 for continuous g and the
    distribution-free a = 2 otherwise.
    """

    functional: str
    value: float
    half_width: float
    a: int

    def __post_init__(self) -> None:
        if self.a not in (1, 2):
            raise InputDomainError("the constant a is 1 (continuous) or 2 (general)")
        if self.half_width < 0.0:
            raise InputDomainError("half width must be nonnegative")


def _weight_matrix(q: TransitionMatrix) -> np.ndarray:
    """w[i, j] = 1 + sum of the first j entries of row i, j = 0..J."""
    n = q.n_states
    w = np.ones((n, n + 1))
    w[:, 1:] += np.cumsum(q.q, axis=1)
    return w


def build_lp(q: TransitionMatrix, k: int) -> LinearProgram:
    """LP whose optimum y*_k probes the balance operator along index k.

    Variables are (y_k, a_1..a_J) with the phantom a_0 = 0 substituted away;
    each constraint index j carries the telescoped weights
    w_ij = 1 + partial row sum, and the indicator flag eta toggles the
    perturbation delta_{jk}(1 - a_j) on and off.
    """
    n = q.n_states
    if n < 2:
        raise InputDomainError("need at least 2 states")
    if not 0 <= k <= n:
        raise InputDomainError(f"index k must be in 0..{n}, got {k}")
    w = _weight_matrix(q)

    # linear coefficient of a_m (columns m = 1..J) in sum_i w_ij (a_i - a_{i-1})
    tele = np.empty((n + 1, n))
    tele[:, :-1] = (w[:-1, :] - w[1:, :]).T
    tele[:, -1] = w[-1, :]

    rows = []
    rhs = []
    for eta in (0, 1):
        for j in range(n + 1):
            coef = -tele[j].copy()
            const = 0.0
            if j >= 1:
                coef[j - 1] += 1.0
            if eta == 1 and j == k:
                const = 1.0
                if j >= 1:
                    coef[j - 1] -= 1.0
            plus = np.concatenate(([-1.0], coef))
            minus = np.concatenate(([-1.0], -coef))
            rows.extend([plus, minus])
            rhs.extend([-const, const])

    bounds = ((0.0, None),) + tuple((-1.0, 1.0) for _ in range(n))
    objective = np.zeros(n + 1)
    objective[0] = 1.0
    return LinearProgram(
        objective=objective, rows=np.asarray(rows), rhs=np.asarray(rhs), bounds=bounds
    )


def e2_factor(q: TransitionMatrix) -> tuple[float, np.ndarray]:
    """Conditioning factor: reciprocal of the smallest LP optimum.

    Runs the J+1 programs; a nonpositive or vanishing optimum means the
    approximate balance operator is numerically singular, which is surfaced
    as InvertibilityError rather than a bogus huge bound.
    """
    ok, _ = check_absorbing_class(q)
    if not ok:
        raise StructuralChainError(
            "transition matrix lacks a unique absorbing communicating class"
        )
    n = q.n_states
    y_star = np.empty(n + 1)
    for k in range(n + 1):
        try:
            value, _ = solve_lp(build_lp(q, k))
        except (InfeasibleProgramError, UnboundedProgramError) as exc:
            raise InvertibilityError(f"LP {k} of the certificate family failed: {exc}") from exc
        y_star[k] = value
    smallest = float(y_star.min())
    if smallest <= _MIN_OPTIMUM:
        raise InvertibilityError(
            f"smallest LP optimum {smallest:.3e} <= {_MIN_OPTIMUM}; balance operator numerically singular"
        )
    return 1.0 / smallest, y_star


def certify(kernel: KernelHandle, q: TransitionMatrix, grid: Grid) -> ErrorCertificate:
    """Assemble the certified sup-norm error bound e1 * e2."""
    e1 = e1_factor(kernel, q, grid, mode="analytic")
    e2, y_star = e2_factor(q)
    return ErrorCertificate(
        e1=e1,
        e2=e2,
        dist_bound=e1 * e2,
        y_star=y_star,
        argmin_k=int(np.argmin(y_star)),
        level=grid.level,
    )


def bound_measure(
    g: PerformanceFunctional, sol: StationarySolution, cert: ErrorCertificate
) -> MeasureBound:
    """Point estimate under the finite law plus a certified half width."""
    a = 1 if g.continuous else 2
    return MeasureBound(
        functional=g.name,
        value=expectation(g, sol.distribution),
        half_width=a * g.total_variation * cert.dist_bound,
        a=a,
    )


def write_certificates_csv(certs: list[ErrorCertificate], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "e1", "e2", "dist_bound", "argmin_k"])
        for cert in certs:
            writer.writerow(
                [
                    cert.level,
                    f"{cert.e1:.17g}",
                    f"{cert.e2:.17g}",
                    f"{cert.dist_bound:.17g}",
                    cert.argmin_k,
                ]
            )

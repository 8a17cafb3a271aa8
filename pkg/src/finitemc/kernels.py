"""Transition kernels on [0,1] and their finite-state truncations.

A kernel is handled through its conditional CDF kbar(x, u) = P(next <= x |
current = u). Truncation on a grid turns CDF increments between consecutive
states into a row-stochastic matrix; the induced step-function kernel is what
the finite chain actually simulates, and the gap between the two is the first
factor of the error certificate.

The sentinel "state zero at -infinity" convention makes the first column
absorb all mass at or below the origin, which is how an atom at 0 (an idle
server, an absorbed walk) survives truncation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import CapabilityError, InputDomainError, KernelIntegrityError
from .measures import DiscreteDistribution, discrete_distribution

__all__ = [
    "KernelHandle",
    "Grid",
    "TransitionMatrix",
    "ResidueReport",
    "dyadic_grid",
    "truncate_kernel",
    "approx_kernel_eval",
    "approx_kernel_handle",
    "e1_factor",
    "balance_residue",
    "estimate_condition_bounds",
    "ConditionEstimates",
    "regeneration_kernel",
]

_MAX_LEVEL = 24
_ROW_SUM_TOL = 1e-8
_MONOTONE_TOL = 1e-10
_MARKOV_TOL = 1e-9
# atom blocks for dense (eval points x atoms) products; bounds peak memory
_BLOCK_ELEMENTS = 1 << 21


@dataclass(frozen=True, eq=False)
class KernelHandle:
    """A Markov kernel given by its conditional CDF evaluator.

    evaluator(x, u) must accept broadcasting ndarrays and be pure. The
    derivative bounds are declared, not measured; estimate_condition_bounds
    provides the measuring stick. pushforward, when set, computes
    x -> integral of kbar(x, u) dp(u) in one call and exists purely as a fast
    path; it must agree with the evaluator to quadrature accuracy.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz_x: float | None = None
    lipschitz_u: float | None = None
    mixed_bound: float | None = None
    edge_bound: float | None = None
    pushforward: Callable[[np.ndarray, DiscreteDistribution], np.ndarray] | None = None

    def __call__(self, x, u):
        out = self.evaluator(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
        if np.ndim(x) == 0 and np.ndim(u) == 0:
            return float(out)
        return np.asarray(out, dtype=float)


@dataclass(frozen=True, eq=False)
class Grid:
    """Sorted truncation states c_1 = 0 < ... < c_J = 1; c_0 = -inf implicit."""

    states: np.ndarray
    level: int

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=float)
        states.flags.writeable = False
        object.__setattr__(self, "states", states)
        if states.ndim != 1 or states.size < 2:
            raise InputDomainError("grid needs at least the two endpoint states")
        if states[0] != 0.0 or states[-1] != 1.0:
            raise InputDomainError("grid endpoints must be exactly 0 and 1")
        if np.any(np.diff(states) <= 0.0):
            raise InputDomainError("grid states must be strictly increasing")

    @property
    def n_states(self) -> int:
        return int(self.states.size)

    @property
    def mesh(self) -> float:
        return float(np.diff(self.states).max())

    def cell_of(self, u) -> np.ndarray:
        """0-based index of the state covering u: min{i: u <= c_i}."""
        return np.searchsorted(self.states, u, side="left")

    def floor_state(self, x) -> np.ndarray:
        """0-based index of the largest state <= x."""
        return np.searchsorted(self.states, x, side="right") - 1


def dyadic_grid(r: int) -> Grid:
    """Equally spaced grid with 2^r + 1 states at multiples of 2^-r."""
    if not (1 <= r <= _MAX_LEVEL):
        raise InputDomainError(f"level must be in 1..{_MAX_LEVEL}, got {r}")
    n = (1 << r) + 1
    return Grid(states=np.arange(n) / float(n - 1), level=r)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic matrix over grid states; rows sum to 1 within 1e-12."""

    q: np.ndarray
    level: int

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float)
        q.flags.writeable = False
        object.__setattr__(self, "q", q)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise InputDomainError("transition matrix must be square")
        if q.min() < 0.0 or q.max() > 1.0:
            raise InputDomainError("transition probabilities must lie in [0,1]")
        gap = np.abs(q.sum(axis=1) - 1.0).max()
        if gap > 1e-12:
            raise InputDomainError(f"row sums deviate from 1 by {gap:.3e}")

    @property
    def n_states(self) -> int:
        return int(self.q.shape[0])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.q:
                writer.writerow([f"{v:.17g}" for v in row])

    @staticmethod
    def read_csv(path: str | Path) -> "TransitionMatrix":
        with open(path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        q = np.asarray(rows, dtype=float)
        level = int(round(math.log2(q.shape[0] - 1))) if q.shape[0] > 1 else 0
        if q.shape[0] != (1 << level) + 1:
            raise InputDomainError("matrix size does not match a dyadic grid")
        return TransitionMatrix(q=q, level=level)


@dataclass(frozen=True)
class ResidueReport:
    """Sup and mean balance residues over an evaluation grid."""

    grid_points: int
    l_inf: float
    l_1: float

    def __post_init__(self) -> None:
        if self.l_1 > self.l_inf + 1e-15:
            raise InputDomainError("mean residue cannot exceed the sup residue")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["grid_points", "l_inf", "l_1"])
            writer.writerow([self.grid_points, f"{self.l_inf:.17g}", f"{self.l_1:.17g}"])


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------


def _kernel_rows(kernel: KernelHandle, grid: Grid, sources: np.ndarray) -> np.ndarray:
    """CDF values kbar(c_j, u) for each source u, one row per source."""
    return np.asarray(
        kernel.evaluator(grid.states[None, :], sources[:, None]), dtype=float
    )


def truncate_kernel(kernel: KernelHandle, grid: Grid) -> TransitionMatrix:
    """Split the conditional CDF into increments between consecutive states.

    q_{ij} = kbar(c_j, c_i) - kbar(c_{j-1}, c_i), with kbar(-inf, .) = 0 so
    the first column holds the full mass at or below 0. Rows are renormalized
    after a 1e-8 integrity check so the matrix invariant is exact.
    """
    states = grid.states
    n = grid.n_states
    top = np.asarray(kernel.evaluator(1.0, states), dtype=float)
    bad = np.abs(top - 1.0).max()
    if bad > _MARKOV_TOL:
        raise KernelIntegrityError(
            f"kbar(1, u) misses 1 by {bad:.3e}; evaluator is not a Markov kernel"
        )

    q = np.empty((n, n))
    block = max(1, _BLOCK_ELEMENTS // n)
    for start in range(0, n, block):
        rows = _kernel_rows(kernel, grid, states[start : start + block])
        q[start : start + rows.shape[0]] = np.diff(rows, axis=1, prepend=0.0)

    worst = q.min()
    if worst < -_MONOTONE_TOL:
        raise KernelIntegrityError(
            f"negative CDF increment {worst:.3e}: evaluator not nondecreasing in x"
        )
    np.clip(q, 0.0, None, out=q)
    sums = q.sum(axis=1)
    gap = np.abs(sums - 1.0).max()
    if gap > _ROW_SUM_TOL:
        raise KernelIntegrityError(f"row sums deviate from 1 by {gap:.3e}")
    q /= sums[:, None]
    np.clip(q, 0.0, 1.0, out=q)
    return TransitionMatrix(q=q, level=grid.level)


# ---------------------------------------------------------------------------
# the induced approximate kernel
# ---------------------------------------------------------------------------


def _row_cdf(q: TransitionMatrix) -> np.ndarray:
    w = np.cumsum(q.q, axis=1)
    w[:, -1] = 1.0
    return w


def approx_kernel_eval(q: TransitionMatrix, grid: Grid, x, u):
    """Step-function kernel of the finite chain.

    Equals the partial row sum of the source state's row up to the largest
    state <= x; agrees with the parent kernel at all grid pairs.
    """
    x_arr = np.asarray(x, dtype=float)
    u_arr = np.asarray(u, dtype=float)
    if x_arr.min() < 0.0 or x_arr.max() > 1.0 or u_arr.min() < 0.0 or u_arr.max() > 1.0:
        raise InputDomainError("approximate kernel is defined on [0,1]^2")
    w = _row_cdf(q)
    rows = grid.cell_of(u_arr)
    cols = grid.floor_state(x_arr)
    out = w[rows, cols]
    if np.ndim(x) == 0 and np.ndim(u) == 0:
        return float(out)
    return out


def approx_kernel_handle(q: TransitionMatrix, grid: Grid) -> KernelHandle:
    """Package the truncated chain as a KernelHandle with a fast pushforward."""
    w = _row_cdf(q)

    def evaluator(x, u):
        xa, ua = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
        return w[grid.cell_of(ua), grid.floor_state(np.clip(xa, 0.0, 1.0))]

    def pushforward(xs: np.ndarray, dist: DiscreteDistribution) -> np.ndarray:
        weights = np.zeros(grid.n_states)
        np.add.at(weights, grid.cell_of(dist.locations), dist.masses)
        mixed = weights @ w
        return mixed[grid.floor_state(np.clip(np.asarray(xs, float), 0.0, 1.0))]

    return KernelHandle(evaluator=evaluator, pushforward=pushforward)


# ---------------------------------------------------------------------------
# error factor e1 and residues
# ---------------------------------------------------------------------------


def e1_factor(
    kernel: KernelHandle,
    q: TransitionMatrix,
    grid: Grid,
    mode: str = "analytic",
    sample_grid: int = 512,
) -> float:
    """Sup-norm gap between the kernel and its truncation.

    Analytic mode is the certified bound lipschitz_x * mesh + lipschitz_u *
    mesh, linear in the mesh (halving the mesh halves it exactly). Empirical
    mode maximizes |kbar - step kernel| over a uniform sample and is a lower
    estimate only, never certificate material.
    """
    if mode == "analytic":
        if kernel.lipschitz_x is None or kernel.lipschitz_u is None:
            raise CapabilityError("analytic mode needs lipschitz_x and lipschitz_u declared")
        return (kernel.lipschitz_x + kernel.lipschitz_u) * grid.mesh
    if mode != "empirical":
        raise InputDomainError(f"mode must be analytic or empirical, got {mode!r}")
    if sample_grid < 2:
        raise InputDomainError("empirical mode needs at least a 2x2 sample")
    xs = np.linspace(0.0, 1.0, sample_grid)
    w = _row_cdf(q)
    cols = grid.floor_state(xs)
    worst = 0.0
    block = max(1, _BLOCK_ELEMENTS // sample_grid)
    for start in range(0, sample_grid, block):
        us = xs[start : start + block]
        exact = np.asarray(kernel.evaluator(xs[None, :], us[:, None]), dtype=float)
        step = w[grid.cell_of(us)][:, cols]
        worst = max(worst, float(np.abs(exact - step).max()))
    return worst


def _kernel_mix(kernel: KernelHandle, xs: np.ndarray, dist: DiscreteDistribution) -> np.ndarray:
    """integral of kbar(x, u) dp(u) for every x in xs."""
    if kernel.pushforward is not None:
        return np.asarray(kernel.pushforward(xs, dist), dtype=float)
    out = np.zeros(xs.size)
    block = max(1, _BLOCK_ELEMENTS // xs.size)
    for start in range(0, dist.n_atoms, block):
        locs = dist.locations[start : start + block]
        mass = dist.masses[start : start + block]
        vals = np.asarray(kernel.evaluator(xs[None, :], locs[:, None]), dtype=float)
        out += mass @ vals
    return out


def balance_residue(
    kernel: KernelHandle, proxy: DiscreteDistribution, eval_grid_size: int
) -> ResidueReport:
    """How far a candidate law is from stationarity under the kernel.

    residue(x) = |F_proxy(x) - integral kbar(x, u) dF_proxy(u)| on
    eval_grid_size + 1 equally spaced points including both endpoints.
    """
    if eval_grid_size < 1:
        raise InputDomainError("evaluation grid must have at least 2 points")
    xs = np.linspace(0.0, 1.0, eval_grid_size + 1)
    residue = np.abs(proxy.cdf(xs) - _kernel_mix(kernel, xs, proxy))
    return ResidueReport(
        grid_points=xs.size,
        l_inf=float(residue.max()),
        l_1=float(residue.mean()),
    )


# ---------------------------------------------------------------------------
# numeric condition checks
# ---------------------------------------------------------------------------

_FD_STEP = 1e-5


@dataclass(frozen=True)
class ConditionEstimates:
    """Finite-difference maxima over a sample grid; advisory diagnostics.

    These never enter certificates unless a caller promotes them into a
    KernelHandle's declared bounds explicitly.
    """

    dx_max: float
    du_max: float
    mixed_max: float
    edge_max: float
    sample_grid: int
    step: float = _FD_STEP


def estimate_condition_bounds(kernel: KernelHandle, sample_grid: int) -> ConditionEstimates:
    """Probe kernel smoothness with central differences (one-sided at edges)."""
    if sample_grid < 2:
        raise InputDomainError("need at least 2 sample points per axis")
    h = _FD_STEP
    pts = np.linspace(0.0, 1.0, sample_grid)
    plus = np.minimum(pts + h, 1.0)
    minus = np.maximum(pts - h, 0.0)
    span = plus - minus

    dx_max = du_max = mixed_max = 0.0
    block = max(1, _BLOCK_ELEMENTS // (4 * sample_grid))
    for start in range(0, sample_grid, block):
        us = pts[start : start + block]
        up = plus[start : start + block][:, None]
        um = minus[start : start + block][:, None]
        uspan = span[start : start + block][:, None]

        dx = (kernel.evaluator(plus[None, :], us[:, None]) - kernel.evaluator(minus[None, :], us[:, None])) / span[None, :]
        du = (kernel.evaluator(pts[None, :], up) - kernel.evaluator(pts[None, :], um)) / uspan
        mixed = (
            kernel.evaluator(plus[None, :], up)
            - kernel.evaluator(plus[None, :], um)
            - kernel.evaluator(minus[None, :], up)
            + kernel.evaluator(minus[None, :], um)
        ) / (span[None, :] * uspan)
        dx_max = max(dx_max, float(np.abs(dx).max()))
        du_max = max(du_max, float(np.abs(du).max()))
        mixed_max = max(mixed_max, float(np.abs(mixed).max()))

    edge = np.abs(kernel.evaluator(plus, 1.0) - kernel.evaluator(minus, 1.0)) / span
    return ConditionEstimates(
        dx_max=dx_max,
        du_max=du_max,
        mixed_max=mixed_max,
        edge_max=float(edge.max()),
        sample_grid=sample_grid,
    )


# ---------------------------------------------------------------------------
# stock kernels
# ---------------------------------------------------------------------------


def regeneration_kernel(
    cdf: Callable[[np.ndarray], np.ndarray],
    lipschitz_x: float | None = None,
) -> KernelHandle:
    """Kernel that forgets its source: kbar(x, u) = F(x).

    Its stationary law is F itself, which makes it the main end-to-end test
    oracle: the finite chain's law is F sampled at the grid floor.
    """

    def evaluator(x, u):
        x_arr, u_arr = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
        return np.broadcast_to(np.asarray(cdf(x_arr), dtype=float), u_arr.shape)

    def pushforward(xs, dist):
        return np.asarray(cdf(np.asarray(xs, dtype=float)), dtype=float)

    return KernelHandle(
        evaluator=evaluator,
        lipschitz_x=lipschitz_x,
        lipschitz_u=0.0,
        pushforward=pushforward,
    )

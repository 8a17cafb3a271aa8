"""Stationary distributions of finite-state chains.

The direct route replaces the first row of I - Q^T with all-ones and solves
against (1, 0, ..., 0): the normalization row restores full rank exactly when
the chain has one absorbing communicating class, so a singular solve is
reported as a structural defect of the chain, not as a linear-algebra
accident. Power iteration is the O(z J^2) fallback for sizes where a dense
factorization is off the table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, InputDomainError, SingularMatrixError, StructuralChainError
from .kernels import Grid, TransitionMatrix
from .measures import DiscreteDistribution, discrete_distribution
from .numerics import solve_linear

__all__ = [
    "StationarySolution",
    "stationary_direct",
    "stationary_power",
    "check_absorbing_class",
]

_CLAMP_TOL = 1e-12
_DIRECT_RESIDUAL_TOL = 1e-12
_EDGE_THRESHOLD = 1e-15


@dataclass(frozen=True, eq=False)
class StationarySolution:
    """A stationary law on grid states plus how (and how well) it was found."""

    distribution: DiscreteDistribution
    method: str
    residual: float
    iterations: int
    tolerance: float = _DIRECT_RESIDUAL_TOL

    def __post_init__(self) -> None:
        if self.method not in ("direct", "power"):
            raise InputDomainError(f"unknown method {self.method!r}")
        if self.residual > self.tolerance:
            raise InputDomainError(
                f"residual {self.residual:.3e} exceeds declared tolerance {self.tolerance:.3e}"
            )


def _finalize(pi: np.ndarray, q: TransitionMatrix) -> tuple[np.ndarray, float]:
    """Clamp negative dust, renormalize, and measure ||pi Q - pi||_inf."""
    worst = pi.min()
    if worst < -_CLAMP_TOL:
        raise SingularMatrixError(
            f"stationary vector entry {worst:.3e} below clamp threshold; system ill-conditioned"
        )
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = float(np.abs(pi @ q.q - pi).max())
    return pi, residual


def stationary_direct(q: TransitionMatrix, grid: Grid) -> StationarySolution:
    """Solve the rank-restored linear system for the stationary vector.

    Singularity of the system means the chain has no unique absorbing
    communicating class; that diagnosis is surfaced as StructuralChainError.
    """
    n = q.n_states
    if grid.n_states != n:
        raise InputDomainError("grid and transition matrix sizes differ")
    m = np.eye(n) - q.q.T
    m[0, :] = 1.0
    rhs = np.zeros(n)
    rhs[0] = 1.0
    try:
        pi = solve_linear(m, rhs)
    except SingularMatrixError as exc:
        raise StructuralChainError(
            "no unique absorbing communicating class: the rank-restored balance system is singular"
        ) from exc
    pi, residual = _finalize(pi, q)
    if residual > _DIRECT_RESIDUAL_TOL:
        # one refinement pass against the balance system
        correction = solve_linear(m, rhs - m @ pi)
        pi, residual = _finalize(pi + correction, q)
        if residual > _DIRECT_RESIDUAL_TOL:
            raise SingularMatrixError(
                f"stationary residual {residual:.3e} after refinement; system ill-conditioned"
            )
    return StationarySolution(
        distribution=discrete_distribution(grid.states, pi),
        method="direct",
        residual=residual,
        iterations=0,
    )


def stationary_power(
    q: TransitionMatrix, grid: Grid, tol: float = 1e-12, max_iters: int = 200_000
) -> StationarySolution:
    """Iterate pi <- pi Q from the uniform start until the update stalls."""
    if tol <= 0.0:
        raise InputDomainError("tol must be positive")
    n = q.n_states
    if grid.n_states != n:
        raise InputDomainError("grid and transition matrix sizes differ")
    pi = np.full(n, 1.0 / n)
    for iteration in range(1, max_iters + 1):
        nxt = pi @ q.q
        gap = float(np.abs(nxt - pi).max())
        if gap <= tol:
            pi = pi / pi.sum()
            return StationarySolution(
                distribution=discrete_distribution(grid.states, pi),
                method="power",
                residual=gap,
                iterations=iteration,
                tolerance=tol,
            )
        pi = nxt
    raise ConvergenceError(
        f"power iteration did not reach tol {tol:.1e} in {max_iters} steps (periodic or slowly mixing chain)"
    )


def check_absorbing_class(q: TransitionMatrix) -> tuple[bool, np.ndarray]:
    """Condense the support digraph and count terminal communicating classes.

    Edges require q_ij > 1e-15 so quadrature dust cannot connect states.
    Returns (exactly one terminal class, per-state class labels).
    """
    support = q.q > _EDGE_THRESHOLD
    graph = scipy.sparse.csr_matrix(support)
    n_components, labels = connected_components(graph, directed=True, connection="strong")
    if n_components == 1:
        return True, labels
    src, dst = support.nonzero()
    crossing = labels[src] != labels[dst]
    non_terminal = np.unique(labels[src][crossing])
    n_terminal = n_components - non_terminal.size
    return n_terminal == 1, labels

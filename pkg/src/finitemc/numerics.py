"""Self-contained numerical kernels.

Composite Gauss-Legendre quadrature on [0,1], monotone bisection, closed-form
distribution families (Erlang(2,2) and integer-parameter Betas, plus a
tabulated fallback), a dense linear solve with an explicit singularity
threshold, and a dense LP front end with distinct infeasible/unbounded errors.

The distribution families are exact closed forms on purpose: the condition
checks downstream need their densities and density derivatives bit-stably.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import (
    CapabilityError,
    InfeasibleProgramError,
    InputDomainError,
    SingularMatrixError,
    UnboundedProgramError,
)

__all__ = [
    "QuadratureRule",
    "gauss_legendre",
    "bisect",
    "ParametricCdf",
    "erlang22",
    "beta22",
    "beta34",
    "tabulated_cdf",
    "LinearProgram",
    "solve_linear",
    "solve_lp",
    "vector_quantile",
]


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

_MIN_POINTS = 2
_MAX_POINTS = 16


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Composite Gauss-Legendre rule on [0,1].

    nodes are strictly increasing interior points; weights are positive and
    sum to 1 (the rule integrates the constant 1 exactly).
    """

    nodes: np.ndarray
    weights: np.ndarray
    panels: int
    points_per_panel: int

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise InputDomainError("nodes and weights must be matching 1-d arrays")
        if np.any(np.diff(nodes) <= 0.0):
            raise InputDomainError("quadrature nodes must be strictly increasing")
        if nodes[0] < 0.0 or nodes[-1] > 1.0:
            raise InputDomainError("quadrature nodes must lie in [0,1]")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise InputDomainError("quadrature weights must sum to 1 on [0,1]")

    @property
    def order(self) -> int:
        return self.panels * self.points_per_panel

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Integral of f over [0,1]; f must accept an ndarray of nodes."""
        return float(np.dot(self.weights, np.asarray(f(self.nodes), dtype=float)))

    def mapped(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights affinely mapped to [lo, hi]."""
        width = hi - lo
        return lo + width * self.nodes, width * self.weights

    def integrate_on(self, lo: float, hi: float, f) -> float:
        nodes, weights = self.mapped(lo, hi)
        return float(np.dot(weights, np.asarray(f(nodes), dtype=float)))


def gauss_legendre(panels: int, points_per_panel: int) -> QuadratureRule:
    """Composite Gauss-Legendre rule: `panels` equal panels of [0,1] with
    `points_per_panel` points each; exact for polynomials of degree
    <= 2*points_per_panel - 1 on each panel."""
    if panels < 1:
        raise InputDomainError(f"panels must be >= 1, got {panels}")
    if not (_MIN_POINTS <= points_per_panel <= _MAX_POINTS):
        raise InputDomainError(
            f"points_per_panel must be in {{{_MIN_POINTS}..{_MAX_POINTS}}}, got {points_per_panel}"
        )
    base_x, base_w = np.polynomial.legendre.leggauss(points_per_panel)
    width = 1.0 / panels
    offsets = width * np.arange(panels)[:, None]
    nodes = (offsets + (base_x[None, :] + 1.0) * (0.5 * width)).ravel()
    weights = np.tile(base_w * (0.5 * width), panels)
    return QuadratureRule(nodes=nodes, weights=weights, panels=panels, points_per_panel=points_per_panel)


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------


def bisect(
    f: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    tol: float = 1e-12,
) -> float:
    """Solve f(x) = target for nondecreasing f on [lo, hi] by bisection.

    The bracket invariant f(lo) <= target <= f(hi) is checked at entry and
    maintained at every step; the returned midpoint has bracket width <= tol.
    """
    if tol <= 0.0:
        raise InputDomainError("tol must be positive")
    if not lo <= hi:
        raise InputDomainError("empty bracket")
    flo, fhi = f(lo), f(hi)
    if not (flo <= target <= fhi):
        raise InputDomainError(
            f"bracket violation: f({lo})={flo}, f({hi})={fhi} do not enclose {target}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # float plateau, cannot refine further
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _vector_bisect(cdf, targets: np.ndarray, lo: float, hi: float, tol: float) -> np.ndarray:
    lo_v = np.full_like(targets, lo, dtype=float)
    hi_v = np.full_like(targets, hi, dtype=float)
    # bracket halves every pass; iteration count covers width/tol
    iters = max(1, int(math.ceil(math.log2(max((hi - lo) / tol, 2.0)))) + 2)
    for _ in range(iters):
        mid = 0.5 * (lo_v + hi_v)
        below = cdf(mid) < targets
        lo_v = np.where(below, mid, lo_v)
        hi_v = np.where(below, hi_v, mid)
    return 0.5 * (lo_v + hi_v)


# ---------------------------------------------------------------------------
# distribution families
# ---------------------------------------------------------------------------

_FAMILIES = ("erlang(2,2)", "beta(2,2)", "beta(3,4)", "tabulated")

# Exponent clamp for the Erlang branch: exp(-2*400) underflows to 0, so the
# CDF is exactly 1 there and +inf arguments stay NaN-free.
_ERLANG_CLAMP = 400.0


def _split_scalar(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


@dataclass(frozen=True, eq=False)
class ParametricCdf:
    """A CDF F(x) = F0(scale*x) from a closed-form base family F0.

    Base forms:
      erlang(2,2): F0(x) = 1 - exp(-2x)(1+2x) on x >= 0 (support end +inf)
      beta(2,2):   F0(x) = 3x^2 - 2x^3 on [0,1]
      beta(3,4):   F0(x) = sum_{j=3}^{6} C(6,j) x^j (1-x)^{6-j} on [0,1]
      tabulated:   piecewise-linear through given (x, F) points

    Derivatives are declared per family: Erlang supports pdf and its
    derivative, Beta families support pdf only, tabulated supports neither.
    """

    family: str
    scale: float = 1.0
    table_x: np.ndarray | None = None
    table_f: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise InputDomainError(f"unknown family {self.family!r}")
        if not self.scale > 0.0:
            raise InputDomainError("scale must be positive")
        if self.family == "tabulated":
            xs = np.asarray(self.table_x, dtype=float)
            fs = np.asarray(self.table_f, dtype=float)
            if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 2:
                raise InputDomainError("tabulated family needs matching 1-d (x, F) arrays")
            if np.any(np.diff(xs) <= 0.0):
                raise InputDomainError("tabulated x values must be strictly increasing")
            if np.any(np.diff(fs) < 0.0) or fs[0] < 0.0 or abs(fs[-1] - 1.0) > 1e-12:
                raise InputDomainError("tabulated F must be nondecreasing from >=0 to 1")
            xs.flags.writeable = False
            fs.flags.writeable = False
            object.__setattr__(self, "table_x", xs)
            object.__setattr__(self, "table_f", fs)

    # -- support ------------------------------------------------------------

    @property
    def support_end(self) -> float:
        if self.family == "erlang(2,2)":
            return math.inf
        if self.family == "tabulated":
            return float(self.table_x[-1]) / self.scale
        return 1.0 / self.scale

    # -- evaluation ---------------------------------------------------------

    def _base_cdf(self, v: np.ndarray) -> np.ndarray:
        if self.family == "erlang(2,2)":
            w = np.clip(v, 0.0, _ERLANG_CLAMP)
            t = np.exp(-2.0 * w)
            return 1.0 - t * (1.0 + 2.0 * w)
        if self.family == "beta(2,2)":
            u = np.clip(v, 0.0, 1.0)
            return u * u * (3.0 - 2.0 * u)
        if self.family == "beta(3,4)":
            u = np.clip(v, 0.0, 1.0)
            c = 1.0 - u
            return (
                20.0 * u**3 * c**3
                + 15.0 * u**4 * c**2
                + 6.0 * u**5 * c
                + u**6
            )
        return np.interp(v, self.table_x, self.table_f, left=0.0, right=1.0)

    def cdf(self, x):
        arr, scalar = _split_scalar(x)
        out = self._base_cdf(self.scale * arr)
        return float(out) if scalar else out

    def cdf_left(self, x):
        """Left limit F(x-); differs from cdf only where F jumps (tabulated
        families with a positive value at their first support point)."""
        arr, scalar = _split_scalar(x)
        v = self.scale * arr
        if self.family == "tabulated" and self.table_f[0] > 0.0:
            out = np.where(v > self.table_x[0], self._base_cdf(v), 0.0)
        else:
            out = self._base_cdf(v)
        return float(out) if scalar else out

    def pdf(self, x):
        arr, scalar = _split_scalar(x)
        v = self.scale * arr
        if self.family == "erlang(2,2)":
            w = np.clip(v, 0.0, _ERLANG_CLAMP)
            out = self.scale * 4.0 * w * np.exp(-2.0 * w)
        elif self.family == "beta(2,2)":
            u = np.clip(v, 0.0, 1.0)
            out = self.scale * 6.0 * u * (1.0 - u)
        elif self.family == "beta(3,4)":
            u = np.clip(v, 0.0, 1.0)
            out = self.scale * 60.0 * u**2 * (1.0 - u) ** 3
        else:
            raise CapabilityError("tabulated family declares no density")
        return float(out) if scalar else out

    def pdf_prime(self, x):
        """Derivative of the density; Erlang only (Betas declare first order)."""
        if self.family != "erlang(2,2)":
            raise CapabilityError(f"{self.family} declares derivatives up to order 1 only")
        arr, scalar = _split_scalar(x)
        v = np.clip(self.scale * arr, 0.0, _ERLANG_CLAMP)
        out = np.where(
            arr < 0.0,
            0.0,
            self.scale**2 * 4.0 * np.exp(-2.0 * v) * (1.0 - 2.0 * v),
        )
        return float(out) if scalar else out

    def quantile(self, p: float, tol: float = 1e-12) -> float:
        """Inverse CDF by bisection (single sampling path for every family)."""
        if not 0.0 <= p <= 1.0:
            raise InputDomainError("quantile level must be in [0,1]")
        hi = self._quantile_hi(p)
        return bisect(self.cdf, p, 0.0, hi, tol)

    def _quantile_hi(self, pmax: float) -> float:
        if math.isfinite(self.support_end):
            return self.support_end
        hi = 4.0 / self.scale
        while self.cdf(hi) < pmax:
            hi *= 2.0
        return hi


def vector_quantile(dist: ParametricCdf, p: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Vectorized inverse CDF by bisection, for batch sampling."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return p.copy()
    hi = dist._quantile_hi(float(p.max()))
    return _vector_bisect(dist.cdf, p, 0.0, hi, tol)


def erlang22(scale: float = 1.0) -> ParametricCdf:
    return ParametricCdf(family="erlang(2,2)", scale=scale)


def beta22(scale: float = 1.0) -> ParametricCdf:
    return ParametricCdf(family="beta(2,2)", scale=scale)


def beta34(scale: float = 1.0) -> ParametricCdf:
    return ParametricCdf(family="beta(3,4)", scale=scale)


def tabulated_cdf(xs: Sequence[float], fs: Sequence[float], scale: float = 1.0) -> ParametricCdf:
    return ParametricCdf(
        family="tabulated",
        scale=scale,
        table_x=np.asarray(xs, dtype=float),
        table_f=np.asarray(fs, dtype=float),
    )


# ---------------------------------------------------------------------------
# dense linear algebra
# ---------------------------------------------------------------------------

_PIVOT_RTOL = 1e-13
_RESIDUAL_RTOL = 1e-10


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b by LU with partial pivoting.

    Raises SingularMatrixError when a pivot falls below 1e-13 relative to the
    matrix scale; guarantees ||ax - b||_inf <= 1e-10 * (1 + ||b||_inf), with
    one step of iterative refinement if plain substitution misses it.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputDomainError("matrix must be square")
    if b.shape != (a.shape[0],):
        raise InputDomainError("right-hand side has wrong length")
    row_scale = np.abs(a).max()
    if row_scale == 0.0:
        raise SingularMatrixError("zero matrix")
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < _PIVOT_RTOL * row_scale:
        raise SingularMatrixError(
            f"pivot {pivots.min():.3e} below {_PIVOT_RTOL:.0e} * scale {row_scale:.3e}"
        )
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    bound = _RESIDUAL_RTOL * (1.0 + float(np.abs(b).max(initial=0.0)))
    residual = float(np.abs(a @ x - b).max(initial=0.0))
    if residual > bound:
        x = x + scipy.linalg.lu_solve((lu, piv), b - a @ x, check_finite=False)
        residual = float(np.abs(a @ x - b).max(initial=0.0))
        if residual > bound:
            raise SingularMatrixError(
                f"residual {residual:.3e} exceeds bound {bound:.3e} after refinement"
            )
    return x


# ---------------------------------------------------------------------------
# dense linear programming
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """min objective . x  subject to  row . x <= rhs per row and box bounds.

    bounds holds one (lo, hi) pair per variable; None means unbounded on
    that side.
    """

    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    bounds: tuple[tuple[float | None, float | None], ...]

    def __post_init__(self) -> None:
        c = np.asarray(self.objective, dtype=float)
        rows = np.asarray(self.rows, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float)
        for arr in (c, rows, rhs):
            arr.flags.writeable = False
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "rhs", rhs)
        if rows.ndim != 2 or rows.shape[1] != c.size:
            raise InputDomainError("every constraint row must match the variable width")
        if rhs.shape != (rows.shape[0],):
            raise InputDomainError("one right-hand side per constraint row required")
        if len(self.bounds) != c.size:
            raise InputDomainError("one (lo, hi) bound pair per variable required")


def solve_lp(lp: LinearProgram) -> tuple[float, np.ndarray]:
    """Solve the LP; returns (optimal value, argmin).

    Optimum is accurate to ~1e-9 absolute on the small dense instances this
    package builds. Infeasible and unbounded problems raise distinct errors.
    """
    res = scipy.optimize.linprog(
        lp.objective,
        A_ub=lp.rows,
        b_ub=lp.rhs,
        bounds=list(lp.bounds),
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleProgramError(res.message)
    if res.status == 3:
        raise UnboundedProgramError(res.message)
    if res.status != 0:
        raise InputDomainError(f"LP solver failed: {res.message}")
    return float(res.fun), np.asarray(res.x, dtype=float)

"""CDFs as first-class values.

DiscreteDistribution is a finite measure on [0,1] given by sorted atoms; its
CDF is the right-continuous step function F(x) = sum of masses at locations
<= x, with the left limit exposed explicitly. sup_distance is exact (no grid
sampling): the supremum of |F_p - F_q| over the merged atom locations and
their left limits. PerformanceFunctional carries a declared total variation,
because the variation of a black-box evaluator is uncomputable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InputDomainError

__all__ = [
    "DiscreteDistribution",
    "discrete_distribution",
    "point_mass",
    "sup_distance",
    "PerformanceFunctional",
    "expectation",
    "variation_of_step",
]

_MERGE_TOL = 1e-14
_MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Normalized discrete distribution with sorted atom locations."""

    locations: np.ndarray
    masses: np.ndarray
    cumulative: np.ndarray

    @property
    def n_atoms(self) -> int:
        return int(self.locations.size)

    def cdf(self, x):
        """Right-continuous CDF F(x) = sum_{c_i <= x} pi_i."""
        idx = np.searchsorted(self.locations, x, side="right")
        padded = np.concatenate(([0.0], self.cumulative))
        out = padded[idx]
        return float(out) if np.ndim(x) == 0 else out

    def cdf_left(self, x):
        """Left limit F(x-) = sum_{c_i < x} pi_i."""
        idx = np.searchsorted(self.locations, x, side="left")
        padded = np.concatenate(([0.0], self.cumulative))
        out = padded[idx]
        return float(out) if np.ndim(x) == 0 else out

    def mass_at(self, x: float) -> float:
        return self.cdf(x) - self.cdf_left(x)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["location", "mass"])
            for loc, mass in zip(self.locations, self.masses):
                writer.writerow([f"{loc:.17g}", f"{mass:.17g}"])

    @staticmethod
    def read_csv(path: str | Path) -> "DiscreteDistribution":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["location", "mass"]:
                raise InputDomainError(f"unexpected header {header!r}")
            rows = [(float(a), float(b)) for a, b in reader]
        locs = np.array([r[0] for r in rows])
        masses = np.array([r[1] for r in rows])
        return discrete_distribution(locs, masses)


def discrete_distribution(
    locations: Sequence[float] | np.ndarray,
    masses: Sequence[float] | np.ndarray,
    *,
    keep_zero_atoms: bool = True,
) -> DiscreteDistribution:
    """Build a normalized DiscreteDistribution.

    Atoms closer than 1e-14 are merged (grid arithmetic produces
    near-duplicates); masses must be nonnegative and sum to 1 within 1e-12.
    Zero-mass atoms are kept by default so solver grids round-trip through
    CSV unchanged.
    """
    locs = np.asarray(locations, dtype=float).ravel()
    mass = np.asarray(masses, dtype=float).ravel()
    if locs.shape != mass.shape or locs.size == 0:
        raise InputDomainError("locations and masses must be matching nonempty arrays")
    if np.any(~np.isfinite(locs)) or np.any(~np.isfinite(mass)):
        raise InputDomainError("atoms must be finite")
    if mass.min(initial=0.0) < -_MASS_TOL:
        raise InputDomainError(f"negative atom mass {mass.min():.3e}")
    total = float(mass.sum())
    if abs(total - 1.0) > _MASS_TOL:
        raise InputDomainError(f"masses sum to {total!r}, expected 1 within {_MASS_TOL}")

    order = np.argsort(locs, kind="stable")
    locs = locs[order]
    mass = np.clip(mass[order], 0.0, None)

    # merge near-duplicate locations; the first location of a merged run wins
    keep = np.empty(locs.size, dtype=bool)
    keep[0] = True
    np.greater(np.diff(locs), _MERGE_TOL, out=keep[1:])
    group = np.cumsum(keep) - 1
    merged_locs = locs[keep]
    merged_mass = np.zeros(merged_locs.size)
    np.add.at(merged_mass, group, mass)

    if not keep_zero_atoms:
        nz = merged_mass > 0.0
        if not nz.any():
            nz[0] = True
        merged_locs, merged_mass = merged_locs[nz], merged_mass[nz]

    merged_mass = merged_mass / merged_mass.sum()
    cumulative = np.cumsum(merged_mass)
    cumulative[-1] = 1.0
    for arr in (merged_locs, merged_mass, cumulative):
        arr.flags.writeable = False
    return DiscreteDistribution(locations=merged_locs, masses=merged_mass, cumulative=cumulative)


def point_mass(location: float) -> DiscreteDistribution:
    return discrete_distribution([location], [1.0])


def sup_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Exact sup-norm distance ||F_p - F_q||_inf.

    The step CDFs change only at atoms, so the supremum is attained either at
    an atom of one of the distributions or as a left limit there; both sets
    are enumerated.
    """
    candidates = np.union1d(p.locations, q.locations)
    right = np.abs(p.cdf(candidates) - q.cdf(candidates))
    left = np.abs(p.cdf_left(candidates) - q.cdf_left(candidates))
    return float(max(right.max(initial=0.0), left.max(initial=0.0)))


@dataclass(frozen=True, eq=False)
class PerformanceFunctional:
    """A functional g on [0,1] with declared total variation and continuity.

    evaluator must accept ndarrays. total_variation is declared, not
    inferred; instances built by this package carry closed-form values.
    """

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    total_variation: float
    continuous: bool

    def __post_init__(self) -> None:
        if self.total_variation < 0.0:
            raise InputDomainError("total variation must be nonnegative")

    def __call__(self, x):
        out = self.evaluator(np.asarray(x, dtype=float))
        return float(out) if np.ndim(x) == 0 else np.asarray(out, dtype=float)


def expectation(g: PerformanceFunctional, p: DiscreteDistribution) -> float:
    """Expectation of g under p: sum_i g(c_i) * pi_i."""
    values = np.asarray(g.evaluator(p.locations), dtype=float)
    if values.shape != p.locations.shape:
        raise InputDomainError("functional evaluator must be vectorized over atoms")
    return float(np.dot(values, p.masses))


def variation_of_step(
    grid: Sequence[float] | np.ndarray,
    values: Sequence[float] | np.ndarray,
    jumps: Iterable[float] = (),
) -> float:
    """Total variation of a piecewise-smooth g described by grid samples.

    Sums adjacent absolute increments of the sampled values and adds the
    magnitudes of declared jump discontinuities not resolved by the grid.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.shape != values.shape:
        raise InputDomainError("grid and values must match")
    if np.any(np.diff(grid) < 0.0):
        raise InputDomainError("grid must be sorted")
    return float(np.abs(np.diff(values)).sum() + sum(abs(j) for j in jumps))

"""Trajectory-simulation baseline for the waiting-time chain.

Runs the arrival-to-arrival recursion forward from an empty system,
discards a burn-in prefix, and keeps one state every ``thinning`` steps
until ``samples`` states are collected. The collected states give an
empirical proxy for the stationary law; performance functionals are
summarized by their sample mean with a two-sided 99.9% CLT interval.

Draws come from three independent counter-based streams (interarrival,
service, patience), each spawned from the single run seed, so a run is
bit-reproducible and the per-stream sequences do not depend on how the
simulation is chunked.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InputDomainError
from .measures import DiscreteDistribution, discrete_distribution
from .numerics import vector_quantile
from .queueing import QueueModel, functionals

__all__ = [
    "McmcConfig",
    "McmcResult",
    "FunctionalStatistic",
    "run_mcmc",
    "one_step_samples",
    "dkw_band",
    "kolmogorov_distance",
    "write_samples_csv",
    "write_statistics_csv",
]

# Phi^{-1}(0.9995): two-sided 99.9% normal quantile
_Z_999 = 3.2905267314919255

_CHUNK = 1 << 16


@dataclass(frozen=True)
class McmcConfig:
    """Simulation schedule and seed.

    The chain starts at w = 0, takes ``burn_in`` unrecorded steps, then
    records one state every ``thinning`` steps until ``samples`` states
    are collected (the first record lands at step burn_in + thinning).
    """

    samples: int
    seed: int
    burn_in: int = 100_000
    thinning: int = 100

    def __post_init__(self) -> None:
        for name in ("samples", "seed", "burn_in", "thinning"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)):
                raise InputDomainError(f"{name} must be an integer, got {value!r}")
        if min(self.burn_in, self.thinning) <= 0:
            raise InputDomainError("burn_in and thinning must be positive")
        if self.samples < 2:
            raise InputDomainError("need at least 2 samples for a sample variance")
        if not 1 <= self.seed < 2**64:
            raise InputDomainError("seed must be a positive 64-bit integer")


@dataclass(frozen=True)
class FunctionalStatistic:
    """Sample mean of one functional and its 99.9% CLT half-width."""

    name: str
    mean: float
    ci_half_width: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.ci_half_width)):
            raise InputDomainError("statistic must be finite")
        if self.ci_half_width < 0.0:
            raise InputDomainError("half-width must be nonnegative")


@dataclass(frozen=True, eq=False)
class McmcResult:
    """Thinned samples with their empirical law and functional summaries.

    ``empirical`` puts mass 1/N on every sample; exact duplicates (the
    idle-server atom at 0 in particular) merge into one atom. Functional
    statistics are computed from the raw samples, not the merged atoms.
    """

    empirical: DiscreteDistribution
    statistics: tuple[FunctionalStatistic, ...]
    samples: np.ndarray
    config: McmcConfig

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size != self.config.samples:
            raise InputDomainError("samples must be one draw per configured slot")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def statistic(self, name: str) -> FunctionalStatistic:
        for stat in self.statistics:
            if stat.name == name:
                return stat
        raise InputDomainError(f"no statistic named {name!r}")


def _spawn_streams(seed: int) -> tuple[np.random.Generator, ...]:
    # one child stream per draw kind, so the streams stay aligned no
    # matter how many draws each consumes
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.Philox(child)) for child in children)


def _simulate(model: QueueModel, config: McmcConfig) -> np.ndarray:
    """Thinned trajectory of the recursion, one chunk of draws at a time.

    The update is the vwt_step rule inlined (a test pins the agreement);
    every step consumes one (t, s, y) triple whether or not the customer
    joins, which keeps the streams aligned across variants.
    """
    total = config.burn_in + config.samples * config.thinning
    t_rng, s_rng, y_rng = _spawn_streams(config.seed)
    out = np.empty(config.samples)
    w = 0.0
    step = 0
    filled = 0
    next_record = config.burn_in + config.thinning
    while step < total:
        n = min(_CHUNK, total - step)
        ts = vector_quantile(model.arrival, t_rng.random(n)).tolist()
        ss = vector_quantile(model.service, s_rng.random(n)).tolist()
        ys = vector_quantile(model.patience, y_rng.random(n)).tolist()
        for t, s, y in zip(ts, ss, ys):
            if y > w:
                w = w + s - t
            else:
                w = w - t
            if w < 0.0:
                w = 0.0
            step += 1
            if step == next_record:
                out[filled] = w
                filled += 1
                next_record += config.thinning
    return out


def run_mcmc(model: QueueModel, config: McmcConfig) -> McmcResult:
    """Simulate the chain and summarize the collected samples.

    The half-width is z * std / sqrt(N) with the sample (ddof=1) standard
    deviation and z the 99.9% two-sided normal quantile.
    """
    samples = _simulate(model, config)
    n = config.samples
    empirical = discrete_distribution(samples, np.full(n, 1.0 / n))
    stats = []
    for phi in functionals(model):
        values = phi(samples)
        stats.append(
            FunctionalStatistic(
                name=phi.name,
                mean=float(values.mean()),
                ci_half_width=_Z_999 * float(values.std(ddof=1)) / math.sqrt(n),
            )
        )
    return McmcResult(
        empirical=empirical, statistics=tuple(stats), samples=samples, config=config
    )


def one_step_samples(model: QueueModel, u: float, n: int, seed: int) -> np.ndarray:
    """n independent one-arrival updates from the fixed state u.

    The empirical law of the output estimates the transition kernel's
    slice at u, which a distribution-free band can compare against the
    closed form.
    """
    if not 0.0 <= u <= 1.0:
        raise InputDomainError("state must be in [0,1]")
    if n <= 0:
        raise InputDomainError("sample count must be positive")
    t_rng, s_rng, y_rng = _spawn_streams(seed)
    out = np.empty(n)
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        t = vector_quantile(model.arrival, t_rng.random(m))
        s = vector_quantile(model.service, s_rng.random(m))
        y = vector_quantile(model.patience, y_rng.random(m))
        gain = np.where(y > u, s, 0.0)
        out[done : done + m] = np.maximum(u + gain - t, 0.0)
        done += m
    return out


def dkw_band(n: int, alpha: float) -> float:
    """Distribution-free sup-norm radius sqrt(ln(2/alpha) / (2n)).

    With probability at least 1 - alpha, the empirical CDF of n iid draws
    stays within this band of the true CDF. alpha = 2 gives radius 0 (the
    bound is vacuous there but the formula still applies).
    """
    if n <= 0:
        raise InputDomainError("sample count must be positive")
    if not 0.0 < alpha <= 2.0:
        raise InputDomainError("alpha must be in (0, 2]")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def kolmogorov_distance(
    samples: np.ndarray,
    cdf: Callable[[np.ndarray], np.ndarray],
    cdf_left: Callable[[np.ndarray], np.ndarray] | None = None,
) -> float:
    """sup-norm distance between an empirical CDF and a target CDF.

    Pass ``cdf_left`` when the target has atoms; otherwise the left limit
    at a repeated sample would be compared against the post-jump value
    and the distance overstated.
    """
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise InputDomainError("need at least one sample")
    values, counts = np.unique(arr, return_counts=True)
    upper = np.cumsum(counts)
    lower = (upper - counts) / arr.size
    upper = upper / arr.size
    f_right = np.asarray(cdf(values), dtype=float)
    f_left = f_right if cdf_left is None else np.asarray(cdf_left(values), dtype=float)
    gap = max(np.abs(upper - f_right).max(), np.abs(lower - f_left).max())
    return float(gap)


def write_samples_csv(result: McmcResult, path: str | Path) -> None:
    """Thinned trajectory in collection order, schema ``index,w``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "w"])
        for index, w in enumerate(result.samples):
            writer.writerow([index, f"{w:.17g}"])


def write_statistics_csv(result: McmcResult, path: str | Path) -> None:
    """Functional summaries, schema ``functional,mean,ci_half_width,N,seed``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["functional", "mean", "ci_half_width", "N", "seed"])
        for stat in result.statistics:
            writer.writerow(
                [
                    stat.name,
                    f"{stat.mean:.17g}",
                    f"{stat.ci_half_width:.17g}",
                    result.config.samples,
                    result.config.seed,
                ]
            )

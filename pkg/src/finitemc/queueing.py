"""Single-server queue with impatient customers (G/G/1+G).

The virtual waiting time just after an arrival follows a one-dimensional
recursion: an arriving customer joins only if their patience exceeds the
current wait, in which case the wait grows by their service requirement,
and between arrivals it drains at unit rate. With patience and service
supports short enough that waits never exceed 1, the recursion is a Markov
chain on [0,1] and fits the truncation-and-certificate pipeline directly.

The transition CDF is kbar(x, u) = Gbar(u) D(x - u) + G(u) Astar(u - x)
where G is the patience law, Astar the right tail of the interarrival law,
and D(z) the chance that the next interarrival absorbs a service started z
below it. D is the only quadrature in the model; its integrand has a kink
where the interarrival tail saturates at 1, so the integral is always split
there. Bulk kernel evaluation goes through a dense lookup table of D; small
batches use the quadrature directly so accuracy tests exercise it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, InputDomainError, RegimeError
from .kernels import KernelHandle
from .measures import DiscreteDistribution, PerformanceFunctional, point_mass
from .numerics import ParametricCdf, QuadratureRule, beta22, beta34, bisect, erlang22, gauss_legendre

__all__ = [
    "QueueModel",
    "VwtState",
    "queue_model",
    "model_a",
    "model_b",
    "vwt_kernel",
    "functionals",
    "vwt_step",
    "fluid_approximation",
    "load_queue_config",
]

_FAMILY_BUILDERS: dict[str, Callable[[float], ParametricCdf]] = {
    "erlang(2,2)": erlang22,
    "beta(2,2)": beta22,
    "beta(3,4)": beta34,
}

# closed-form maxima of the base densities (and of |f'| where declared);
# re-verified at model build time by grid search
_BASE_PDF_MAX = {
    "erlang(2,2)": 2.0 * math.exp(-1.0),  # 4x e^{-2x} peaks at x = 1/2
    "beta(2,2)": 1.5,  # 6x(1-x) peaks at x = 1/2
    "beta(3,4)": 60.0 * 0.4**2 * 0.6**3,  # 60x^2(1-x)^3 peaks at x = 2/5
}
_BASE_PDF_PRIME_MAX = {
    "erlang(2,2)": 4.0,  # |4e^{-2x}(1-2x)| peaks at x = 0
}

_VERIFY_GRID = 10_000
_VERIFY_TOL = 1e-6
_RATE_TOL = 1e-6

# kernel evaluation: batches above this size go through the D table
_DIRECT_LIMIT = 4096
_TABLE_CELLS = 1 << 21


@dataclass(frozen=True, eq=False)
class QueueModel:
    """Arrival, service, and patience laws plus the shared quadrature rule.

    Conventions: A(x) = A0(lam * x), B(x) = B0(mu * x / 2), G(x) = G0(2x).
    a1 bounds the arrival density, a2 its derivative (None when the family
    declares no second order), g1 the patience density; these feed the
    kernel's Lipschitz metadata.
    """

    lam: float
    mu: float
    arrival: ParametricCdf
    service: ParametricCdf
    patience: ParametricCdf
    s_bar: float
    y_bar: float
    quadrature: QuadratureRule
    a1: float
    a2: float | None
    g1: float


@dataclass(frozen=True)
class VwtState:
    """Virtual waiting time seen by an arriving customer."""

    w: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.w <= 1.0:
            raise InputDomainError(f"waiting time {self.w!r} outside [0,1]")


def _verified_density_max(dist: ParametricCdf, family: str) -> float:
    """Declared base-density maximum, cross-checked by grid search."""
    base_max = _BASE_PDF_MAX[family]
    expected = dist.scale * base_max
    span = dist.support_end if math.isfinite(dist.support_end) else 5.0 / dist.scale
    xs = np.linspace(0.0, span, _VERIFY_GRID + 1)
    found = float(dist.pdf(xs).max())
    if abs(found - expected) > _VERIFY_TOL * max(1.0, expected):
        raise InputDomainError(
            f"density maximum {found:.8g} disagrees with closed form {expected:.8g} for {family}"
        )
    return expected


def _verified_density_prime_max(dist: ParametricCdf, family: str) -> float | None:
    base_max = _BASE_PDF_PRIME_MAX.get(family)
    if base_max is None:
        return None
    expected = dist.scale**2 * base_max
    span = dist.support_end if math.isfinite(dist.support_end) else 5.0 / dist.scale
    xs = np.linspace(0.0, span, _VERIFY_GRID + 1)
    found = float(np.abs(dist.pdf_prime(xs)).max())
    if abs(found - expected) > _VERIFY_TOL * max(1.0, expected):
        raise InputDomainError(
            f"density-derivative maximum {found:.8g} disagrees with closed form {expected:.8g}"
        )
    return expected


def _verify_arrival_rate(arrival: ParametricCdf, lam: float) -> None:
    """The rate convention demands mean interarrival 1/lam (unit-mean base)."""
    rule = gauss_legendre(40, 10)
    span = 20.0 / lam  # tail mass beyond is ~e^{-40}
    mean = rule.integrate_on(0.0, span, lambda x: 1.0 - arrival.cdf(x))
    if abs(mean - 1.0 / lam) > _RATE_TOL:
        raise InputDomainError(
            f"arrival mean {mean:.8g} is not 1/lambda = {1.0 / lam:.8g}; rate convention violated"
        )


def queue_model(
    lam: float,
    mu: float,
    arrival_family: str = "erlang(2,2)",
    service_family: str = "beta(2,2)",
    patience_family: str = "beta(3,4)",
    quadrature_panels: int = 16,
    quadrature_points: int = 8,
) -> QueueModel:
    """Assemble and validate a queue model.

    Requires y_bar + s_bar <= 1 so waits stay in [0,1]; the unit-mean base
    convention for the arrival law is verified numerically when the family
    declares a density with that property (the Erlang base).
    """
    if lam <= 0.0 or mu <= 0.0:
        raise InputDomainError("rates must be positive")
    for name in (arrival_family, service_family, patience_family):
        if name not in _FAMILY_BUILDERS:
            raise InputDomainError(f"unknown distribution family {name!r}")

    arrival = _FAMILY_BUILDERS[arrival_family](lam)
    service = _FAMILY_BUILDERS[service_family](0.5 * mu)
    patience = _FAMILY_BUILDERS[patience_family](2.0)
    s_bar = service.support_end
    y_bar = patience.support_end
    if not math.isfinite(s_bar) or not math.isfinite(y_bar):
        raise InputDomainError("service and patience must have bounded support")
    if y_bar + s_bar > 1.0 + 1e-12:
        raise InputDomainError(
            f"support violation: y_bar + s_bar = {y_bar + s_bar:.6g} exceeds 1"
        )
    if arrival_family == "erlang(2,2)":
        _verify_arrival_rate(arrival, lam)

    a1 = _verified_density_max(arrival, arrival_family)
    a2 = _verified_density_prime_max(arrival, arrival_family)
    g1 = _verified_density_max(patience, patience_family)
    return QueueModel(
        lam=lam,
        mu=mu,
        arrival=arrival,
        service=service,
        patience=patience,
        s_bar=s_bar,
        y_bar=y_bar,
        quadrature=gauss_legendre(quadrature_panels, quadrature_points),
        a1=a1,
        a2=a2,
        g1=g1,
    )


def model_a() -> QueueModel:
    return queue_model(4.1, 4.0)


def model_b() -> QueueModel:
    return queue_model(5.0, 4.0)


# ---------------------------------------------------------------------------
# the transition kernel
# ---------------------------------------------------------------------------


class _OvershootIntegral:
    """D(z) = integral over service s of Astar(s - z) dB(s).

    Astar saturates at 1 for nonpositive arguments, so the integrand is
    smooth only above s = z; the integral therefore always starts at
    clip(z, 0, s_bar) with the saturated part contributing B(z) exactly.
    A dense uniform table over [-1, s_bar] serves bulk queries by linear
    interpolation; direct quadrature serves small ones.
    """

    def __init__(self, model: QueueModel):
        self._model = model
        self._nodes = model.quadrature.nodes
        self._weights = model.quadrature.weights
        self._table: np.ndarray | None = None
        self._z0 = -1.0
        self._dz = (model.s_bar - self._z0) / _TABLE_CELLS

    def _tail(self, v: np.ndarray) -> np.ndarray:
        return 1.0 - self._model.arrival.cdf_left(v)

    def direct(self, z: np.ndarray) -> np.ndarray:
        """Split quadrature, exact branches for z outside (0, s_bar)."""
        m = self._model
        z = np.asarray(z, dtype=float)
        lo = np.clip(z, 0.0, m.s_bar)
        span = m.s_bar - lo
        nodes = lo[..., None] + span[..., None] * self._nodes
        weights = span[..., None] * self._weights
        smooth = (weights * self._tail(nodes - z[..., None]) * m.service.pdf(nodes)).sum(axis=-1)
        return np.clip(m.service.cdf(lo) + smooth, 0.0, 1.0)

    def _build_table(self) -> np.ndarray:
        zs = self._z0 + self._dz * np.arange(_TABLE_CELLS + 1)
        table = np.empty(zs.size)
        block = 32_768
        for start in range(0, zs.size, block):
            table[start : start + block] = self.direct(zs[start : start + block])
        table[-1] = 1.0  # z = s_bar exactly
        return table

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.size <= _DIRECT_LIMIT:
            return self.direct(z)
        if self._table is None:
            self._table = self._build_table()
        out = np.empty(z.shape)
        saturated = z >= self._model.s_bar
        out[saturated] = 1.0
        rest = ~saturated
        t = (z[rest] - self._z0) / self._dz
        idx = np.clip(t.astype(np.int64), 0, _TABLE_CELLS - 1)
        frac = t - idx
        table = self._table
        out[rest] = table[idx] * (1.0 - frac) + table[idx + 1] * frac
        return out


def vwt_kernel(model: QueueModel) -> KernelHandle:
    """Transition CDF of the waiting-time chain, with certified metadata.

    kbar(x, u) = Gbar(u) D(x - u) + G(u) Astar(u - x): a patient customer
    pushes the wait up by a service time before it drains, an impatient one
    lets it drain outright. The declared Lipschitz data comes from the
    verified density maxima: lipschitz_x = a1, lipschitz_u = g1 + a1.
    """
    overshoot = _OvershootIntegral(model)
    patience = model.patience
    arrival = model.arrival

    def evaluator(x, u):
        xa, ua = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
        z = xa - ua
        stay = 1.0 - patience.cdf(ua)
        leave = patience.cdf(ua)
        drained = 1.0 - arrival.cdf_left(-z)
        return np.clip(stay * overshoot(z) + leave * drained, 0.0, 1.0)

    def pushforward(xs: np.ndarray, dist: DiscreteDistribution) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.size)
        block = max(1, (1 << 21) // max(xs.size, 1))
        for start in range(0, dist.n_atoms, block):
            locs = dist.locations[start : start + block]
            mass = dist.masses[start : start + block]
            vals = evaluator(xs[None, :], locs[:, None])
            out += mass @ vals
        return out

    mixed = None if model.a2 is None else 2.0 * model.g1 * model.a1 + model.a2
    return KernelHandle(
        evaluator=evaluator,
        lipschitz_x=model.a1,
        lipschitz_u=model.g1 + model.a1,
        mixed_bound=mixed,
        edge_bound=model.a1,
        pushforward=pushforward,
    )


# ---------------------------------------------------------------------------
# performance functionals
# ---------------------------------------------------------------------------


def _patience_survival_integral(model: QueueModel, x: np.ndarray) -> np.ndarray:
    """h(x) = integral of (1 - G) from 0 to x; constant above y_bar."""
    flat = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    upper = np.minimum(flat, model.y_bar)
    rule = model.quadrature
    nodes = upper[:, None] * rule.nodes[None, :]
    vals = upper * ((1.0 - model.patience.cdf(nodes)) @ rule.weights)
    return vals.reshape(np.shape(x)) if np.ndim(x) else vals[0]


def functionals(model: QueueModel) -> tuple[PerformanceFunctional, ...]:
    """The three stationary performance measures of the queue.

    no_wait: chance an arriving customer starts service immediately (mass of
    the law at 0). abandonment: chance the customer's patience runs out
    before their wait. queue_length: mean number waiting, lam times the mean
    truncated patience h(w).
    """
    h_top = float(_patience_survival_integral(model, model.y_bar))

    no_wait = PerformanceFunctional(
        name="no_wait",
        evaluator=lambda x: (np.asarray(x, dtype=float) == 0.0).astype(float),
        total_variation=1.0,
        continuous=False,
    )
    abandonment = PerformanceFunctional(
        name="abandonment",
        evaluator=model.patience.cdf,
        total_variation=float(model.patience.cdf(1.0)),
        continuous=True,
    )
    queue_length = PerformanceFunctional(
        name="queue_length",
        evaluator=lambda x: model.lam * _patience_survival_integral(model, x),
        total_variation=model.lam * h_top,
        continuous=True,
    )
    return no_wait, abandonment, queue_length


# ---------------------------------------------------------------------------
# recursion and fluid limit
# ---------------------------------------------------------------------------


def vwt_step(model: QueueModel, state: VwtState, t: float, s: float, y: float) -> VwtState:
    """One arrival-to-arrival update of the waiting time.

    The customer joins iff their patience y exceeds the current wait; the
    wait then drains by the interarrival time t, floored at an idle server.
    """
    if min(t, s, y) < 0.0:
        raise InputDomainError("draws must be nonnegative")
    if y > state.w:
        return VwtState(w=max(state.w + s - t, 0.0))
    return VwtState(w=max(state.w - t, 0.0))


def fluid_approximation(model: QueueModel) -> tuple[float, DiscreteDistribution]:
    """Deterministic overload limit: the wait settles where the effective
    arrival rate (customers patient enough to join) matches the service rate,
    giving G(w) = 1 - mu/lam."""
    if model.lam <= model.mu:
        raise RegimeError(
            f"fluid approximation needs overload (lambda > mu), got {model.lam} <= {model.mu}"
        )
    target = 1.0 - model.mu / model.lam
    w_fluid = bisect(model.patience.cdf, target, 0.0, model.y_bar, tol=1e-12)
    return w_fluid, point_mass(w_fluid)


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

_CONFIG_KEYS = (
    "lambda",
    "mu",
    "arrival_family",
    "service_family",
    "patience_family",
    "quadrature_panels",
    "quadrature_points",
)


def load_queue_config(path: str | Path) -> QueueModel:
    """Read a `key = value` model file; lambda and mu are required."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value.strip()

    for required in ("lambda", "mu"):
        if required not in values:
            raise ConfigError(f"{path}: missing required key {required!r}")
    try:
        lam = float(values["lambda"])
        mu = float(values["mu"])
        panels = int(values.get("quadrature_panels", "16"))
        points = int(values.get("quadrature_points", "8"))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return queue_model(
            lam,
            mu,
            arrival_family=values.get("arrival_family", "erlang(2,2)"),
            service_family=values.get("service_family", "beta(2,2)"),
            patience_family=values.get("patience_family", "beta(3,4)"),
            quadrature_panels=panels,
            quadrature_points=points,
        )
    except InputDomainError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

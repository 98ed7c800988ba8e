"""How many users an RRH can serve at a target SINR.

Path loss gives the received power at distance ``d``; modelling the RRH as an
M/M/1 queue gives the number of interferers as a function of load. Solving
the SINR constraint for the load yields a closed form, which is then averaged
over the user-distance distribution.

All powers are in watts and SINR values are linear. dB conversions are the
caller's job (see :func:`db_to_linear`, :func:`noise_power`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


class InfeasibleSinrError(ValueError):
    """The SINR target cannot be met at the requested distance."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def noise_power(bandwidth_hz: float, density_dbm_hz: float = -174.0) -> float:
    """Thermal noise over ``bandwidth_hz`` in watts."""
    dbm = density_dbm_hz + 10.0 * math.log10(bandwidth_hz)
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class RadioParams:
    k: float = 9.89e-5
    d0: float = 1.0
    alpha: float = 3.0
    noise: float = noise_power(20e6)
    sinr_min: float = db_to_linear(-5.0)
    mu: float = 0.8

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive")
        if not self.d0 > 0:
            raise ValueError("d0 must be positive")
        if not self.alpha >= 1:
            raise ValueError("alpha must be >= 1")
        if not self.noise > 0:
            raise ValueError("noise must be positive")
        if not self.sinr_min > 0:
            raise ValueError("sinr_min must be positive (linear scale)")
        if not 0 < self.mu <= 1:
            raise ValueError("mu must lie in (0, 1]")

    @classmethod
    def from_db(cls, sinr_min_db: float, bandwidth_hz: float = 20e6, mu: float = 0.8, **kw) -> "RadioParams":
        return cls(sinr_min=db_to_linear(sinr_min_db), noise=noise_power(bandwidth_hz), mu=mu, **kw)


def received_power(params: RadioParams, d):
    """Far-field received power ``k (d0/d)^alpha``."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < params.d0):
        raise ValueError(f"distance below reference distance d0={params.d0}")
    out = params.k * (params.d0 / d_arr) ** params.alpha
    return float(out) if out.ndim == 0 else out


def _unclamped(params: RadioParams, capacity: float, power):
    s, n = params.sinr_min, params.noise
    num = power * (1.0 + s) - s * n
    den = power * (1.0 + 2.0 * s) - s * n
    return capacity / params.mu * num / den, num, den


def qoe_users_at_distance(params: RadioParams, capacity: float, d: float, clamp: bool = True) -> float:
    """Maximum users RRH can serve when every user sits at distance ``d``.

    With ``clamp`` (the default) the result is limited to ``[0, capacity]``;
    the queue cannot be stable above its service rate.
    """
    value, num, den = _unclamped(params, capacity, received_power(params, d))
    if den <= 0 or num < 0:
        raise InfeasibleSinrError(f"SINR target {params.sinr_min:.4g} unreachable at d={d} m")
    if clamp:
        value = min(max(value, 0.0), capacity)
    return float(value)


def qoe_users_profile(params: RadioParams, capacity: float, d) -> np.ndarray:
    """Vectorised clamped N_r(d); infeasible distances give 0 and ``d < d0`` uses ``d0``."""
    d = np.maximum(np.asarray(d, dtype=float), params.d0)
    value, num, den = _unclamped(params, capacity, params.k * (params.d0 / d) ** params.alpha)
    ok = (num >= 0) & (den > 0)
    return np.where(ok, np.clip(value, 0.0, capacity), 0.0)


def sinr_at_load(params: RadioParams, capacity: float, d: float, users: float) -> float:
    """SINR seen at distance ``d`` when the RRH serves ``users`` users.

    Interferers follow the M/M/1 mean occupancy minus the user itself; this
    can be negative at very light load and is used as written.
    """
    p = received_power(params, d)
    rate = params.mu * users
    interferers = rate / (capacity - rate) - 1.0
    return p / (params.noise + interferers * p)


def feasibility_radius(params: RadioParams) -> float:
    """Distance beyond which the SINR target is unreachable at any load."""
    s = params.sinr_min
    p_min = s * params.noise / (1.0 + s)
    return params.d0 * (params.k / p_min) ** (1.0 / params.alpha)


def clamp_radius(params: RadioParams) -> float | None:
    """Distance inside which N_r(d) saturates at capacity, or None if never."""
    s, mu = params.sinr_min, params.mu
    coef = 1.0 + s - mu * (1.0 + 2.0 * s)
    if coef <= 0:
        return None
    p_c = s * params.noise * (1.0 - mu) / coef
    return params.d0 * (params.k / p_c) ** (1.0 / params.alpha)


@dataclass(frozen=True)
class DistanceDensity:
    """Distance pdf with support inside ``[0, d_max]``.

    ``breakpoints`` are interior points where the pdf is not smooth; the
    integrator splits there.
    """

    pdf: Callable[[np.ndarray], np.ndarray]
    d_max: float
    d_min: float = 0.0
    breakpoints: tuple[float, ...] = ()
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None

    @classmethod
    def uniform_disk(cls, radius: float) -> "DistanceDensity":
        """Users uniform over a disk of ``radius`` around the RRH: f(d) = 2d/radius^2."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        return cls(
            pdf=lambda d: 2.0 * np.asarray(d, dtype=float) / radius**2,
            d_max=radius,
            sampler=lambda rng, n: radius * np.sqrt(rng.random(n)),
        )

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "DistanceDensity":
        if not 0 <= lo < hi:
            raise ValueError("need 0 <= lo < hi")
        return cls(
            pdf=lambda d: np.full_like(np.asarray(d, dtype=float), 1.0 / (hi - lo)),
            d_max=hi,
            d_min=lo,
            sampler=lambda rng, n: rng.uniform(lo, hi, n),
        )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sampler is None:
            raise NotImplementedError("density has no sampler")
        return self.sampler(rng, n)


class QoeEstimate(NamedTuple):
    value: float
    infeasible_mass: float
    panels: int


class QuadratureError(RuntimeError):
    pass


def _simpson(f, a: float, b: float, rtol: float, max_panels: int) -> tuple[float, int]:
    panels = 2
    prev = None
    while True:
        x = np.linspace(a, b, panels + 1)
        y = f(x)
        h = (b - a) / panels
        est = h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())
        if prev is not None and abs(est - prev) <= rtol * max(abs(est), 1e-300):
            return est, panels
        if prev is not None and est == 0.0 and prev == 0.0:
            return 0.0, panels
        if panels >= max_panels:
            raise QuadratureError(f"Simpson did not reach rtol={rtol} with {panels} panels")
        prev = est
        panels *= 2


def expected_qoe_users(
    params: RadioParams,
    capacity: float,
    density: DistanceDensity,
    rtol: float = 1e-8,
    max_panels: int = 2**20,
) -> QoeEstimate:
    """Average N_r(d) over the user-distance density.

    Distances where the SINR target is infeasible contribute zero; their
    probability mass is reported as ``infeasible_mass``. Distances below
    ``d0`` are evaluated at ``d0``.
    """
    lo, hi = density.d_min, density.d_max
    cuts = {lo, hi, *density.breakpoints}
    d_f = feasibility_radius(params)
    d_c = clamp_radius(params)
    for c in (params.d0, d_f, d_c):
        if c is not None and lo < c < hi:
            cuts.add(c)
    cuts = sorted(cuts)

    def integrand(d):
        return density.pdf(d) * qoe_users_profile(params, capacity, d)

    total = mass = 0.0
    used = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        if a >= d_f:
            # whole piece is beyond reach; only its probability mass matters
            m, n_p = _simpson(density.pdf, a, b, rtol, max_panels)
            mass += m
            used += n_p
            continue
        v, n_p = _simpson(integrand, a, b, rtol, max_panels)
        total += v
        used += n_p
    return QoeEstimate(float(total), float(mass), used)

"""Domain types for a RAN cluster: radio heads, virtual operators, allocations.

An allocation policy is a plain ``(M, R)`` float array: row ``m`` holds how
many users MVNO ``m`` routes through each of the ``R`` radio heads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Sequence

import numpy as np

CONSERVATION_RTOL = 1e-9


@dataclass(frozen=True)
class Rrh:
    id: Hashable
    position: tuple[float, float]
    class_id: int
    price: float
    capacity: float
    qoe_users: float

    def __post_init__(self):
        if not self.capacity > 0:
            raise ValueError(f"RRH {self.id!r}: capacity must be positive, got {self.capacity}")
        if not self.price >= 0:
            raise ValueError(f"RRH {self.id!r}: price must be non-negative, got {self.price}")
        if not self.qoe_users > 0:
            raise ValueError(f"RRH {self.id!r}: qoe_users must be positive, got {self.qoe_users}")
        if self.class_id < 0:
            raise ValueError(f"RRH {self.id!r}: negative class id")


@dataclass(frozen=True)
class Mvno:
    id: Hashable
    user_count: float
    price_weight: float

    def __post_init__(self):
        if not self.user_count >= 0:
            raise ValueError(f"MVNO {self.id!r}: user_count must be >= 0")
        if not self.price_weight >= 0:
            raise ValueError(f"MVNO {self.id!r}: price_weight must be >= 0")


@dataclass(frozen=True)
class GameInstance:
    """A cluster's radio heads and competing MVNOs.

    Player and resource indices follow list order. The numpy views below are
    read-only and computed once.
    """

    rrhs: tuple[Rrh, ...]
    mvnos: tuple[Mvno, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rrhs", tuple(self.rrhs))
        object.__setattr__(self, "mvnos", tuple(self.mvnos))
        if not self.rrhs:
            raise ValueError("game needs at least one RRH")
        if not self.mvnos:
            raise ValueError("game needs at least one MVNO")

    @classmethod
    def from_arrays(
        cls,
        qoe_users: Sequence[float],
        user_counts: Sequence[float],
        prices: Sequence[float] | None = None,
        price_weights: Sequence[float] | None = None,
        capacity: Sequence[float] | float | None = None,
    ) -> "GameInstance":
        """Build a game from raw parameter vectors (positions zeroed)."""
        qoe = np.asarray(qoe_users, dtype=float)
        n = np.asarray(user_counts, dtype=float)
        R, M = qoe.size, n.size
        p = np.zeros(R) if prices is None else np.asarray(prices, dtype=float)
        w = np.zeros(M) if price_weights is None else np.asarray(price_weights, dtype=float)
        cap = qoe if capacity is None else np.broadcast_to(np.asarray(capacity, dtype=float), (R,))
        rrhs = tuple(
            Rrh(id=r, position=(0.0, 0.0), class_id=0, price=float(p[r]),
                capacity=float(cap[r]), qoe_users=float(qoe[r]))
            for r in range(R)
        )
        mvnos = tuple(Mvno(id=m, user_count=float(n[m]), price_weight=float(w[m])) for m in range(M))
        return cls(rrhs, mvnos)

    def with_prices(self, prices: Sequence[float]) -> "GameInstance":
        prices = np.asarray(prices, dtype=float)
        if prices.shape != (self.n_rrhs,):
            raise ValueError("one price per RRH expected")
        rrhs = tuple(
            Rrh(r.id, r.position, r.class_id, float(p), r.capacity, r.qoe_users)
            for r, p in zip(self.rrhs, prices)
        )
        return GameInstance(rrhs, self.mvnos)

    def with_user_counts(self, user_counts: Sequence[float]) -> "GameInstance":
        mvnos = tuple(
            Mvno(m.id, float(n), m.price_weight) for m, n in zip(self.mvnos, user_counts, strict=True)
        )
        return GameInstance(self.rrhs, mvnos)

    def permuted(self, order: Sequence[int]) -> "GameInstance":
        """Same game with MVNOs relabelled: new player ``i`` is old ``order[i]``."""
        return GameInstance(self.rrhs, tuple(self.mvnos[i] for i in order))

    @property
    def n_rrhs(self) -> int:
        return len(self.rrhs)

    @property
    def n_mvnos(self) -> int:
        return len(self.mvnos)

    def _array(self, key, build):
        arr = self._cache.get(key)
        if arr is None:
            arr = np.asarray(build(), dtype=float)
            arr.setflags(write=False)
            self._cache[key] = arr
        return arr

    @property
    def qoe_users(self) -> np.ndarray:
        """N_r for every RRH, shape (R,)."""
        return self._array("qoe", lambda: [r.qoe_users for r in self.rrhs])

    @property
    def capacities(self) -> np.ndarray:
        return self._array("cap", lambda: [r.capacity for r in self.rrhs])

    @property
    def prices(self) -> np.ndarray:
        return self._array("price", lambda: [r.price for r in self.rrhs])

    @property
    def user_counts(self) -> np.ndarray:
        """n_m for every MVNO, shape (M,)."""
        return self._array("n", lambda: [m.user_count for m in self.mvnos])

    @property
    def price_weights(self) -> np.ndarray:
        return self._array("w", lambda: [m.price_weight for m in self.mvnos])

    @property
    def price_terms(self) -> np.ndarray:
        """Per-player, per-RRH monetary weight pi_m * p_r, shape (M, R)."""
        return self._array("eta", lambda: np.outer(self.price_weights, self.prices))

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([r.position for r in self.rrhs], dtype=float)


def feasible_uniform(game: GameInstance) -> np.ndarray:
    """Every MVNO spreads its users evenly over all RRHs."""
    n = game.user_counts
    return np.repeat((n / game.n_rrhs)[:, None], game.n_rrhs, axis=1)


def random_feasible(game: GameInstance, rng: np.random.Generator) -> np.ndarray:
    """A random point of the strategy space (Dirichlet rows scaled by n_m)."""
    rows = rng.dirichlet(np.ones(game.n_rrhs), size=game.n_mvnos)
    return rows * game.user_counts[:, None]


def check_policy(game: GameInstance, xi: np.ndarray, rtol: float = CONSERVATION_RTOL) -> np.ndarray:
    """Validate shape, sign and row conservation; return ``xi`` as a float array."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (game.n_mvnos, game.n_rrhs):
        raise ValueError(f"policy shape {xi.shape} != {(game.n_mvnos, game.n_rrhs)}")
    if np.any(xi < 0):
        raise ValueError("policy has negative entries")
    n = game.user_counts
    err = np.abs(xi.sum(axis=1) - n)
    if np.any(err > rtol * np.maximum(1.0, n)):
        raise ValueError(f"row conservation violated (max error {err.max():.3g})")
    return xi


def proportional_share(game: GameInstance, xi: np.ndarray, m: int, r: int) -> float:
    """Resources of RRH ``r`` granted to MVNO ``m`` under proportional slicing.

    An RRH nobody uses grants nothing.
    """
    if not (0 <= m < game.n_mvnos and 0 <= r < game.n_rrhs):
        raise IndexError(f"(m={m}, r={r}) out of range")
    load = xi[:, r].sum()
    if load <= 0:
        return 0.0
    return float(xi[m, r] / load * game.rrhs[r].capacity)


def proportional_shares(game: GameInstance, xi: np.ndarray) -> np.ndarray:
    load = xi.sum(axis=0)
    safe = np.where(load > 0, load, 1.0)
    return np.where(load > 0, xi / safe * game.capacities, 0.0)

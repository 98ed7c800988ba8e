"""Resource pricing by the telco operator and the operator's profit.

The adaptive rule nudges each RRH price by ``sigma`` times the change in
its equilibrium load between consecutive slots, never dropping below the
operator's cost of serving that load. The operator's cost is linear,
``C(n) = to_cost_coeff * n``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .model import GameInstance

PolicyKind = Literal["uniform", "weighted", "adaptive"]


@dataclass(frozen=True)
class PricingState:
    prices: np.ndarray
    sigma: float = 0.1
    to_cost_coeff: float = 1.0
    slot: int = 0
    previous_load: np.ndarray | None = None
    current_load: np.ndarray | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.to_cost_coeff >= 0:
            raise ValueError("to_cost_coeff must be non-negative")
        prices = np.asarray(self.prices, dtype=float)
        if np.any(prices < 0):
            raise ValueError("prices must be non-negative")
        object.__setattr__(self, "prices", prices)

    def operator_cost(self, load) -> np.ndarray:
        return self.to_cost_coeff * np.asarray(load, dtype=float)


def served_load(game: GameInstance, xi: np.ndarray) -> np.ndarray:
    """Users routed through each RRH at an equilibrium policy."""
    return xi.sum(axis=0)


def profit(state: PricingState, load) -> float:
    load = np.asarray(load, dtype=float)
    return float((state.prices * load - state.operator_cost(load)).sum())


def update_prices(state: PricingState, new_load) -> PricingState:
    """Record this slot's load and move prices for the next slot.

    The first call only records the load, since there is no earlier slot
    to compare against.
    """
    new_load = np.asarray(new_load, dtype=float).copy()
    if new_load.shape != state.prices.shape:
        raise ValueError("one load value per RRH expected")
    if state.current_load is None:
        return replace(state, slot=state.slot + 1, current_load=new_load)
    proposed = state.prices + state.sigma * (new_load - state.current_load)
    prices = np.maximum(state.operator_cost(new_load), proposed)
    return replace(
        state,
        prices=prices,
        slot=state.slot + 1,
        previous_load=state.current_load,
        current_load=new_load,
    )


def make_policy(kind: PolicyKind, game: GameInstance, mean_price: float) -> np.ndarray:
    """Initial RRH prices for a pricing scheme.

    ``weighted`` scales ``mean_price`` by N_r relative to the best RRH of
    the cluster. ``adaptive`` starts from uniform prices and evolves through
    :func:`update_prices`.
    """
    if not mean_price > 0:
        raise ValueError("mean_price must be positive")
    R = game.n_rrhs
    if kind in ("uniform", "adaptive"):
        return np.full(R, float(mean_price))
    if kind == "weighted":
        q = game.qoe_users
        return mean_price * q / q.max()
    raise ValueError(f"unknown pricing policy {kind!r}")

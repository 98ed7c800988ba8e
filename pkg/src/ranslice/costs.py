"""Congestion, per-MVNO costs and the exact potential of the slicing game.

Cost of MVNO m on RRH r is the RRH congestion (load over N_r) plus the
price term pi_m * p_r; the MVNO pays it once per user routed through r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GameInstance


@dataclass(frozen=True)
class CostBreakdown:
    congestion_cost: float
    monetary_cost: float

    @property
    def total(self) -> float:
        return self.congestion_cost + self.monetary_cost


def congestion_levels(game: GameInstance, xi: np.ndarray) -> np.ndarray:
    """Load over QoE capacity for every RRH, shape (R,)."""
    return xi.sum(axis=0) / game.qoe_users


def congestion_level(game: GameInstance, xi: np.ndarray, r: int) -> float:
    return float(xi[:, r].sum() / game.qoe_users[r])


def unit_costs(game: GameInstance, xi: np.ndarray) -> np.ndarray:
    """Per-user cost c_{m,r} of every (MVNO, RRH) pair, shape (M, R)."""
    return congestion_levels(game, xi)[None, :] + game.price_terms


def marginal_costs(game: GameInstance, xi: np.ndarray) -> np.ndarray:
    """d(xi_{m,r} c_{m,r}) / d xi_{m,r} for all pairs, shape (M, R)."""
    return unit_costs(game, xi) + xi / game.qoe_users


def marginal_cost(game: GameInstance, xi: np.ndarray, m: int, r: int) -> float:
    N = game.qoe_users[r]
    return float(xi[:, r].sum() / N + game.price_terms[m, r] + xi[m, r] / N)


def player_cost(game: GameInstance, xi: np.ndarray, m: int) -> CostBreakdown:
    row = xi[m]
    congestion = float(row @ congestion_levels(game, xi))
    monetary = float(game.price_weights[m] * (row @ game.prices))
    return CostBreakdown(congestion, monetary)


def player_costs(game: GameInstance, xi: np.ndarray) -> np.ndarray:
    """Total cost of every MVNO, shape (M,)."""
    return (xi * unit_costs(game, xi)).sum(axis=1)


def social_welfare(game: GameInstance, xi: np.ndarray) -> float:
    """Sum of all MVNO costs (lower is better)."""
    return float(player_costs(game, xi).sum())


def deployment_costs(game: GameInstance, xi: np.ndarray) -> np.ndarray:
    """Money each MVNO pays for its slice, sum_r xi_{m,r} p_r (not weighted by pi)."""
    return xi @ game.prices


def potential(game: GameInstance, xi: np.ndarray) -> float:
    """Exact potential: own quadratic terms, pairwise terms over k < m, price terms.

    The pairwise sum follows the game's player order.
    """
    inv_n = 1.0 / game.qoe_users
    earlier = np.cumsum(xi, axis=0) - xi  # sum over k < m of xi_{k,r}
    quad = (xi * xi + xi * earlier) @ inv_n
    return float(quad.sum() + (game.price_terms * xi).sum())

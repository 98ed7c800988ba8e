import numpy as np
import pytest
from hypothesis import given, strategies as st

from ranslice.model import (
    GameInstance,
    Mvno,
    Rrh,
    check_policy,
    feasible_uniform,
    proportional_share,
    proportional_shares,
    random_feasible,
)

from conftest import make_game


def test_uniform_split_examples():
    g = GameInstance.from_arrays([1.0, 1.0], [10.0])
    assert np.allclose(feasible_uniform(g), [[5, 5]])
    g = GameInstance.from_arrays([1.0, 1.0, 1.0], [0.0, 7.0])
    xi = feasible_uniform(g)
    assert np.allclose(xi[0], 0)
    assert np.allclose(xi[1], 7 / 3)
    assert xi[1].sum() == pytest.approx(7.0, rel=1e-15)


def test_proportional_share_examples():
    g = GameInstance.from_arrays([50.0], [3.0, 1.0], capacity=100.0)
    xi = np.array([[3.0], [1.0]])
    assert proportional_share(g, xi, 0, 0) == pytest.approx(75.0)
    solo = GameInstance.from_arrays([50.0, 50.0], [4.0], capacity=100.0)
    assert proportional_share(solo, np.array([[4.0, 0.0]]), 0, 0) == pytest.approx(100.0)
    assert proportional_share(solo, np.array([[4.0, 0.0]]), 0, 1) == 0.0


def test_proportional_share_index_errors(tiny_game):
    xi = feasible_uniform(tiny_game)
    with pytest.raises(IndexError):
        proportional_share(tiny_game, xi, 2, 0)
    with pytest.raises(IndexError):
        proportional_share(tiny_game, xi, 0, -1)


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 8))
def test_shares_fill_capacity_or_nothing(seed, M, R):
    g = make_game(seed, M, R)
    xi = random_feasible(g, np.random.default_rng(seed))
    xi[:, 0] = 0.0  # force one vacuous RRH
    xi *= (g.user_counts / np.maximum(xi.sum(axis=1), 1e-300))[:, None]
    shares = proportional_shares(g, xi)
    col = shares.sum(axis=0)
    used = xi.sum(axis=0) > 0
    assert np.allclose(col[used], g.capacities[used])
    assert np.all(col[~used] == 0)
    for m in range(M):
        for r in range(R):
            assert shares[m, r] == pytest.approx(proportional_share(g, xi, m, r))


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 8))
def test_generated_policies_conserve(seed, M, R):
    g = make_game(seed, M, R)
    for xi in (feasible_uniform(g), random_feasible(g, np.random.default_rng(seed))):
        check_policy(g, xi)
        assert np.all(np.abs(xi.sum(axis=1) - g.user_counts) <= 1e-9 * np.maximum(1, g.user_counts))


def test_check_policy_rejects(tiny_game):
    with pytest.raises(ValueError, match="shape"):
        check_policy(tiny_game, np.zeros((2, 3)))
    with pytest.raises(ValueError, match="negative"):
        check_policy(tiny_game, np.array([[7.0, -1.0], [2.0, 2.0]]))
    with pytest.raises(ValueError, match="conservation"):
        check_policy(tiny_game, np.array([[3.0, 2.0], [2.0, 2.0]]))


def test_field_validation():
    with pytest.raises(ValueError):
        Rrh(0, (0, 0), 0, price=-1.0, capacity=1.0, qoe_users=1.0)
    with pytest.raises(ValueError):
        Rrh(0, (0, 0), 0, price=1.0, capacity=0.0, qoe_users=1.0)
    with pytest.raises(ValueError):
        Rrh(0, (0, 0), 0, price=1.0, capacity=1.0, qoe_users=0.0)
    with pytest.raises(ValueError):
        Mvno(0, user_count=-1.0, price_weight=0.0)
    with pytest.raises(ValueError):
        Mvno(0, user_count=1.0, price_weight=-0.1)
    with pytest.raises(ValueError):
        GameInstance((), (Mvno(0, 1.0, 0.0),))


def test_views_are_read_only(game):
    with pytest.raises(ValueError):
        game.qoe_users[0] = 1.0
    assert game.price_terms.shape == (game.n_mvnos, game.n_rrhs)
    assert np.allclose(game.price_terms, np.outer(game.price_weights, game.prices))


def test_rebuilders(game):
    g2 = game.with_prices(np.arange(1, game.n_rrhs + 1))
    assert np.allclose(g2.prices, np.arange(1, game.n_rrhs + 1))
    assert np.allclose(g2.qoe_users, game.qoe_users)
    g3 = game.permuted([2, 0, 1])
    assert np.allclose(g3.user_counts, game.user_counts[[2, 0, 1]])
    assert np.allclose(g3.price_weights, game.price_weights[[2, 0, 1]])

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ranslice.equilibrium import solve_brd
from ranslice.model import GameInstance
from ranslice.pricing import PricingState, make_policy, profit, served_load, update_prices

from conftest import make_game

loads = st.lists(st.floats(0, 1e4), min_size=1, max_size=8)


def test_served_load_examples():
    g = GameInstance.from_arrays([5.0], [10.0])
    assert served_load(g, np.array([[10.0]])) == pytest.approx([10.0])
    sym = GameInstance.from_arrays([5.0, 5.0], [4.0, 4.0])
    assert np.allclose(served_load(sym, np.full((2, 2), 2.0)), [4.0, 4.0])


@given(st.integers(0, 2**31), st.integers(1, 5), st.integers(1, 8))
def test_served_load_conserves_users(seed, M, R):
    g = make_game(seed, M, R)
    ne = solve_brd(g).policy
    assert served_load(g, ne).sum() == pytest.approx(g.user_counts.sum(), rel=1e-9)


def test_profit_examples():
    load = np.array([3.0, 5.0])
    assert profit(PricingState(np.array([2.0, 4.0]), to_cost_coeff=0.0), load) == pytest.approx(26.0)
    assert profit(PricingState(np.array([1.5, 1.5]), to_cost_coeff=1.5), load) == 0.0


@given(st.integers(0, 2**31), st.integers(1, 10))
def test_profit_matches_loop(seed, R):
    rng = np.random.default_rng(seed)
    p, n, c0 = rng.uniform(0, 20, R), rng.uniform(0, 1e3, R), rng.uniform(0, 2)
    expected = 0.0
    for r in range(R):
        expected += p[r] * n[r] - c0 * n[r]
    assert profit(PricingState(p, to_cost_coeff=c0), n) == pytest.approx(expected, rel=1e-12, abs=1e-9)


def test_first_update_only_records():
    s = update_prices(PricingState(np.array([10.0, 10.0])), [3.0, 4.0])
    assert np.all(s.prices == 10.0)
    assert s.slot == 1
    assert np.allclose(s.current_load, [3.0, 4.0])


def test_update_examples():
    s = PricingState(np.array([10.0, 10.0]), sigma=0.1, to_cost_coeff=1.0)
    s = update_prices(s, [5.0, 5.0])
    same = update_prices(s, [5.0, 5.0])
    assert np.allclose(same.prices, 10.0)  # zero increment, floor 5 inactive
    up = update_prices(s, [8.0, 5.0])
    assert up.prices[0] == pytest.approx(10.3)
    assert up.prices[1] == pytest.approx(10.0)
    # a large drop would push price below the floor c0 * n
    low = update_prices(PricingState(np.array([1.0]), sigma=1.0), [50.0])
    low = update_prices(low, [40.0])
    assert low.prices[0] == pytest.approx(40.0)
    assert np.allclose(low.previous_load, [50.0])


def test_update_rejects_wrong_length():
    s = update_prices(PricingState(np.array([1.0, 1.0])), [1.0, 1.0])
    with pytest.raises(ValueError):
        update_prices(s, [1.0])


@given(loads, st.floats(0.01, 5), st.floats(0, 3), st.integers(0, 2**31))
def test_update_invariants(load0, sigma, c0, seed):
    rng = np.random.default_rng(seed)
    R = len(load0)
    state = PricingState(rng.uniform(0, 50, R), sigma=sigma, to_cost_coeff=c0)
    state = update_prices(state, load0)
    new_load = np.asarray(load0) + rng.normal(0, 100, R).clip(-np.asarray(load0))
    nxt = update_prices(state, new_load)
    floor = c0 * new_load
    assert np.all(nxt.prices >= floor - 1e-12)
    step = sigma * (new_load - np.asarray(load0))
    # only increments that survive rounding can show their sign
    free = (state.prices + step > floor) & (np.abs(step) > 1e-12 * np.maximum(1.0, state.prices))
    dp = np.sign(nxt.prices - state.prices)[free]
    dn = np.sign(new_load - np.asarray(load0))[free]
    assert np.all(dp == dn)
    # stationary load keeps prices above the floor fixed
    again = update_prices(nxt, new_load)
    assert np.allclose(again.prices, np.maximum(nxt.prices, floor))


def test_policies():
    g = GameInstance.from_arrays([2.0, 8.0, 4.0], [1.0])
    assert np.all(make_policy("uniform", g, 10.0) == 10.0)
    assert np.all(make_policy("adaptive", g, 10.0) == 10.0)
    w = make_policy("weighted", g, 10.0)
    assert w.max() == 10.0
    assert np.allclose(w, [2.5, 10.0, 5.0])
    flat = GameInstance.from_arrays([3.0, 3.0], [1.0])
    assert np.all(make_policy("weighted", flat, 7.0) == 7.0)
    with pytest.raises(ValueError):
        make_policy("surge", g, 10.0)
    with pytest.raises(ValueError):
        make_policy("uniform", g, 0.0)


def test_state_validation():
    with pytest.raises(ValueError):
        PricingState(np.array([1.0]), sigma=0.0)
    with pytest.raises(ValueError):
        PricingState(np.array([-1.0]))
    with pytest.raises(ValueError):
        PricingState(np.array([1.0]), to_cost_coeff=-1.0)

import numpy as np
import pytest
from hypothesis import settings

from ranslice.ingest import random_game
from ranslice.model import GameInstance

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def make_game(seed, n_mvnos=3, n_rrhs=5, **kw):
    return random_game(np.random.default_rng(seed), n_mvnos, n_rrhs, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def game():
    return make_game(0, 3, 5, price_weight_max=5e-2)


@pytest.fixture
def tiny_game():
    # two players, two RRHs, easy numbers
    return GameInstance.from_arrays([10.0, 20.0], [6.0, 4.0], prices=[1.0, 2.0], price_weights=[0.1, 0.0])

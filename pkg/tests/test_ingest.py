import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ranslice.ingest import (
    BOSTON,
    IngestError,
    Region,
    ScenarioConfig,
    ScenarioError,
    TowerRecord,
    build_cluster,
    bundled_towers,
    generate_scenario,
    parse_towers,
    project,
    random_game,
    truncated_normal,
    write_scenario,
)

HEADER = "radio,mcc,net,area,cell,unit,lon,lat,range,samples,changeable,created,updated,averageSignal\n"
ROWS = [
    "LTE,310,260,1,11,,-71.06,42.35,800,5,1,0,0,0",
    "LTE,310,260,1,12,,-71.07,42.34,1500,5,1,0,0,0",
    "LTE,310,410,2,13,,-71.05,42.36,,5,1,0,0,0",
]


def write(tmp_path, text, name="towers.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_three_rows_with_and_without_header(tmp_path):
    recs = parse_towers(write(tmp_path, HEADER + "\n".join(ROWS) + "\n"))
    assert len(recs) == 3 and recs.skipped == 0
    assert recs[0].lat == 42.35 and recs[0].lon == -71.06 and recs[0].range_m == 800
    assert recs[2].range_m is None
    bare = parse_towers(write(tmp_path, "\n".join(ROWS) + "\n", "bare.csv"))
    assert bare == recs


def test_bad_latitude_is_skipped(tmp_path):
    text = HEADER + "\n".join(ROWS + ["LTE,310,260,1,14,,-71.06,95,800,5,1,0,0,0", "LTE,garbage"]) + "\n"
    recs = parse_towers(write(tmp_path, text))
    assert len(recs) == 3
    assert recs.skipped == 2


def test_radio_filter(tmp_path):
    text = HEADER + "\n".join(ROWS + ["GSM,310,260,1,15,,-71.06,42.35,800,5,1,0,0,0"]) + "\n"
    assert len(parse_towers(write(tmp_path, text))) == 3
    assert len(parse_towers(write(tmp_path, text), radios=None)) == 4
    assert len(parse_towers(write(tmp_path, text), radios=("gsm",))) == 1


def test_empty_and_missing_files(tmp_path):
    with pytest.raises(IngestError):
        parse_towers(write(tmp_path, ""))
    with pytest.raises(IngestError):
        parse_towers(write(tmp_path, HEADER))
    with pytest.raises(IngestError):
        parse_towers(tmp_path / "nope.csv")


def test_record_validation():
    with pytest.raises(ValueError):
        TowerRecord("LTE", lon=0.0, lat=95.0)
    with pytest.raises(ValueError):
        TowerRecord("LTE", lon=181.0, lat=0.0)


def test_projection_scale():
    x, y = project(43.0, -71.0, (42.0, -71.0))
    assert y == pytest.approx(111_195, rel=1e-3)
    assert x == pytest.approx(0.0)
    x, _ = project(42.0, -70.0, (42.0, -71.0))
    assert x == pytest.approx(111_195 * np.cos(np.radians(42.0)), rel=1e-3)


@pytest.fixture(scope="module")
def boston():
    return parse_towers(bundled_towers())


def test_boston_fixture_and_full_cluster(boston):
    full = build_cluster(boston, BOSTON, None, seed=0)
    assert full.region_size >= 100
    keys = [t.key for t in full.towers]
    assert keys == sorted(keys)
    shuffled = build_cluster(list(reversed(boston)), BOSTON, None, seed=99)
    assert [t.key for t in shuffled.towers] == keys


def test_cluster_of_100(boston):
    c = build_cluster(boston, BOSTON, 100, seed=4)
    assert len(c.towers) == 100
    assert c.positions.shape == (100, 2)
    assert len({t.key for t in c.towers}) == 100
    assert all(BOSTON.contains(t) for t in c.towers)
    # a few kilometres across
    assert np.abs(c.positions).max() < 10_000


def test_cluster_is_deterministic(boston):
    a = build_cluster(boston, BOSTON, 20, seed=1)
    b = build_cluster(boston, BOSTON, 20, seed=1)
    c = build_cluster(boston, BOSTON, 20, seed=2)
    assert a.towers == b.towers
    assert a.towers != c.towers
    with pytest.raises(IngestError):
        build_cluster(boston, BOSTON, 10_000, seed=1)


def test_circular_region(boston):
    region = Region(center=(42.35, -71.075), radius_m=1500)
    c = build_cluster(boston, region, None, seed=0)
    assert np.all(np.hypot(*c.positions.T) <= 1500 + 1e-6)
    with pytest.raises(ValueError):
        Region(center=(42.35, -71.075))


def test_generate_scenario_setup(boston):
    cfg = ScenarioConfig(n_mvnos=20, n_rrhs=20)
    cluster = build_cluster(boston, BOSTON, 20, seed=3)
    scen = generate_scenario(cluster, cfg, np.random.default_rng(3))
    g = scen.game
    assert cfg.rrh_capacity == 8400
    assert np.all(g.capacities == 8400)
    assert np.all((g.qoe_users > 0) & (g.qoe_users <= 8400))
    assert np.all((g.price_weights >= 0) & (g.price_weights <= 5e-4))
    assert np.all(g.prices >= 0)
    assert np.allclose(g.user_counts, cfg.device_density_km2 * scen.area_km2 / 20)
    again = generate_scenario(cluster, cfg, np.random.default_rng(3))
    for attr in ("qoe_users", "prices", "price_weights", "user_counts"):
        assert np.array_equal(getattr(g, attr), getattr(again.game, attr))


def test_capacity_override_and_bandwidth():
    assert ScenarioConfig(capacity_override=100).rrh_capacity == 100
    assert ScenarioConfig(n_rb=25).rrh_capacity == 25 * 84
    assert ScenarioConfig(n_rb=25).bandwidth_hz == 5e6
    with pytest.raises(ValueError):
        ScenarioConfig(n_rb=30)
    with pytest.raises(ValueError):
        ScenarioConfig(mu=0.0)


def test_unreachable_targets_raise(boston):
    cluster = build_cluster(boston, BOSTON, 5, seed=0)
    cfg = ScenarioConfig(n_rrhs=5, path_loss_k=1e-20)
    with pytest.raises(ScenarioError):
        generate_scenario(cluster, cfg, np.random.default_rng(0))


def test_truncated_normal_mean():
    x = truncated_normal(np.random.default_rng(0), 10.0, 4.0, 10_000)
    assert np.all(x >= 0)
    assert abs(x.mean() - 10.0) <= 3 * 4.0 / 100


@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 10))
def test_random_game_ranges(seed, M, R):
    g = random_game(np.random.default_rng(seed), M, R)
    assert np.all((g.qoe_users >= 0.3 * 8400) & (g.qoe_users <= 8400))
    ratio = g.user_counts.sum() / g.qoe_users.sum()
    assert 0.1 <= ratio <= 1.5


def test_scenario_snapshot(tmp_path, boston):
    cluster = build_cluster(boston, BOSTON, 4, seed=0)
    scen = generate_scenario(cluster, ScenarioConfig(n_mvnos=2, n_rrhs=4), np.random.default_rng(0))
    out = tmp_path / "scenario.json"
    write_scenario(scen, out, extra={"seed": 0})
    doc = json.loads(out.read_text())
    assert doc["seed"] == 0
    assert len(doc["rrhs"]) == 4 and len(doc["mvnos"]) == 2
    assert doc["rrhs"][0]["qoe_users"] == pytest.approx(scen.game.qoe_users[0])

"""Cell-tower ingestion and scenario generation.

Towers come from CSV files in the OpenCellID column layout. A cluster is a
seeded random subset of towers inside a region, projected to local metres.
A scenario adds MVNOs, prices and per-RRH QoE capacity on top of a cluster.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .capacity import DistanceDensity, RadioParams, db_to_linear, expected_qoe_users, noise_power
from .model import GameInstance, Mvno, Rrh

log = logging.getLogger(__name__)

COLUMNS = (
    "radio", "mcc", "net", "area", "cell", "unit", "lon", "lat", "range",
    "samples", "changeable", "created", "updated", "averageSignal",
)
EARTH_RADIUS_M = 6_371_000.0
RB_SYMBOLS = 7
RB_SUBCARRIERS = 12
BANDWIDTH_HZ = {25: 5e6, 50: 10e6, 100: 20e6}


class IngestError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class TowerRecord:
    radio: str
    lon: float
    lat: float
    range_m: float | None = None
    mcc: str = ""
    net: str = ""
    area: str = ""
    cell: str = ""

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range")

    @property
    def key(self) -> tuple:
        return (self.mcc, self.net, self.area, self.cell, self.lat, self.lon)


class TowerList(list):
    """Parsed towers; ``skipped`` counts rows that could not be used."""

    skipped: int = 0


def bundled_towers() -> Path:
    """Path of the synthetic Boston fixture shipped with the package."""
    return Path(str(resources.files("ranslice") / "data" / "boston_towers.csv"))


def _parse_row(row: Sequence[str]) -> TowerRecord:
    if len(row) < 8:
        raise ValueError("short row")
    rng_field = row[8].strip() if len(row) > 8 else ""
    return TowerRecord(
        radio=row[0].strip().upper(),
        lon=float(row[6]),
        lat=float(row[7]),
        range_m=float(rng_field) if rng_field else None,
        mcc=row[1].strip(),
        net=row[2].strip(),
        area=row[3].strip(),
        cell=row[4].strip(),
    )


def parse_towers(path, radios: Iterable[str] | None = ("LTE",)) -> TowerList:
    """Read an OpenCellID-style CSV (header optional).

    Rows that fail to parse or carry impossible coordinates are skipped and
    counted. ``radios=None`` keeps every radio type.
    """
    wanted = None if radios is None else {r.upper() for r in radios}
    out = TowerList()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            if i == 0 and row[0].strip().lower() == "radio":
                continue
            try:
                rec = _parse_row(row)
            except ValueError:
                out.skipped += 1
                continue
            if wanted is None or rec.radio in wanted:
                out.append(rec)
    if out.skipped:
        log.warning("%s: skipped %d malformed rows", path, out.skipped)
    if not out:
        raise IngestError(f"{path}: no valid tower rows")
    return out


# --------------------------------------------------------------------------
# clusters


@dataclass(frozen=True)
class Region:
    """Either a lat/lon box or a circle of ``radius_m`` around a centre."""

    bbox: tuple[float, float, float, float] | None = None  # lat_min, lat_max, lon_min, lon_max
    center: tuple[float, float] | None = None  # lat, lon
    radius_m: float | None = None

    def __post_init__(self):
        if (self.bbox is None) == (self.center is None):
            raise ValueError("give exactly one of bbox or center+radius")
        if self.center is not None and not (self.radius_m and self.radius_m > 0):
            raise ValueError("circular region needs a positive radius")

    @property
    def origin(self) -> tuple[float, float]:
        if self.center is not None:
            return self.center
        lat0, lat1, lon0, lon1 = self.bbox
        return (0.5 * (lat0 + lat1), 0.5 * (lon0 + lon1))

    def contains(self, rec: TowerRecord) -> bool:
        if self.bbox is not None:
            lat0, lat1, lon0, lon1 = self.bbox
            return lat0 <= rec.lat <= lat1 and lon0 <= rec.lon <= lon1
        x, y = project(rec.lat, rec.lon, self.center)
        return math.hypot(x, y) <= self.radius_m


BOSTON = Region(bbox=(42.330, 42.370, -71.110, -71.040))


def project(lat, lon, origin: tuple[float, float]):
    """Local equirectangular projection to metres east/north of ``origin``."""
    lat0, lon0 = origin
    x = np.radians(np.asarray(lon) - lon0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    y = np.radians(np.asarray(lat) - lat0) * EARTH_RADIUS_M
    return x, y


def _bbox_area_km2(xy: np.ndarray) -> float:
    if len(xy) < 2:
        return 0.0
    span = xy.max(axis=0) - xy.min(axis=0)
    return float(span[0] * span[1] / 1e6)


@dataclass(frozen=True)
class Cluster:
    towers: tuple[TowerRecord, ...]
    positions: np.ndarray  # (R, 2) metres
    region_area_km2: float
    selected_area_km2: float
    region_size: int


def build_cluster(
    records: Sequence[TowerRecord],
    region: Region,
    size: int | None,
    seed,
) -> Cluster:
    """Pick ``size`` towers uniformly without replacement from ``region``.

    Candidates are sorted by their identifiers first, so the subset depends
    only on the records, the region, ``size`` and ``seed``. ``size=None``
    keeps the whole region.
    """
    inside = sorted({r.key: r for r in records if region.contains(r)}.values(), key=lambda r: r.key)
    if size is None:
        size = len(inside)
    if size < 1 or size > len(inside):
        raise IngestError(f"need {size} towers but region holds {len(inside)}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(inside), size=size, replace=False))
    chosen = tuple(inside[i] for i in idx)
    origin = region.origin
    all_xy = np.column_stack(project([r.lat for r in inside], [r.lon for r in inside], origin))
    xy = all_xy[idx]
    return Cluster(chosen, xy, _bbox_area_km2(all_xy), _bbox_area_km2(xy), len(inside))


# --------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class ScenarioConfig:
    n_mvnos: int = 20
    n_rrhs: int = 20
    n_rb: int = 100
    sinr_min_db: float = -5.0
    mu: float | None = 0.8  # None draws U(0, 1] per scenario
    price_weight_max: float = 5e-4
    price_mean: float = 10.0
    price_std: float = 4.0
    device_density_km2: float = 5000.0
    capacity_override: float | None = None
    area_basis: str = "region"  # or "selected"
    cell_radius_m: tuple[float, float] = (100.0, 3000.0)
    default_cell_radius_m: float = 1000.0
    path_loss_k: float = 9.89e-5
    path_loss_alpha: float = 3.0
    reference_distance_m: float = 1.0
    noise_dbm_hz: float = -174.0

    def __post_init__(self):
        if self.n_mvnos < 1 or self.n_rrhs < 1:
            raise ValueError("need at least one MVNO and one RRH")
        if self.n_rb not in BANDWIDTH_HZ:
            raise ValueError(f"n_rb must be one of {sorted(BANDWIDTH_HZ)}")
        if self.mu is not None and not 0 < self.mu <= 1:
            raise ValueError("mu must lie in (0, 1]")
        if self.price_weight_max < 0 or self.price_std < 0 or self.device_density_km2 < 0:
            raise ValueError("negative distribution parameter")
        if self.area_basis not in ("region", "selected"):
            raise ValueError("area_basis is 'region' or 'selected'")

    @property
    def bandwidth_hz(self) -> float:
        return BANDWIDTH_HZ[self.n_rb]

    @property
    def rrh_capacity(self) -> float:
        if self.capacity_override is not None:
            return float(self.capacity_override)
        return float(self.n_rb * RB_SYMBOLS * RB_SUBCARRIERS)

    def radio_params(self, mu: float) -> RadioParams:
        return RadioParams(
            k=self.path_loss_k,
            d0=self.reference_distance_m,
            alpha=self.path_loss_alpha,
            noise=noise_power(self.bandwidth_hz, self.noise_dbm_hz),
            sinr_min=db_to_linear(self.sinr_min_db),
            mu=mu,
        )


@dataclass(frozen=True)
class Scenario:
    game: GameInstance
    radio: RadioParams
    cell_radii: np.ndarray
    area_km2: float
    infeasible_rrhs: int  # RRHs whose disk reaches past the SINR feasibility radius
    dropped_rrhs: int = 0


@lru_cache(maxsize=65536)
def _cached_qoe(radio: RadioParams, capacity: float, radius: float):
    return expected_qoe_users(radio, capacity, DistanceDensity.uniform_disk(radius))


def qoe_capacity(radio: RadioParams, capacity: float, radius_m: float) -> tuple[float, bool]:
    """N_r for users uniform on a disk; flag tells whether part of it is out of reach."""
    est = _cached_qoe(radio, float(capacity), float(radius_m))
    return est.value, est.infeasible_mass > 0


def truncated_normal(rng: np.random.Generator, mean: float, std: float, size: int) -> np.ndarray:
    """Normal draws, redrawing any negative value."""
    out = rng.normal(mean, std, size)
    bad = out < 0
    while bad.any():
        out[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = out < 0
    return out


def cell_class(range_m: float | None) -> int:
    """0 macro, 1 micro, 2 small cell, by coverage range."""
    if range_m is None or range_m >= 2000:
        return 0
    return 1 if range_m >= 800 else 2


def generate_scenario(cluster: Cluster, config: ScenarioConfig, rng: np.random.Generator) -> Scenario:
    """Draw MVNOs, prices and access rate; derive N_r for every tower of the cluster.

    Draw order is fixed (mu, weights, prices) so a seeded ``rng`` makes the
    scenario reproducible.
    """
    mu = config.mu if config.mu is not None else 1.0 - rng.random()
    weights = rng.uniform(0.0, config.price_weight_max, config.n_mvnos)
    prices = truncated_normal(rng, config.price_mean, config.price_std, len(cluster.towers))
    radio = config.radio_params(mu)
    cap = config.rrh_capacity
    lo, hi = config.cell_radius_m
    radii = np.array([
        min(max(t.range_m if t.range_m else config.default_cell_radius_m, lo), hi) for t in cluster.towers
    ])
    rrhs, kept = [], []
    infeasible = dropped = 0
    for i, (tower, radius) in enumerate(zip(cluster.towers, radii)):
        q, partial = qoe_capacity(radio, cap, radius)
        infeasible += partial
        if q <= 0:
            dropped += 1
            continue
        rrhs.append(Rrh(
            id=f"{tower.mcc}-{tower.net}-{tower.area}-{tower.cell}",
            position=(float(cluster.positions[i, 0]), float(cluster.positions[i, 1])),
            class_id=cell_class(tower.range_m),
            price=float(prices[i]),
            capacity=cap,
            qoe_users=q,
        ))
        kept.append(radius)
    if not rrhs:
        raise ScenarioError("no RRH can meet the SINR target anywhere")
    area = cluster.region_area_km2 if config.area_basis == "region" else cluster.selected_area_km2
    users = config.device_density_km2 * area / config.n_mvnos
    mvnos = [Mvno(id=m, user_count=users, price_weight=float(w)) for m, w in enumerate(weights)]
    return Scenario(GameInstance(tuple(rrhs), tuple(mvnos)), radio, np.array(kept), area, infeasible, dropped)


def random_game(
    rng: np.random.Generator,
    n_mvnos: int,
    n_rrhs: int,
    price_weight_max: float = 5e-4,
    load_range: tuple[float, float] = (0.1, 1.5),
    user_spread: float = 0.0,
    capacity: float = 8400.0,
    price_mean: float = 10.0,
    price_std: float = 4.0,
) -> GameInstance:
    """A synthetic game with parameters in the desk-scale experiment ranges.

    N_r is drawn in ``[0.3, 1] * capacity``; total demand is the drawn mean
    congestion times the summed N_r and is split across MVNOs, each share
    perturbed by up to ``user_spread`` relative.
    """
    qoe = capacity * rng.uniform(0.3, 1.0, n_rrhs)
    load = rng.uniform(*load_range)
    base = load * qoe.sum() / n_mvnos
    users = base * (1.0 + user_spread * rng.uniform(-1.0, 1.0, n_mvnos))
    prices = truncated_normal(rng, price_mean, price_std, n_rrhs)
    weights = rng.uniform(0.0, price_weight_max, n_mvnos)
    return GameInstance.from_arrays(qoe, users, prices, weights, capacity=capacity)


def write_scenario(scenario: Scenario, path, extra: dict | None = None) -> None:
    """Dump a scenario as indented JSON (parameters plus matrices)."""
    g = scenario.game
    doc = {
        "radio": asdict(scenario.radio),
        "area_km2": scenario.area_km2,
        "infeasible_rrhs": scenario.infeasible_rrhs,
        "dropped_rrhs": scenario.dropped_rrhs,
        "rrhs": [
            {"id": r.id, "x_m": r.position[0], "y_m": r.position[1], "class": r.class_id,
             "price": r.price, "capacity": r.capacity, "qoe_users": r.qoe_users, "cell_radius_m": float(rad)}
            for r, rad in zip(g.rrhs, scenario.cell_radii)
        ],
        "mvnos": [{"id": m.id, "user_count": m.user_count, "price_weight": m.price_weight} for m in g.mvnos],
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

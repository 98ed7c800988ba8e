"""Write the bundled tower fixture in OpenCellID CSV layout.

The towers are synthetic: positions are drawn uniformly over a downtown
Boston bounding box and coverage ranges from a log-normal, with a fixed
seed. Swap in a real OpenCellID extract by passing it to ``ranslice run
--towers``.

    python scripts/make_boston_fixture.py [out.csv]
"""

import csv
import sys
from pathlib import Path

import numpy as np

HEADER = [
    "radio", "mcc", "net", "area", "cell", "unit", "lon", "lat", "range",
    "samples", "changeable", "created", "updated", "averageSignal",
]

# downtown Boston, roughly Back Bay to the waterfront
LAT = (42.330, 42.370)
LON = (-71.110, -71.040)


def main(out: Path):
    rng = np.random.default_rng(20190101)
    rows = []
    # LTE cluster inside the box, plus legacy radios and a ring of outside towers
    for i in range(160):
        radio = "LTE" if i < 130 else rng.choice(["GSM", "UMTS"])
        lat = rng.uniform(*LAT)
        lon = rng.uniform(*LON)
        rows.append((radio, lat, lon))
    for i in range(40):
        lat = rng.uniform(42.20, 42.50)
        lon = rng.uniform(-71.30, -70.90)
        if LAT[0] <= lat <= LAT[1] and LON[0] <= lon <= LON[1]:
            continue
        rows.append(("LTE", lat, lon))

    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for k, (radio, lat, lon) in enumerate(rows):
            rng_m = int(np.clip(rng.lognormal(np.log(900.0), 0.6), 150, 5000))
            net = int(rng.choice([260, 410, 480]))
            w.writerow([
                radio, 310, net, 10000 + k // 8, 200000 + 17 * k, "",
                f"{lon:.6f}", f"{lat:.6f}", rng_m, int(rng.integers(1, 400)), 1,
                1500000000 + 3600 * k, 1550000000 + 3600 * k, 0,
            ])
    print(f"wrote {len(rows)} towers to {out}")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "ranslice" / "data" / "boston_towers.csv"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)

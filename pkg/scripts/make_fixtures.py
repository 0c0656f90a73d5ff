#!/usr/bin/env python3
"""Generate the example dataset and geometry fixtures under data/.

Everything is drawn from a fixed seed, so re-running this script leaves
the committed files unchanged.
"""

from __future__ import annotations

import csv
import datetime
import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.path.join(HERE, "..", "data")

BOROUGHS = [
    "Barking and Dagenham", "Barnet", "Bexley", "Brent", "Bromley",
    "Camden", "Croydon", "Ealing", "Enfield", "Greenwich", "Hackney",
    "Hammersmith and Fulham", "Haringey", "Harrow", "Havering",
    "Hillingdon", "Hounslow", "Islington", "Kensington and Chelsea",
    "Kingston upon Thames", "Lambeth", "Lewisham", "Merton", "Newham",
    "Redbridge", "Richmond upon Thames", "Southwark", "Sutton",
    "Tower Hamlets", "Waltham Forest", "Wandsworth", "Westminster",
]

METHODS = [
    "Blunt Implement",
    "Knife or Sharp Implement",
    "Physical Assault, no weapon",
    "Shooting",
]

N_ROWS = 2000
SEED = 1729


def make_rows(rng: random.Random) -> list[list[str]]:
    method_w = [0.10, 0.42, 0.33, 0.15]
    female_by_method = {
        "Blunt Implement": 0.30,
        "Knife or Sharp Implement": 0.18,
        "Physical Assault, no weapon": 0.35,
        "Shooting": 0.10,
    }
    borough_w = [1.0 + ((7 * i) % 13) / 6.0 for i in range(len(BOROUGHS))]
    borough_solv = {b: ((3 * i) % 9 - 4) * 0.02 for i, b in enumerate(BOROUGHS)}

    start = datetime.date(2003, 1, 1)
    span = (datetime.date(2023, 12, 31) - start).days

    rows = []
    for _ in range(N_ROWS):
        borough = rng.choices(BOROUGHS, weights=borough_w)[0]
        method = rng.choices(METHODS, weights=method_w)[0]
        sex = "Female" if rng.random() < female_by_method[method] else "Male"
        p_da = 0.45 if sex == "Female" else 0.08
        da = "Domestic Abuse" if rng.random() < p_da else "Not Domestic Abuse"
        p_solved = 0.92 if da == "Domestic Abuse" else 0.70
        if method == "Shooting":
            p_solved -= 0.25
        elif method == "Knife or Sharp Implement":
            p_solved -= 0.05
        p_solved += borough_solv[borough]
        solved = "Solved" if rng.random() < p_solved else "Unsolved"
        day = start + datetime.timedelta(days=rng.randrange(span + 1))
        rows.append([method, sex, da, solved, day.isoformat(), borough])
    return rows


def write_csv(rows: list[list[str]]) -> None:
    path = os.path.join(DATA_DIR, "homicides_like.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["Method_of_Killing", "Sex", "Domestic_Abuse",
             "Solved_Status", "Recorded_Date", "Borough"]
        )
        writer.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def check_levels(rows: list[list[str]]) -> None:
    for idx, expected in ((0, 4), (1, 2), (2, 2), (3, 2), (5, 32)):
        got = len({r[idx] for r in rows})
        if got != expected:
            raise SystemExit(f"column {idx}: expected {expected} levels, got {got}")


def write_geojson() -> None:
    """33 rectangles on a grid: the 32 boroughs plus the City of London.

    The City is a real area of London but not a borough, so it never
    matches a CEG area category and exercises the grey-unmatched path.
    """
    names = sorted(BOROUGHS + ["City of London"])
    features = []
    for i, name in enumerate(names):
        col, row = i % 6, i // 6
        lon0 = -0.45 + col * 0.13
        lat0 = 51.30 + row * 0.07
        ring = [
            [lon0, lat0],
            [lon0 + 0.12, lat0],
            [lon0 + 0.12, lat0 + 0.06],
            [lon0, lat0 + 0.06],
            [lon0, lat0],
        ]
        features.append(
            {
                "type": "Feature",
                "properties": {"name": name, "code": f"E09{i:06d}"},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    path = os.path.join(DATA_DIR, "london_boroughs.geojson")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path} ({len(features)} features)")


def main() -> None:
    os.makedirs(DATA_DIR, exist_ok=True)
    rng = random.Random(SEED)
    rows = make_rows(rng)
    check_levels(rows)
    write_csv(rows)
    write_geojson()


if __name__ == "__main__":
    main()

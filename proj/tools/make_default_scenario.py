#!/usr/bin/env python3
"""Regenerates data/scenarios/default_hawaii.json.

Facilities are given in latitude/longitude. Watercraft waypoints are written
in planar nautical miles so that each segment's length divided by its
duration equals the craft's speed exactly.
"""
import argparse
import json
import math
from pathlib import Path

ORIGIN = (21.48, -158.04)  # central Oahu

FACILITIES = [
    # id, role, island, lat, lon
    ("lihue_r2", "Role2", "Forward", 21.976, -159.339),
    ("pmrf_r2", "Role2", "Forward", 22.036, -159.785),
    ("hanalei_r1", "Role1", "Forward", 22.203, -159.500),
    ("waimea_r1", "Role1", "Forward", 21.957, -159.670),
    ("wheeler_r2", "Role2", "Rear", 21.481, -158.038),
    ("kaneohe_r1", "Role1", "Rear", 21.450, -157.770),
    ("waianae_r1", "Role1", "Rear", 21.440, -158.180),
    ("kahuku_r1", "Role1", "Rear", 21.680, -157.950),
    ("tripler_r3", "Role3", "Rear", 21.362, -157.890),
]

PORTS = {
    "honolulu": (21.305, -157.870),
    "pearl": (21.330, -157.970),
    "nawiliwili": (21.955, -159.355),
}

# id, speed (kn), rear port, forward port, starting fraction of the crossing, heading to forward island first
WATERCRAFT = [
    ("LSV", 10.0, "pearl", "nawiliwili", 0.55, True),
    ("LCU", 8.0, "honolulu", "nawiliwili", 0.35, False),
    ("EPF", 43.0, "pearl", "nawiliwili", 0.10, True),
]

ROUTE_HOURS = 72.0


def project(lat, lon):
    lat0, lon0 = ORIGIN
    x = (lon - lon0) * 60.0 * math.cos(math.radians(lat0))
    y = (lat - lat0) * 60.0
    return x, y


def shuttle(speed, a, b, start_fraction, toward_b):
    """Back-and-forth between a and b starting part way along the crossing."""
    ax, ay = a
    bx, by = b
    length = math.hypot(bx - ax, by - ay)
    f = start_fraction if toward_b else 1.0 - start_fraction
    start = (ax + (bx - ax) * f, ay + (by - ay) * f)
    legs = [b, a] if toward_b else [a, b]
    points = [start]
    times = [0.0]
    t = 0.0
    k = 0
    while t < ROUTE_HOURS:
        nxt = legs[k % 2]
        px, py = points[-1]
        t += math.hypot(nxt[0] - px, nxt[1] - py) / speed
        points.append(nxt)
        times.append(t)
        k += 1
    return [{"x": round(p[0], 6), "y": round(p[1], 6), "t": tt} for p, tt in zip(points, times)], length


def waypoints_exact(speed, wps):
    # Recompute times from the rounded coordinates so segment speeds are exact.
    t = 0.0
    out = [dict(wps[0], t=0.0)]
    for prev, cur in zip(wps, wps[1:]):
        t += math.hypot(cur["x"] - prev["x"], cur["y"] - prev["y"]) / speed
        out.append(dict(cur, t=t))
    return out


def build():
    doc = {
        "name": "default_hawaii",
        "origin_lat_lon": list(ORIGIN),
        "facilities": [
            {"id": i, "role": r, "island": isl, "location": {"lat": lat, "lon": lon}}
            for i, r, isl, lat, lon in FACILITIES
        ],
        "watercraft": [],
        "land_axps": ["wheeler_r2"],
        "aircraft": {
            "cruise_speed": 150.0,
            "cabin_capacity": 6,
            "handoff_duration": 0.17,
            "refuel_duration": 0.25,
            "pickup_duration": 0.10,
            "max_leg_range": 400.0,
        },
        "bases": {"forward": "lihue_r2", "rear": "wheeler_r2", "role3": "tripler_r3"},
    }
    for cid, speed, rear, fwd, frac, toward in WATERCRAFT:
        wps, _ = shuttle(speed, project(*PORTS[rear]), project(*PORTS[fwd]), frac, toward)
        doc["watercraft"].append({"id": cid, "speed": speed, "waypoints": waypoints_exact(speed, wps)})
    return doc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data/scenarios/default_hawaii.json")
    args = ap.parse_args()
    args.out.write_text(json.dumps(build(), indent=2) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

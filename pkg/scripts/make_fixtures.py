#!/usr/bin/env python3
"""Generate the fixture charts, AIS histories and scenarios under fixtures/.

Two confined-water areas are modelled after Danish straits: a Little Belt
analog (wide strait with a western detour basin and an island) and a Great
Belt analog (narrow north-south channel with a mid-channel western bay).
Navigable-region/bounding-box area ratios are tuned by bisection to land on
0.4065 and 0.2677 respectively; the achieved analytic values are recorded
in the fixture README block of each scenario file.

Deterministic: fixed seeds, stable vertex layouts.  Rerunning overwrites
fixtures in place.
"""
from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from fairway.geometry import (GeoFilter, GeoPoint, NavPolygon, PolygonSet,
                              Ring, unproject_array)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

LITTLEBELT_FILTER = GeoFilter(55.48, 55.53, 9.64, 9.72)
GREATBELT_FILTER = GeoFilter(55.17, 55.23, 11.20, 11.28)


def ring_to_geojson(vertices, origin):
    """Local (north, east) vertices -> closed [lon, lat] GeoJSON ring."""
    closed = np.vstack([vertices, vertices[:1]])
    lat, lon = unproject_array(closed, origin)
    return [[round(float(x), 9), round(float(y), 9)] for x, y in zip(lon, lat)]


def feature(layer, rings_local, origin, drval1=None, drval2=None):
    props = {"layer": layer}
    if drval1 is not None:
        props["DRVAL1"] = drval1
        props["DRVAL2"] = drval2 if drval2 is not None else drval1
    return {
        "type": "Feature",
        "properties": props,
        "geometry": {
            "type": "Polygon",
            "coordinates": [ring_to_geojson(r, origin) for r in rings_local],
        },
    }


def region_ratio(polys) -> float:
    ps = PolygonSet(polys)
    lo, hi = ps.bbox
    return ps.area / float((hi - lo).prod())


def tune(builder, target, lo, hi, tol=1e-9):
    """Bisection on a monotone-in-parameter area ratio."""
    rlo = region_ratio(builder(lo))
    rhi = region_ratio(builder(hi))
    if not min(rlo, rhi) <= target <= max(rlo, rhi):
        raise SystemExit(f"target {target} outside [{min(rlo,rhi):.4f}, {max(rlo,rhi):.4f}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rm = region_ratio(builder(mid))
        if abs(rm - target) < tol:
            return mid
        if (rm > target) == (rlo > target):
            lo, rlo = mid, rm
        else:
            hi, rhi = mid, rm
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Little Belt analog
# ---------------------------------------------------------------------------

def littlebelt_navigable(basin_east: float):
    """Main channel with a western detour basin and an island hole, plus an
    adjacent deep basin (tunable eastern extent) sharing a boundary edge."""
    channel = [
        (-2700, -650), (-2700, 640),                       # south entrance
        (-2100, 600), (-1200, 520), (0, 450),              # east side northward
        (800, 550), (1600, 550),                           # basin-shared edge
        (2700, 600), (2700, -400),                         # north exit
        (1800, -600), (900, -800), (500, -850),            # west side southward
        (500, -2400), (-500, -2400), (-500, -850),         # western detour basin
        (-800, -850), (-1600, -780),
    ]
    island = [(-1100, -480), (-1100, -160), (-650, -160), (-650, -480)]
    main = NavPolygon(Ring(np.array(channel, float)),
                      (Ring(np.array(island, float)),), 6.0, 12.0)
    basin = NavPolygon(Ring(np.array(
        [(800, 550), (800, basin_east), (1600, basin_east), (1600, 550)],
        float)), (), 10.0, 25.0)
    return [main, basin]


def littlebelt_chart(basin_east: float):
    origin = LITTLEBELT_FILTER.center
    main, basin = littlebelt_navigable(basin_east)
    features = [
        feature("DEPARE", [r.vertices for r in main.rings], origin, 6.0, 12.0),
        feature("DEPARE", [basin.exterior.vertices], origin, 10.0, 25.0),
        # shallow fringes (below the 6 m requirement)
        feature("DEPARE", [np.array(
            [(-2700, -2400), (-2700, -1500), (-1900, -1500), (-1900, -2400)], float)],
            origin, 0.0, 3.0),
        feature("DEPARE", [np.array(
            [(1800, 1300), (1800, 2400), (2650, 2400), (2650, 1300)], float)],
            origin, 3.0, 6.0),
        feature("DEPARE", [np.array(
            [(-600, 900), (-600, 2400), (300, 2400), (300, 900)], float)],
            origin, 0.0, 6.0),
        # land (visualization only)
        feature("LNDARE", [np.array(
            [(-2700, 1500), (-2700, 2400), (750, 2400), (750, 1500)], float)], origin),
        feature("LNDARE", [np.array(
            [(-1100, -480), (-1100, -160), (-650, -160), (-650, -480)], float)], origin),
    ]
    return {"type": "FeatureCollection", "features": features}


def littlebelt_ais(seed=20210501):
    """Synthetic traffic: northbound deep-draught vessels detour through the
    western basin before continuing north-east; assorted clutter rows
    exercise the message filter."""
    rng = np.random.default_rng(seed)
    origin = LITTLEBELT_FILTER.center
    spine = np.array([
        (-2550, -100), (-1900, -300), (-1350, -650), (-350, -1150),
        (0, -1450), (350, -1150), (1000, -700), (1700, -350), (2550, 100),
    ], float)
    rows = []
    t0 = datetime(2021, 5, 1, tzinfo=timezone.utc).timestamp()
    for voyage in range(60):
        mmsi = 219000000 + int(rng.integers(100000, 999999))
        draught = float(rng.choice([4.0, 5.0, 6.0, 6.5, 7.0, 8.0, 9.0],
                                   p=[0.15, 0.15, 0.2, 0.15, 0.15, 0.12, 0.08]))
        sog = float(np.clip(rng.normal(11.0, 2.0), 5.0, 18.0))
        offset = rng.normal(0.0, 80.0)
        t = t0 + voyage * 1800.0 + float(rng.uniform(0, 600))
        pts = _densify(spine, step=150.0)
        normals = _normals(pts)
        for k, (p, nvec) in enumerate(zip(pts, normals)):
            wob = offset + rng.normal(0.0, 40.0)
            pos = p + wob * nvec
            rows.append((mmsi, t + k * 25.0, sog + float(rng.normal(0, 0.3)),
                         draught, pos))
    # clutter: moored vessel, fast rescue craft, shallow barge
    rows += [(219111111, t0 + k * 60.0, 0.2, 7.0,
              np.array([-2000.0, 300.0])) for k in range(40)]
    rows += [(219222222, t0 + k * 20.0, 55.0, 1.2,
              np.array([500.0 + 200.0 * k, -300.0])) for k in range(10)]
    return _rows_to_csv(rows, origin)


# ---------------------------------------------------------------------------
# Great Belt analog
# ---------------------------------------------------------------------------

def greatbelt_navigable(bay_south: float):
    """Narrow north-south channel with a mid-channel western bay whose
    southern extent is the tuning parameter."""
    channel = [
        (-3200, -300), (-3200, 280),
        (-2400, 280),                                         # basin-shared edge
        (-1800, 260), (-600, 240), (600, 260), (1800, 300),   # east side
        (3200, 320), (3200, -300),
        (1900, -280), (900, -260),                            # west side
        (700, -420), (700, -2300), (-bay_south, -2300), (-bay_south, -420),
        (-900, -300), (-2000, -280),
    ]
    main = NavPolygon(Ring(np.array(channel, float)), (), 6.0, 18.0)
    south_basin = NavPolygon(Ring(np.array(
        [(-3200, 280), (-3200, 1100), (-2400, 1100), (-2400, 280)], float)),
        (), 8.0, 15.0)
    return [main, south_basin]


def greatbelt_chart(bay_south: float):
    origin = GREATBELT_FILTER.center
    main, basin = greatbelt_navigable(bay_south)
    features = [
        feature("DEPARE", [main.exterior.vertices], origin, 6.0, 18.0),
        feature("DEPARE", [basin.exterior.vertices], origin, 8.0, 15.0),
        feature("DEPARE", [np.array(
            [(-3300, -2500), (-3300, -1300), (-1500, -1300), (-1500, -2500)], float)],
            origin, 2.0, 6.0),
        feature("DEPARE", [np.array(
            [(1200, 900), (1200, 2500), (3200, 2500), (3200, 900)], float)],
            origin, 0.0, 4.0),
        feature("LNDARE", [np.array(
            [(-3300, 1400), (-3300, 2500), (900, 2500), (900, 1400)], float)], origin),
        feature("LNDARE", [np.array(
            [(1300, -2500), (1300, -1200), (3200, -1200), (3200, -2500)], float)], origin),
    ]
    return {"type": "FeatureCollection", "features": features}


def greatbelt_ais(seed=20210502):
    """Two-lane traffic: southbound keeps to the western side (through the
    bay mouth), northbound to the east."""
    rng = np.random.default_rng(seed)
    origin = GREATBELT_FILTER.center
    south_lane = np.array([
        (3100, 60), (1800, -40), (800, -250), (0, -650),
        (-800, -250), (-1900, -90), (-3100, -30),
    ], float)
    north_lane = np.array([
        (-3100, 150), (-1800, 200), (0, 170), (1800, 230), (3100, 260),
    ], float)
    rows = []
    t0 = datetime(2021, 5, 2, tzinfo=timezone.utc).timestamp()
    for voyage in range(70):
        southbound = voyage % 2 == 0
        lane = south_lane if southbound else north_lane
        mmsi = 220000000 + int(rng.integers(100000, 999999))
        draught = float(rng.choice([4.5, 5.5, 6.0, 6.5, 7.5, 8.5],
                                   p=[0.18, 0.17, 0.2, 0.2, 0.15, 0.1]))
        sog = float(np.clip(rng.normal(10.5, 1.8), 5.0, 17.0))
        offset = rng.normal(0.0, 90.0)
        t = t0 + voyage * 1500.0 + float(rng.uniform(0, 500))
        pts = _densify(lane, step=140.0)
        normals = _normals(pts)
        for k, (p, nvec) in enumerate(zip(pts, normals)):
            wob = offset + rng.normal(0.0, 45.0)
            rows.append((mmsi, t + k * 25.0, sog + float(rng.normal(0, 0.3)),
                         draught, p + wob * nvec))
    rows += [(220333333, t0 + k * 90.0, 0.1, 6.5,
              np.array([2500.0, -800.0])) for k in range(25)]
    return _rows_to_csv(rows, origin)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _densify(polyline, step):
    out = [polyline[0]]
    for a, b in zip(polyline[:-1], polyline[1:]):
        d = np.hypot(*(b - a))
        k = max(int(math.ceil(d / step)), 1)
        for i in range(1, k + 1):
            out.append(a + (i / k) * (b - a))
    return np.array(out)


def _normals(pts):
    d = np.gradient(pts, axis=0)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return np.column_stack([-d[:, 1], d[:, 0]])


def _rows_to_csv(rows, origin):
    from fairway.geometry import unproject
    out = []
    for mmsi, t, sog, draught, pos in rows:
        geo = unproject(pos, origin)
        stamp = datetime.fromtimestamp(t, tz=timezone.utc).strftime(
            "%Y-%m-%dT%H:%M:%SZ")
        out.append([mmsi, stamp, f"{max(sog, 0.0):.1f}", f"{draught:.1f}",
                    f"{geo.lat:.7f}", f"{geo.lon:.7f}"])
    return out


def write_ais(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mmsi", "timestamp", "sog_kn", "draught_m", "lat", "lon"])
        w.writerows(rows)


def scenario(name, chart, filt, own, target, track, plan, notes):
    return {
        "name": name,
        "notes": notes,
        "chart": chart,
        "geofilter": {"lat_min": filt.lat_min, "lat_max": filt.lat_max,
                      "lon_min": filt.lon_min, "lon_max": filt.lon_max},
        "required_depth_m": 6.0,
        "simplify_eps_m": 5.0,
        "kde_model": f"{name.split('_')[0]}_kde",
        "own_ship": own,
        "target": target,
        "nominal_track": track,
        "plan": plan,
    }


def geo(pos, filt):
    lat, lon = unproject_array(np.asarray(pos, float)[None, :], filt.center)
    return {"lat": round(float(lat[0]), 7), "lon": round(float(lon[0]), 7)}


def main():
    FIXTURES.mkdir(exist_ok=True)

    bay_west = tune(littlebelt_navigable, 0.4065, -2400.0, -900.0)
    lb_ratio = region_ratio(littlebelt_navigable(bay_west))
    (FIXTURES / "littlebelt_chart.json").write_text(
        json.dumps(littlebelt_chart(bay_west), indent=1) + "\n")
    write_ais(FIXTURES / "littlebelt_ais.csv", littlebelt_ais())

    bay_north = tune(greatbelt_navigable, 0.2677, 150.0, 700.0)
    gb_ratio = region_ratio(greatbelt_navigable(bay_north))
    (FIXTURES / "greatbelt_chart.json").write_text(
        json.dumps(greatbelt_chart(bay_north), indent=1) + "\n")
    write_ais(FIXTURES / "greatbelt_ais.csv", greatbelt_ais())

    lb = LITTLEBELT_FILTER
    own = geo([-2350.0, 60.0], lb) | {
        "cog_deg": 355.0, "sog_kn": 12.0, "draught_m": 6.0,
        "length_m": 120.0, "min_turn_radius_m": 250.0}
    target = geo([-1350.0, 20.0], lb) | {
        "cog_deg": 355.0, "sog_kn": 6.0, "draught_m": 6.0, "length_m": 110.0}
    track = [geo([-2350.0, 60.0], lb), geo([0.0, -40.0], lb),
             geo([1900.0, 100.0], lb)]
    plan = {"w1": 30000.0, "w2": 1.0, "eta_m": 260.0, "goal_bias": 0.05,
            "gamma_m": 3500.0, "max_iter": 1800, "goal_tolerance_m": 80.0,
            "kde_step_m": 30.0, "seed": 2021}
    (FIXTURES / "littlebelt_overtaking.json").write_text(json.dumps(scenario(
        "littlebelt_overtaking", "littlebelt_chart.json", lb, own, target,
        track, plan,
        f"analytic navigable/bbox area ratio {lb_ratio:.4f}"), indent=1) + "\n")

    gb = GREATBELT_FILTER
    own = geo([2500.0, -60.0], gb) | {
        "cog_deg": 181.0, "sog_kn": 10.0, "draught_m": 6.5,
        "length_m": 140.0, "min_turn_radius_m": 250.0}
    target = geo([-2500.0, -90.0], gb) | {
        "cog_deg": 0.5, "sog_kn": 10.0, "draught_m": 7.0, "length_m": 140.0}
    track = [geo([2500.0, -60.0], gb), geo([0.0, -80.0], gb),
             geo([-2600.0, -70.0], gb)]
    plan = {"w1": 30000.0, "w2": 1.0, "eta_m": 260.0, "goal_bias": 0.05,
            "gamma_m": 3500.0, "max_iter": 1800, "goal_tolerance_m": 80.0,
            "kde_step_m": 30.0, "seed": 2022}
    (FIXTURES / "greatbelt_headon.json").write_text(json.dumps(scenario(
        "greatbelt_headon", "greatbelt_chart.json", gb, own, target, track,
        plan, f"analytic navigable/bbox area ratio {gb_ratio:.4f}"), indent=1) + "\n")

    print(f"littlebelt: bay_west={bay_west:.2f} ratio={lb_ratio:.6f}")
    print(f"greatbelt: bay_north={bay_north:.2f} ratio={gb_ratio:.6f}")


if __name__ == "__main__":
    main()

"""Chart geometry and AIS history ingestion.

Charts arrive as a JSON FeatureCollection pre-converted from ENC source
data: polygon features in [lon, lat] degrees carrying ``layer`` ("DEPARE"
for depth areas, "LNDARE" for land) and depth attributes DRVAL1/DRVAL2 in
meters.  AIS history arrives as CSV with header
``mmsi,timestamp,sog_kn,draught_m,lat,lon`` and ISO-8601 UTC timestamps.

Everything is projected about the geofilter center so chart polygons and
AIS positions share one local frame.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ChartParseError, EmptyRegionError, InputError
from .geometry import (GeoFilter, GeoPoint, NavPolygon, Ring, clip_to_filter,
                       project_array)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AisMessage:
    """One position report: identity, time, speed, draught, position."""

    mmsi: int
    t: float          # seconds since epoch, UTC
    sog: float        # knots
    draught: float    # meters
    pos: GeoPoint

    def __post_init__(self):
        if not (100_000_000 <= self.mmsi <= 999_999_999):
            raise InputError(f"MMSI must have 9 digits: {self.mmsi}")
        if self.sog < 0 or self.draught < 0 or not np.isfinite(self.t):
            raise InputError("sog/draught must be >= 0 and timestamp finite")


@dataclass(frozen=True)
class AisFilter:
    """Region window, speed band (exclusive) and draught floor (inclusive)."""

    region: GeoFilter
    sog_min: float
    sog_max: float
    draught_min: float

    def __post_init__(self):
        if not (0.0 <= self.sog_min < self.sog_max) or self.draught_min < 0:
            raise InputError("need 0 <= sog_min < sog_max and draught_min >= 0")


@dataclass
class ChartSet:
    """Cropped, projected chart features sharing one local frame."""

    origin: GeoPoint
    depth_areas: list = field(default_factory=list)
    land_areas: list = field(default_factory=list)


def _feature_rings(geometry, origin: GeoPoint):
    """Project a GeoJSON Polygon's rings ([lon, lat]) to local Rings."""
    coords = geometry.get("coordinates", [])
    rings = []
    for ring_coords in coords:
        arr = np.asarray(ring_coords, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InputError("ring coordinates must be [lon, lat] pairs")
        local = project_array(arr[:, 1], arr[:, 0], origin)
        rings.append(Ring(local))
    return rings


def load_chart(path, filt: GeoFilter) -> ChartSet:
    """Load chart features intersecting the geofilter, cropped to it.

    Features are projected about the filter center; depth areas keep their
    DRVAL1/DRVAL2 attributes.  Depth features without DRVAL1 are rejected
    with a warning; self-intersecting rings abort the load.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ChartParseError(f"{path}: malformed JSON at line {exc.lineno}: "
                              f"{exc.msg}") from exc
    features = doc.get("features")
    if not isinstance(features, list):
        raise ChartParseError(f"{path}: not a FeatureCollection")
    origin = filt.center
    chart = ChartSet(origin=origin)
    for idx, feature in enumerate(features):
        props = feature.get("properties", {})
        layer = props.get("layer")
        if layer not in ("DEPARE", "LNDARE"):
            continue
        geometry = feature.get("geometry", {})
        if geometry.get("type") != "Polygon":
            logger.warning("feature %d: unsupported geometry %r skipped",
                           idx, geometry.get("type"))
            continue
        if layer == "DEPARE":
            if "DRVAL1" not in props:
                logger.warning("feature %d: DEPARE without DRVAL1 rejected", idx)
                continue
            depth_min = float(props["DRVAL1"])
            depth_max = float(props.get("DRVAL2", depth_min))
        else:
            depth_min = depth_max = 0.0
        try:
            rings = _feature_rings(geometry, origin)
            poly = NavPolygon(rings[0], tuple(rings[1:]), depth_min, depth_max)
        except InputError as exc:
            raise ChartParseError(f"{path}: feature {idx}: {exc}") from exc
        pieces = clip_to_filter(poly, filt, origin)
        if layer == "DEPARE":
            chart.depth_areas.extend(pieces)
        else:
            chart.land_areas.extend(pieces)
    return chart


def navigable_region(chart: ChartSet, required_depth: float):
    """Depth areas whose minimum water depth meets the requirement.

    The >= comparison on DRVAL1 is deliberate; chart contour conventions
    make the boundary case measure-zero.
    """
    if not required_depth > 0:
        raise InputError("required depth must be positive")
    keep = [p for p in chart.depth_areas if p.depth_min >= required_depth]
    if not keep:
        raise EmptyRegionError(
            f"no depth areas with min depth >= {required_depth} m")
    return keep


AIS_HEADER = ["mmsi", "timestamp", "sog_kn", "draught_m", "lat", "lon"]


def _parse_timestamp(text: str) -> float:
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def load_ais(path):
    """Parse an AIS CSV into messages; invalid rows are skipped with a
    warning each, and a file with more than half its rows invalid is an
    error.  An empty file yields an empty list."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        if [f.strip() for f in reader.fieldnames] != AIS_HEADER:
            raise InputError(
                f"{path}: expected header {','.join(AIS_HEADER)}")
        messages = []
        bad = 0
        for lineno, row in enumerate(reader, start=2):
            try:
                messages.append(AisMessage(
                    mmsi=int(row["mmsi"]),
                    t=_parse_timestamp(row["timestamp"]),
                    sog=float(row["sog_kn"]),
                    draught=float(row["draught_m"]),
                    pos=GeoPoint(float(row["lat"]), float(row["lon"])),
                ))
            except (InputError, KeyError, TypeError, ValueError) as exc:
                bad += 1
                logger.warning("%s:%d: skipping row (%s)", path, lineno, exc)
    total = len(messages) + bad
    if total and bad > 0.5 * total:
        raise InputError(f"{path}: {bad}/{total} rows invalid")
    return messages


def filter_ais(msgs, f: AisFilter):
    """Messages inside the region window, speed band and draught floor.

    Region bounds are inclusive, the speed band is exclusive on both ends
    (drops moored buoys and fast rescue craft), the draught floor is
    inclusive.  Order is preserved.
    """
    return [m for m in msgs
            if f.region.lat_min <= m.pos.lat <= f.region.lat_max
            and f.region.lon_min <= m.pos.lon <= f.region.lon_max
            and f.sog_min < m.sog < f.sog_max
            and m.draught >= f.draught_min]


def positions_local(msgs, origin: GeoPoint) -> np.ndarray:
    """Project message positions to an (n, 2) local (north, east) array."""
    if not msgs:
        return np.empty((0, 2))
    lat = np.array([m.pos.lat for m in msgs])
    lon = np.array([m.pos.lon for m in msgs])
    return project_array(lat, lon, origin)

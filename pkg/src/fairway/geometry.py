"""Planar geometry for confined-water planning.

Local coordinates are metric North-East pairs on a tangent plane anchored at
a declared geodetic origin.  Throughout the package a local point is a
length-2 array-like ``(north, east)`` in meters; vertex arrays have shape
``(k, 2)`` with the same column order.  Where a right-handed x/y plane is
needed (signed areas, shapely interop) we map ``x = east, y = north``, so
counter-clockwise on a chart (north up, east right) is positive area.

The projection is equirectangular about the origin latitude.  Planning
regions in this toolkit span well under 0.1 degree, where the distortion of
that choice stays below 0.1 m, small against chart and AIS accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely

from .errors import InputError

EARTH_RADIUS_M = 6371008.8  # IUGG mean earth radius
DEG_TO_RAD = math.pi / 180.0
BOUNDARY_TOL_M = 1e-9       # points this close to a ring edge count as inside
MIN_CLIP_AREA_M2 = 1e-6     # clip fragments below this are dropped


@dataclass(frozen=True)
class GeoPoint:
    """WGS-84 position in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise InputError(f"coordinates out of range: lat={self.lat}, lon={self.lon}")


@dataclass(frozen=True)
class GeoFilter:
    """Rectangular geodetic window used to select and crop chart features."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max) or not (self.lon_min < self.lon_max):
            raise InputError("geofilter bounds must satisfy min < max on both axes")

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(0.5 * (self.lat_min + self.lat_max),
                        0.5 * (self.lon_min + self.lon_max))

    def covers(self, lat, lon):
        """Vectorized inclusive membership test."""
        return ((self.lat_min <= np.asarray(lat)) & (np.asarray(lat) <= self.lat_max)
                & (self.lon_min <= np.asarray(lon)) & (np.asarray(lon) <= self.lon_max))


def _meters_per_degree(origin: GeoPoint):
    m_north = DEG_TO_RAD * EARTH_RADIUS_M
    m_east = DEG_TO_RAD * EARTH_RADIUS_M * math.cos(origin.lat * DEG_TO_RAD)
    return m_north, m_east


def project(p: GeoPoint, origin: GeoPoint) -> np.ndarray:
    """Project a geodetic point to local (north, east) meters about ``origin``."""
    m_north, m_east = _meters_per_degree(origin)
    return np.array([(p.lat - origin.lat) * m_north, (p.lon - origin.lon) * m_east])


def unproject(p, origin: GeoPoint) -> GeoPoint:
    """Inverse of :func:`project`; round-trips within 1e-9 degrees locally."""
    m_north, m_east = _meters_per_degree(origin)
    north, east = float(p[0]), float(p[1])
    return GeoPoint(origin.lat + north / m_north, origin.lon + east / m_east)


def project_array(lat, lon, origin: GeoPoint) -> np.ndarray:
    """Project arrays of degrees to an ``(n, 2)`` array of (north, east) meters."""
    m_north, m_east = _meters_per_degree(origin)
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    return np.column_stack([(lat - origin.lat) * m_north, (lon - origin.lon) * m_east])


def unproject_array(pts, origin: GeoPoint):
    """Map an ``(n, 2)`` local array back to ``(lat, lon)`` degree arrays."""
    m_north, m_east = _meters_per_degree(origin)
    pts = np.asarray(pts, dtype=float)
    return origin.lat + pts[:, 0] / m_north, origin.lon + pts[:, 1] / m_east


def _signed_area(vertices: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise rings (east-x, north-y)."""
    y = vertices[:, 0]  # north
    x = vertices[:, 1]  # east
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class Ring:
    """Simple closed polygon boundary; closure is implicit (no repeated vertex).

    Self-intersecting input is rejected rather than repaired: chart data is
    authoritative and silent repair would hide upstream problems.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InputError("ring vertices must be an (k, 2) array of (north, east)")
        # strip an explicit closing vertex and consecutive duplicates
        if len(v) > 1 and np.allclose(v[0], v[-1]):
            v = v[:-1]
        keep = np.ones(len(v), dtype=bool)
        keep[1:] = np.any(v[1:] != v[:-1], axis=1)
        v = v[keep]
        if len(np.unique(v, axis=0)) < 3:
            raise InputError("ring needs at least 3 distinct vertices")
        if not np.all(np.isfinite(v)):
            raise InputError("ring vertices must be finite")
        if self._self_intersects(v):
            raise InputError("self-intersecting ring rejected")
        object.__setattr__(self, "vertices", v)

    @staticmethod
    def _self_intersects(v: np.ndarray) -> bool:
        n = len(v)
        a0 = v
        a1 = np.roll(v, -1, axis=0)
        i, j = np.triu_indices(n, k=2)
        nonadjacent = ~((i == 0) & (j == n - 1))
        i, j = i[nonadjacent], j[nonadjacent]
        if len(i) == 0:
            return False

        def orient(p, q, r):
            return ((q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0])
                    - (q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]))

        d1 = orient(a0[j], a1[j], a0[i])
        d2 = orient(a0[j], a1[j], a1[i])
        d3 = orient(a0[i], a1[i], a0[j])
        d4 = orient(a0[i], a1[i], a1[j])
        proper = ((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0)) \
            & (d1 != 0) & (d2 != 0) & (d3 != 0) & (d4 != 0)
        return bool(np.any(proper))

    @property
    def signed_area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def is_ccw(self) -> bool:
        return self.signed_area > 0.0

    def reversed(self) -> "Ring":
        return Ring(self.vertices[::-1].copy())

    def edges(self) -> np.ndarray:
        """Edge array of shape (k, 2, 2): [start, end] per edge, closed."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)


@dataclass(frozen=True)
class NavPolygon:
    """Chart-derived area: exterior ring, optional holes, min/max water depth.

    Exterior is stored counter-clockwise and holes clockwise regardless of
    input orientation.  Treated as immutable after construction.
    """

    exterior: Ring
    holes: tuple = ()
    depth_min: float = 0.0
    depth_max: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.depth_min <= self.depth_max):
            raise InputError(f"depth bounds invalid: {self.depth_min}..{self.depth_max}")
        ext = self.exterior if self.exterior.is_ccw else self.exterior.reversed()
        fixed_holes = tuple(h.reversed() if h.is_ccw else h for h in self.holes)
        for h in fixed_holes:
            inside = _parity_inside(_ring_edge_stack([ext]), h.vertices)
            if not np.all(inside):
                raise InputError("hole vertex outside polygon exterior")
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", fixed_holes)

    @property
    def rings(self):
        return (self.exterior,) + self.holes

    @property
    def area(self) -> float:
        return self.exterior.area - sum(h.area for h in self.holes)

    @cached_property
    def bbox(self) -> np.ndarray:
        """[[north_min, east_min], [north_max, east_max]] over the exterior."""
        v = self.exterior.vertices
        return np.array([v.min(axis=0), v.max(axis=0)])

    @cached_property
    def _edge_stack(self):
        return _ring_edge_stack(self.rings)

    def contains(self, p) -> bool:
        """Point-in-polygon with boundary points counting as inside."""
        return contains(self, p)

    def contains_batch(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized strict-interior test (holes excluded, boundary rim not
        special-cased); a True here always implies :func:`contains`."""
        return _parity_inside(self._edge_stack, np.asarray(pts, dtype=float))

    def to_shapely(self):
        ext = self.exterior.vertices[:, ::-1]  # (east, north) = (x, y)
        holes = [h.vertices[:, ::-1] for h in self.holes]
        return shapely.Polygon(ext, holes)


def _ring_edge_stack(rings):
    """Stack ring edges into arrays (y0, x0, y1, x1) for parity tests."""
    starts = np.concatenate([r.vertices for r in rings])
    ends = np.concatenate([np.roll(r.vertices, -1, axis=0) for r in rings])
    return starts, ends


def _parity_inside(edge_stack, pts: np.ndarray) -> np.ndarray:
    """Even-odd crossing parity of an upward (east) ray against stacked edges.

    Counting parity over exterior and hole rings together yields
    interior-minus-holes in one pass.
    """
    starts, ends = edge_stack
    pts = np.atleast_2d(pts)
    out = np.zeros(len(pts), dtype=bool)
    # chunk over points to bound the (edges x points) temporaries
    chunk = max(1, int(4e6 / max(len(starts), 1)))
    for lo in range(0, len(pts), chunk):
        p = pts[lo:lo + chunk]
        pn = p[:, 0][None, :]   # north
        pe = p[:, 1][None, :]   # east
        n0 = starts[:, 0][:, None]
        e0 = starts[:, 1][:, None]
        n1 = ends[:, 0][:, None]
        e1 = ends[:, 1][:, None]
        straddles = (n0 > pn) != (n1 > pn)
        with np.errstate(divide="ignore", invalid="ignore"):
            east_at = e0 + (pn - n0) * (e1 - e0) / (n1 - n0)
        hits = straddles & (east_at > pe)
        out[lo:lo + chunk] = np.sum(hits, axis=0) % 2 == 1
    return out


def _point_edge_distance(p, starts, ends) -> float:
    """Min distance from p to any edge in the stack."""
    d = ends - starts
    w = np.asarray(p, dtype=float)[None, :] - starts
    seg_len2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.divide(np.einsum("ij,ij->i", w, d), seg_len2,
                          out=np.zeros_like(seg_len2), where=seg_len2 > 0), 0.0, 1.0)
    closest = starts + t[:, None] * d
    diff = np.asarray(p, dtype=float)[None, :] - closest
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", diff, diff))))


def contains(poly: NavPolygon, p) -> bool:
    """True iff p is inside the exterior and outside all holes; boundary
    points count as inside with a 1e-9 m tolerance."""
    p = np.asarray(p, dtype=float)
    starts, ends = poly._edge_stack
    if bool(_parity_inside((starts, ends), p[None, :])[0]):
        return True
    return _point_edge_distance(p, starts, ends) <= BOUNDARY_TOL_M


def simplify(ring: Ring, epsilon: float) -> Ring:
    """Douglas-Peucker ring simplification.

    Every removed vertex lies within ``epsilon`` of the simplified outline.
    ``epsilon == 0`` returns the input unchanged, as does any simplification
    that would drop below 3 vertices or self-intersect.
    """
    if epsilon < 0:
        raise InputError("epsilon must be >= 0")
    if epsilon == 0:
        return ring
    closed = np.vstack([ring.vertices, ring.vertices[:1]])
    kept = _douglas_peucker(closed, epsilon)
    if len(kept) - 1 < 3:
        return ring
    try:
        out = Ring(kept[:-1])
    except InputError:
        return ring
    return out if out.is_ccw == ring.is_ccw else out.reversed()


def _douglas_peucker(points: np.ndarray, epsilon: float) -> np.ndarray:
    n = len(points)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        seg = points[j] - points[i]
        seg_len = np.hypot(*seg)
        mid = points[i + 1:j]
        if seg_len == 0.0:
            dist = np.hypot(*(mid - points[i]).T)
        else:
            d = mid - points[i]
            dist = np.abs(seg[0] * d[:, 1] - seg[1] * d[:, 0]) / seg_len
        k = int(np.argmax(dist))
        if dist[k] >= epsilon:
            keep[i + 1 + k] = True
            stack.append((i, i + 1 + k))
            stack.append((i + 1 + k, j))
    return points[keep]


class PolygonSet:
    """A set of disjoint polygons with precomputed edge stacks.

    Shared by the samplers and the planner for fast containment and
    segment-validity queries; construction is cheap relative to chart I/O.
    """

    def __init__(self, polys):
        self.polys = list(polys)
        if not self.polys:
            raise InputError("polygon set must be non-empty")
        self._stacks = [p._edge_stack for p in self.polys]
        self._all_starts = np.concatenate([s for s, _ in self._stacks])
        self._all_ends = np.concatenate([e for _, e in self._stacks])
        # a single convex polygon without holes admits a much cheaper
        # segment test: endpoints inside imply the whole segment inside
        self._convex = (len(self.polys) == 1 and not self.polys[0].holes
                        and _ring_is_convex(self.polys[0].exterior.vertices))

    @cached_property
    def bbox(self) -> np.ndarray:
        boxes = np.stack([p.bbox for p in self.polys])
        return np.array([boxes[:, 0].min(axis=0), boxes[:, 1].max(axis=0)])

    @property
    def area(self) -> float:
        return sum(p.area for p in self.polys)

    def contains_point(self, p) -> bool:
        return any(contains(poly, p) for poly in self.polys)

    def contains_batch(self, pts: np.ndarray) -> np.ndarray:
        """Strict-interior membership in any polygon (vectorized)."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(len(pts), dtype=bool)
        for stack in self._stacks:
            todo = ~out
            if not np.any(todo):
                break
            out[todo] = _parity_inside(stack, pts[todo])
        return out

    def _crossing_params(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Parameters t in (0, 1) where segment a-b meets any ring edge.

        Includes proper crossings, vertex touches and the ends of collinear
        overlaps, so midpoints of the spans between consecutive parameters
        fully classify the segment.
        """
        p, r = a, b - a
        q = self._all_starts
        s = self._all_ends - q
        rxs = r[0] * s[:, 1] - r[1] * s[:, 0]
        qp = q - p
        qpxr = qp[:, 0] * r[1] - qp[:, 1] * r[0]
        ts = []
        nonpar = rxs != 0
        if np.any(nonpar):
            t = (qp[nonpar, 0] * s[nonpar, 1] - qp[nonpar, 1] * s[nonpar, 0]) / rxs[nonpar]
            u = qpxr[nonpar] / rxs[nonpar]
            ok = (t > 0) & (t < 1) & (u >= 0) & (u <= 1)
            ts.append(t[ok])
        collinear = (~nonpar) & (qpxr == 0)
        if np.any(collinear):
            rr = float(np.dot(r, r))
            if rr > 0:
                t0 = (qp[collinear] @ r) / rr
                t1 = t0 + (s[collinear] @ r) / rr
                both = np.concatenate([t0, t1])
                ts.append(both[(both > 0) & (both < 1)])
        if not ts:
            return np.empty(0)
        return np.unique(np.concatenate(ts))

    def segment_inside(self, a, b) -> bool:
        """True iff the closed segment a-b stays within the polygon union.

        A crossing at a ring edge is permitted when the midpoint of the local
        sub-segment is still contained in some polygon of the set; this keeps
        segments valid across shared boundaries of adjacent polygons.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if not (self.contains_point(a) and self.contains_point(b)):
            return False
        if self._convex:
            return True
        params = self._crossing_params(a, b)
        if len(params) == 0:
            return True
        knots = np.concatenate([[0.0], params, [1.0]])
        mids = a[None, :] + (0.5 * (knots[:-1] + knots[1:]))[:, None] * (b - a)[None, :]
        inside = self.contains_batch(mids)
        return all(inside[i] or self.contains_point(mids[i]) for i in range(len(mids)))

    def segments_inside(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Batch form of :meth:`segment_inside` for (k, 2) endpoint arrays."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        k = len(A)
        out = np.zeros(k, dtype=bool)
        ok_a = self.contains_batch(A)
        ok_b = self.contains_batch(B)
        if self._convex:
            both = ok_a & ok_b
            out[both] = True
            for i in np.flatnonzero(~both):
                out[i] = self.segment_inside(A[i], B[i])  # boundary-tolerant
            return out
        for i in range(k):
            if ok_a[i] and ok_b[i]:
                out[i] = True if self._fast_clear(A[i], B[i]) else self.segment_inside(A[i], B[i])
            else:
                out[i] = self.segment_inside(A[i], B[i])
        return out

    def _fast_clear(self, a, b) -> bool:
        """No edge of any ring intersects segment a-b at all (sufficient)."""
        p, r = a, b - a
        q = self._all_starts
        s = self._all_ends - q
        rxs = r[0] * s[:, 1] - r[1] * s[:, 0]
        qp = q - p
        qpxr = qp[:, 0] * r[1] - qp[:, 1] * r[0]
        qpxs = qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = qpxs / rxs
            u = qpxr / rxs
        crossing = (rxs != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
        parallel_touch = (rxs == 0) & (qpxr == 0)
        return not (np.any(crossing) or np.any(parallel_touch))


def _ring_is_convex(v: np.ndarray) -> bool:
    d = np.roll(v, -1, axis=0) - v
    cross = d[:, 1] * np.roll(d, -1, axis=0)[:, 0] - d[:, 0] * np.roll(d, -1, axis=0)[:, 1]
    return bool(np.all(cross >= 0) or np.all(cross <= 0))


def segment_inside(polys, a, b) -> bool:
    """Module-level convenience over :meth:`PolygonSet.segment_inside`."""
    return PolygonSet(polys).segment_inside(a, b)


def clip_to_filter(poly: NavPolygon, filt: GeoFilter, origin: GeoPoint):
    """Intersect a polygon with the projected rectangular geofilter.

    Returns zero or more valid polygons with depth attributes preserved;
    fragments below 1e-6 m^2 are dropped.
    """
    m_north, m_east = _meters_per_degree(origin)
    south = (filt.lat_min - origin.lat) * m_north
    north = (filt.lat_max - origin.lat) * m_north
    west = (filt.lon_min - origin.lon) * m_east
    east = (filt.lon_max - origin.lon) * m_east
    box = shapely.box(west, south, east, north)  # x = east, y = north
    inter = shapely.intersection(poly.to_shapely(), box)
    return shapely_to_navpolys(inter, poly.depth_min, poly.depth_max)


def shapely_to_navpolys(geom, depth_min: float, depth_max: float):
    """Convert a shapely (multi)polygon result into NavPolygons."""
    out = []
    if geom.is_empty:
        return out
    if geom.geom_type == "Polygon":
        parts = [geom]
    elif geom.geom_type in ("MultiPolygon", "GeometryCollection"):
        parts = [g for g in geom.geoms if g.geom_type == "Polygon"]
    else:
        parts = []
    for part in parts:
        if part.area < MIN_CLIP_AREA_M2:
            continue
        ext = np.asarray(part.exterior.coords)[:, ::-1]  # back to (north, east)
        holes = [Ring(np.asarray(h.coords)[:, ::-1]) for h in part.interiors
                 if abs(_signed_area(np.asarray(h.coords)[:, ::-1])) >= MIN_CLIP_AREA_M2]
        out.append(NavPolygon(Ring(ext), tuple(holes), depth_min, depth_max))
    return out

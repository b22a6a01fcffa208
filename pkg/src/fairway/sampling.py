"""Uniform sampling of non-convex navigable regions.

Two interchangeable schemes:

* ``TriangleSampler`` — constrained Delaunay triangulation of the polygons,
  then area-weighted triangle selection and a square-root parameterization
  that is uniform within each triangle.  Every draw is a valid sample.
* ``RejectionSampler`` — uniform draws in the axis-aligned bounding box,
  keeping only points inside the polygons.  Cheap to configure, pays per
  sample in proportion to the region/bounding-box area ratio.

Both are seeded with a counter-based generator (Philox) so identical seed
and region reproduce the identical sample sequence.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import shapely
from sklearn.base import BaseEstimator

from .errors import InputError
from .geometry import NavPolygon, PolygonSet, Ring

logger = logging.getLogger(__name__)

MIN_TRIANGLE_AREA_M2 = 1e-12
MIN_POLY_AREA_M2 = 1e-6
MAX_RELATIVE_OVERLAP = 1e-6


@dataclass(frozen=True)
class Triangle:
    """Non-degenerate triangle with counter-clockwise vertices (north, east)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if self._signed_area(a, b, c) < 0:
            b, c = c, b
        if self._signed_area(a, b, c) <= MIN_TRIANGLE_AREA_M2:
            raise InputError("degenerate triangle")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @staticmethod
    def _signed_area(a, b, c) -> float:
        # x = east, y = north
        return 0.5 * ((b[1] - a[1]) * (c[0] - a[0]) - (c[1] - a[1]) * (b[0] - a[0]))

    @property
    def area(self) -> float:
        return self._signed_area(self.a, self.b, self.c)


class TriangulatedRegion:
    """Triangle soup with a cumulative-area table for O(log T) selection."""

    def __init__(self, triangles, source_area=None):
        if not triangles:
            raise InputError("empty triangulation")
        self.triangles = list(triangles)
        self.vertices = np.stack([[t.a, t.b, t.c] for t in self.triangles])  # (T, 3, 2)
        areas = np.array([t.area for t in self.triangles])
        self.cum_area = np.cumsum(areas)
        self.total_area = float(self.cum_area[-1])
        if source_area is not None:
            rel = abs(self.total_area - source_area) / source_area
            if rel > MIN_POLY_AREA_M2:
                raise InputError(
                    f"triangulation lost area: {self.total_area} vs {source_area}")

    def __len__(self):
        return len(self.triangles)

    def select(self, u) -> np.ndarray:
        """Area-weighted triangle index for uniforms ``u`` via binary search."""
        return np.searchsorted(self.cum_area, np.asarray(u) * self.total_area,
                               side="right").clip(0, len(self.triangles) - 1)


def triangulate(polys) -> TriangulatedRegion:
    """Constrained Delaunay triangulation of disjoint polygons, pooled.

    Every triangle lies inside exactly one source polygon and outside its
    holes; the triangle areas sum to the polygon-set area.  Overlapping
    inputs are an error; degenerate polygons are skipped with a warning.
    """
    polys = list(polys)
    _check_disjoint(polys)
    triangles = []
    total_source = 0.0
    for poly in polys:
        if poly.area < MIN_POLY_AREA_M2:
            logger.warning("skipping degenerate polygon (area %.3g m^2)", poly.area)
            continue
        total_source += poly.area
        triangles.extend(_cdt(poly))
    if not triangles:
        raise InputError("no polygons to triangulate")
    return TriangulatedRegion(triangles, source_area=total_source)


def _cdt(poly: NavPolygon):
    out = []
    shp = poly.to_shapely()
    pieces = shapely.constrained_delaunay_triangles(shp)
    centroids = []
    candidates = []
    for geom in pieces.geoms:
        coords = np.asarray(geom.exterior.coords)[:3, ::-1]  # (north, east)
        try:
            tri = Triangle(coords[0], coords[1], coords[2])
        except InputError:
            continue  # sliver below the degeneracy floor
        candidates.append(tri)
        centroids.append((tri.a + tri.b + tri.c) / 3.0)
    if not candidates:
        return out
    # guard: keep only triangles whose centroid is inside the source polygon
    inside = poly.contains_batch(np.asarray(centroids))
    for tri, ok in zip(candidates, inside):
        if ok:
            out.append(tri)
    return out


def _check_disjoint(polys):
    shps = [p.to_shapely() for p in polys]
    for i in range(len(shps)):
        for j in range(i + 1, len(shps)):
            bi, bj = polys[i].bbox, polys[j].bbox
            if (bi[1] < bj[0]).any() or (bj[1] < bi[0]).any():
                continue
            inter = shapely.intersection(shps[i], shps[j]).area
            limit = MAX_RELATIVE_OVERLAP * min(polys[i].area, polys[j].area)
            if inter > limit:
                raise InputError(f"polygons {i} and {j} overlap (area {inter:.3g} m^2)")


def sample_triangle(tri: Triangle, r1: float, r2: float) -> np.ndarray:
    """Uniform point in a triangle from two unit-interval variables.

    P = (1 - sqrt(r1)) A + sqrt(r1) (1 - r2) B + sqrt(r1) r2 C; the square
    root flattens the density so P is uniform over the triangle.
    """
    if not (0.0 <= r1 <= 1.0 and 0.0 <= r2 <= 1.0):
        raise InputError("r1, r2 must lie in [0, 1]")
    s = np.sqrt(r1)
    return (1.0 - s) * tri.a + s * (1.0 - r2) * tri.b + s * r2 * tri.c


def _sample_triangles(vertices: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Vectorized square-root sampling for (k, 3, 2) vertex stacks."""
    s = np.sqrt(r1)[:, None]
    r2 = r2[:, None]
    return ((1.0 - s) * vertices[:, 0]
            + s * (1.0 - r2) * vertices[:, 1]
            + s * r2 * vertices[:, 2])


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


class TriangleSampler(BaseEstimator):
    """Uniform region sampler backed by a triangulation.

    Parameters
    ----------
    seed : int
        Stream seed; identical seed and region give identical samples.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, polys, y=None):
        """Triangulate the polygon set (or adopt a prebuilt region)."""
        if isinstance(polys, TriangulatedRegion):
            self.region_ = polys
        else:
            self.region_ = triangulate(polys)
        self.rng_ = _rng(self.seed)
        return self

    def sample(self, n: int, return_index: bool = False):
        """Draw ``n`` uniform points over the region, shape (n, 2)."""
        u = self.rng_.random((int(n), 3))
        idx = self.region_.select(u[:, 0])
        pts = _sample_triangles(self.region_.vertices[idx], u[:, 1], u[:, 2])
        return (pts, idx) if return_index else pts

    def draw(self) -> np.ndarray:
        """Single uniform point (continues the stream)."""
        return self.sample(1)[0]


class RejectionSampler(BaseEstimator):
    """Uniform region sampler by rejection from the bounding box.

    Candidate points come from a buffered deterministic stream, so the
    sequence of accepted points does not depend on batch sizing or on how
    draws are grouped across calls.
    """

    def __init__(self, seed: int = 0, batch_size: int = 4096):
        self.seed = seed
        self.batch_size = batch_size

    def fit(self, polys, y=None):
        self.polyset_ = polys if isinstance(polys, PolygonSet) else PolygonSet(polys)
        bbox = self.polyset_.bbox
        if self.polyset_.area <= 0 or (bbox[1] - bbox[0]).prod() <= 0:
            raise InputError("region must have positive area inside its bounding box")
        self.bbox_ = bbox
        self.area_ratio_ = self.polyset_.area / float((bbox[1] - bbox[0]).prod())
        self.rng_ = _rng(self.seed)
        self._pending_pts = np.empty((0, 2))
        self._pending_ok = np.empty(0, dtype=bool)
        self._cursor = 0
        self._last_accept = -1   # global index of the last accepted candidate
        self._base = 0           # global index of _pending[0]
        return self

    def _refill(self):
        lo, hi = self.bbox_
        u = self.rng_.random((self.batch_size, 2))
        pts = lo + u * (hi - lo)
        ok = self.polyset_.contains_batch(pts)
        self._base += self._cursor
        self._pending_pts = np.concatenate([self._pending_pts[self._cursor:], pts])
        self._pending_ok = np.concatenate([self._pending_ok[self._cursor:], ok])
        self._cursor = 0

    def draw(self):
        """Next valid point and the number of candidates it consumed."""
        pts, attempts = self.sample(1, return_attempts=True)
        return pts[0], int(attempts[0])

    def sample(self, n: int, return_attempts: bool = False):
        """Draw ``n`` valid points; optionally the attempts spent on each."""
        n = int(n)
        pts = np.empty((n, 2))
        attempts = np.empty(n, dtype=np.int64)
        filled = 0
        while filled < n:
            hits = np.flatnonzero(self._pending_ok[self._cursor:])
            take = min(len(hits), n - filled)
            if take > 0:
                sel = self._cursor + hits[:take]
                pts[filled:filled + take] = self._pending_pts[sel]
                accepted_global = self._base + sel
                attempts[filled:filled + take] = np.diff(
                    accepted_global, prepend=self._last_accept)
                self._last_accept = int(accepted_global[-1])
                self._cursor = int(sel[-1]) + 1
                filled += take
            if filled < n:
                self._cursor = len(self._pending_ok)
                self._refill()
        return (pts, attempts) if return_attempts else pts

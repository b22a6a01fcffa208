"""Grounding-aware path planning toolkit for marine craft in confined waters.

Learns customary traffic corridors from historical AIS positions (FFT-based
kernel density estimation), extracts draught-feasible areas from chart depth
polygons, triangulates them for uniform sampling, and plans COLREGs-aware
path deviations with an RRT* whose cost trades path length against distance
from well-travelled waters.
"""

from .errors import (ChartParseError, EmptyRegionError, FairwayError,
                     InputError, NoPathError)
from .geometry import (GeoFilter, GeoPoint, NavPolygon, PolygonSet, Ring,
                       clip_to_filter, contains, project, project_array,
                       segment_inside, simplify, unproject, unproject_array)

__version__ = "0.1.0"

__all__ = [
    "ChartParseError", "EmptyRegionError", "FairwayError", "InputError",
    "NoPathError", "GeoFilter", "GeoPoint", "NavPolygon", "PolygonSet",
    "Ring", "clip_to_filter", "contains", "project", "project_array",
    "segment_inside", "simplify", "unproject", "unproject_array",
    "__version__",
]

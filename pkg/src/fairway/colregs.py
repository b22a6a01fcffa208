"""Encounter classification and compliance for COLREGs Rules 13-15.

Single-vessel encounters between power-driven ships, classified from the
relative bearings between own ship and target.  The target is modelled with
a comfort-zone ellipse of full axes 8L x 3.2L aligned with its course, and
predicted forward at constant course and speed.

Sector conventions (configurable where marked): overtaking uses the 112.5
degree abaft-the-beam stern-light sector; head-on tolerates +/-6 degrees of
dead-ahead bearing on both ships and a course difference within 10 degrees
of reciprocal.  A crossing is recognized only when the two sector views are
mutually consistent (give-way sees the other to starboard AND the other
sees it to port), which keeps classification symmetric between the ships.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError

KNOT_MPS = 1852.0 / 3600.0
ABAFT_BEAM_DEG = 112.5        # stern-light sector half-boundary
HEAD_ON_BEARING_DEG = 6.0     # default bow-sector half-angle
HEAD_ON_COURSE_DEG = 10.0     # default reciprocal-course tolerance
COMPLIANCE_STEP_S = 5.0       # default predicate sampling step


class EncounterKind(Enum):
    OVERTAKING = "Overtaking"          # Rule 13
    HEAD_ON = "HeadOn"                 # Rule 14
    CROSSING_GIVE_WAY = "CrossingGiveWay"    # Rule 15, own ship yields
    CROSSING_STAND_ON = "CrossingStandOn"
    NONE = "None"


@dataclass(frozen=True)
class VesselState:
    """Kinematic state plus the dimensions the rules depend on."""

    pos: np.ndarray       # (north, east) meters
    cog: float            # degrees clockwise from North
    sog: float            # knots
    length: float         # meters
    draught: float = 0.0  # meters

    def __post_init__(self):
        if not (0.0 <= self.cog < 360.0):
            raise InputError(f"cog must be in [0, 360): {self.cog}")
        if self.sog < 0 or self.length <= 0:
            raise InputError("sog must be >= 0 and length > 0")
        object.__setattr__(self, "pos", np.asarray(self.pos, dtype=float))

    @property
    def velocity(self) -> np.ndarray:
        """(north, east) meters per second."""
        rad = math.radians(self.cog)
        return self.sog * KNOT_MPS * np.array([math.cos(rad), math.sin(rad)])


@dataclass(frozen=True)
class Encounter:
    """Classified situation; the kind stays fixed once assigned."""

    kind: EncounterKind
    target: VesselState
    classified_at: float = 0.0


@dataclass(frozen=True)
class ComfortEllipse:
    """Clearance zone around a target, semi-axes 4L along track, 1.6L abeam."""

    center: np.ndarray
    heading: float      # degrees, equals the target course
    semi_major: float
    semi_minor: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @classmethod
    def for_vessel(cls, v: VesselState) -> "ComfortEllipse":
        return cls(v.pos, v.cog, 4.0 * v.length, 1.6 * v.length)


def absolute_bearing(p, q) -> float:
    """Compass bearing of q seen from p, degrees in [0, 360)."""
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    if not np.any(d):
        raise InputError("bearing undefined for coincident positions")
    return math.degrees(math.atan2(d[1], d[0])) % 360.0


def relative_bearing(from_state: VesselState, to_pos) -> float:
    """Bearing of a position measured clockwise from the vessel's heading."""
    return (absolute_bearing(from_state.pos, to_pos) - from_state.cog) % 360.0


def _course_diff(a: float, b: float) -> float:
    """Unsigned circular difference of two courses, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def _near_bow(bearing: float, half_angle: float) -> bool:
    return bearing <= half_angle or bearing >= 360.0 - half_angle


def classify(own: VesselState, target: VesselState,
             head_on_bearing: float = HEAD_ON_BEARING_DEG,
             head_on_course: float = HEAD_ON_COURSE_DEG,
             at_time: float = 0.0) -> Encounter:
    """Classify the encounter from the two relative bearings.

    Overtaking takes precedence: own ship approaching from more than 112.5
    degrees abaft the target's beam at higher speed.  Head-on requires both
    ships near each other's bow on near-reciprocal courses.  Crossings need
    mutually consistent starboard/port sector views (see module docstring).
    """
    bearing_of_target = relative_bearing(own, target.pos)
    bearing_of_own = relative_bearing(target, own.pos)
    kind = EncounterKind.NONE
    if ABAFT_BEAM_DEG < bearing_of_own < 360.0 - ABAFT_BEAM_DEG \
            and own.sog > target.sog:
        kind = EncounterKind.OVERTAKING
    elif _near_bow(bearing_of_target, head_on_bearing) \
            and _near_bow(bearing_of_own, head_on_bearing) \
            and _course_diff(own.cog, target.cog) >= 180.0 - head_on_course:
        kind = EncounterKind.HEAD_ON
    elif head_on_bearing <= bearing_of_target <= ABAFT_BEAM_DEG \
            and 360.0 - ABAFT_BEAM_DEG <= bearing_of_own <= 360.0 - head_on_bearing:
        kind = EncounterKind.CROSSING_GIVE_WAY
    elif 360.0 - ABAFT_BEAM_DEG <= bearing_of_target <= 360.0 - head_on_bearing \
            and head_on_bearing <= bearing_of_own <= ABAFT_BEAM_DEG:
        kind = EncounterKind.CROSSING_STAND_ON
    return Encounter(kind=kind, target=target, classified_at=at_time)


def ellipse_contains(e: ComfortEllipse, p) -> bool:
    """Point in the (closed) ellipse, tested in its rotated frame."""
    d = np.asarray(p, dtype=float) - e.center
    rad = math.radians(e.heading)
    u = np.array([math.cos(rad), math.sin(rad)])       # along heading
    v = np.array([-math.sin(rad), math.cos(rad)])      # to starboard
    along = float(d @ u)
    across = float(d @ v)
    return (along / e.semi_major) ** 2 + (across / e.semi_minor) ** 2 <= 1.0


def predict_linear(state: VesselState, t0: float = 0.0):
    """Constant-course, constant-speed prediction anchored at time t0."""
    vel = state.velocity

    def at(t: float) -> VesselState:
        return VesselState(pos=state.pos + vel * (t - t0), cog=state.cog,
                           sog=state.sog, length=state.length,
                           draught=state.draught)

    return at


def compliant(encounter: Encounter, own_pos_at, target_pred,
              t0: float, t1: float, step: float = COMPLIANCE_STEP_S) -> bool:
    """Check an own-ship motion over [t0, t1] against the encounter rules.

    Sampled at fixed step (endpoints included).  Any sample inside the
    target's comfort ellipse fails.  For head-on and give-way crossings a
    sample in the blocked quadrant forward of the target's beam on its
    starboard side also fails: that quadrant is where a deviation would cut
    across the stand-on vessel's bow, while an astern or port-bow passage
    stays admissible (overtaking may pass either side).
    """
    if t1 <= t0:
        raise InputError("need t1 > t0")
    if encounter.kind is EncounterKind.NONE:
        return True
    ts = np.arange(t0, t1, step)
    if len(ts) == 0 or ts[-1] < t1:
        ts = np.append(ts, t1)
    own = np.array([np.asarray(own_pos_at(t), dtype=float) for t in ts])
    targets = [target_pred(t) for t in ts]
    tpos = np.array([s.pos for s in targets])
    cogs = np.array([s.cog for s in targets])
    L = encounter.target.length
    d = own - tpos
    rads = np.radians(cogs)
    along = d[:, 0] * np.cos(rads) + d[:, 1] * np.sin(rads)
    across = -d[:, 0] * np.sin(rads) + d[:, 1] * np.cos(rads)
    if np.any((along / (4.0 * L)) ** 2 + (across / (1.6 * L)) ** 2 <= 1.0):
        return False
    if encounter.kind in (EncounterKind.HEAD_ON, EncounterKind.CROSSING_GIVE_WAY):
        rel = (np.degrees(np.arctan2(d[:, 1], d[:, 0])) - cogs) % 360.0
        if np.any((rel > 0.0) & (rel < 90.0)):
            return False
    return True

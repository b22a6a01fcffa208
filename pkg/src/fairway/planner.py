"""Grounding-aware RRT* over triangulated navigable regions.

Nodes carry a time stamp (constant own-ship speed along tree edges) and the
accumulated pair (path length, integral of normalized traffic density), from
which the path cost

    cost = w1 * (1 - mean_density) + w2 * length

is recomputed exactly wherever the tree is rewired; ``mean_density`` is the
length-weighted mean of the normalized density along the path, so the cost
reduces to pure length at w1 = 0 and rewards corridors of heavy historical
traffic when w1 dominates.

Edges are admitted by a three-part feasibility check: the segment must stay
within the navigable polygons, the heading change at the junction must fit
an inscribed arc of the minimum turning radius, and the motion along the
edge must respect the encounter rules against the predicted target.  The
best goal-reaching path found so far is snapshotted (states copied and
re-validated) whenever it improves, which makes the reported best-cost
trace non-increasing by construction and keeps the returned path valid even
though rewiring never re-validates stale subtree timings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import colregs
from .colregs import KNOT_MPS, Encounter, EncounterKind, predict_linear
from .errors import InputError, NoPathError
from .geometry import PolygonSet
from .kde import KdeModel
from .sampling import TriangleSampler, TriangulatedRegion


@dataclass
class PlanConfig:
    """Planner knobs; defaults suit km-scale confined-water scenarios."""

    w1: float = 0.0                  # weight on (1 - mean normalized density)
    w2: float = 1.0                  # weight per meter of path length
    eta: float = 200.0               # max extension step, m
    goal_bias: float = 0.05
    gamma: float = 2000.0            # rewiring radius constant
    max_iter: int = 3000
    min_turn_radius: float = 0.0     # m; 0 disables the turn-angle bound
    own_speed: float = 10.0          # knots
    goal_tolerance: float = 50.0     # m
    kde_step: float = 25.0           # m, sub-segment length for the density integral
    seed: int = 0
    compliance_step: float = colregs.COMPLIANCE_STEP_S  # s

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or self.w1 + self.w2 <= 0:
            raise InputError("weights must be non-negative with w1 + w2 > 0")
        if self.eta <= 0 or not (0.0 <= self.goal_bias <= 0.2):
            raise InputError("need eta > 0 and goal_bias in [0, 0.2]")
        if self.max_iter < 1 or self.own_speed <= 0:
            raise InputError("need max_iter >= 1 and own_speed > 0")
        if self.goal_tolerance < 0 or self.kde_step <= 0:
            raise InputError("need goal_tolerance >= 0 and kde_step > 0")

    @property
    def own_speed_mps(self) -> float:
        return self.own_speed * KNOT_MPS


@dataclass
class PlanEnv:
    """Static planning environment shared (read-only) across plan calls."""

    polyset: PolygonSet
    region: TriangulatedRegion
    kde: KdeModel | None = None
    encounter: Encounter | None = None

    @property
    def target_pred(self):
        if self.encounter is None or self.encounter.kind is EncounterKind.NONE:
            return None
        return predict_linear(self.encounter.target, t0=self.encounter.classified_at)


@dataclass
class PlannedPath:
    """Solution polyline with its cost decomposition and track waypoints."""

    states: np.ndarray               # (k, 2) from start to goal
    length: float
    mean_density: float
    cost: float
    waypoints: list                  # (north, east, radius_of_acceptance)
    iterations: int = 0
    seed: int = 0
    cost_trace: list = field(default_factory=list)  # (iteration, cost) improvements


def extend(from_pos, to_pos, eta: float) -> np.ndarray:
    """Point at most ``eta`` along the straight line from -> to."""
    a = np.asarray(from_pos, dtype=float)
    b = np.asarray(to_pos, dtype=float)
    d = b - a
    dist = float(np.hypot(*d))
    if dist == 0.0:
        raise InputError("extend undefined for coincident points")
    return b if dist <= eta else a + (eta / dist) * d


def turn_within_bound(p_prev, p_mid, p_new, min_turn_radius: float) -> bool:
    """Heading change at ``p_mid`` fits an arc of the minimum turning radius.

    The admissible change is 2*asin(min(edge lengths) / (2R)): the inscribed
    arc through two chords of those lengths.  Radius <= 0 disables the test.
    """
    if min_turn_radius <= 0:
        return True
    v1 = np.asarray(p_mid, float) - np.asarray(p_prev, float)
    v2 = np.asarray(p_new, float) - np.asarray(p_mid, float)
    l1 = float(np.hypot(*v1))
    l2 = float(np.hypot(*v2))
    if l1 == 0.0 or l2 == 0.0:
        return True
    arg = min(l1, l2) / (2.0 * min_turn_radius)
    if arg >= 1.0:
        return True
    limit = 2.0 * math.asin(arg)
    cos_turn = np.clip(float(v1 @ v2) / (l1 * l2), -1.0, 1.0)
    return math.acos(cos_turn) <= limit + 1e-12


class PlanTree:
    """Array-backed tree: positions, parent links, accumulated cost pairs."""

    def __init__(self, root: np.ndarray, cfg: PlanConfig, env: PlanEnv):
        self.cfg = cfg
        self.env = env
        cap = 256
        self.pos = np.zeros((cap, 2))
        self.parent = np.full(cap, -1, dtype=np.int64)
        self.t = np.zeros(cap)
        self.length = np.zeros(cap)      # accumulated meters from root
        self.dens = np.zeros(cap)        # accumulated density integral, meters
        self.cost = np.zeros(cap)
        self.edge_len = np.zeros(cap)    # incoming edge of each node
        self.edge_dens = np.zeros(cap)
        self.children = [[]]
        self.pos[0] = np.asarray(root, dtype=float)
        self.n = 1

    def _grow(self):
        cap = len(self.parent)
        for name in ("pos", "parent", "t", "length", "dens", "cost",
                     "edge_len", "edge_dens"):
            arr = getattr(self, name)
            shape = (2 * cap,) + arr.shape[1:]
            new = np.zeros(shape, dtype=arr.dtype)
            if name == "parent":
                new[:] = -1
            new[:cap] = arr
            setattr(self, name, new)

    def path_cost(self, length: float, dens: float) -> float:
        """Cost of a root path with the given accumulated pair."""
        if length <= 0.0:
            return 0.0
        mean = dens / length
        return self.cfg.w1 * (1.0 - mean) + self.cfg.w2 * length

    def nearest(self, x: np.ndarray) -> int:
        d = self.pos[:self.n] - x
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def near(self, x: np.ndarray, n: int | None = None) -> np.ndarray:
        """Indices within min(gamma * sqrt(log n / n), eta) of x."""
        n = self.n if n is None else n
        if n < 2:
            return np.empty(0, dtype=np.int64)
        r = min(self.cfg.gamma * math.sqrt(math.log(n) / n), self.cfg.eta)
        d = self.pos[:self.n] - x
        return np.flatnonzero(np.einsum("ij,ij->i", d, d) <= r * r)

    def edge_pairs(self, A: np.ndarray, B: np.ndarray):
        """(length, density integral) for each edge, batched midpoint rule."""
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        lengths = np.hypot(*(B - A).T)
        if self.env.kde is None or self.cfg.w1 == 0.0:
            return lengths, np.zeros_like(lengths)
        counts = np.maximum(np.ceil(lengths / self.cfg.kde_step).astype(int), 1)
        mids = []
        for a, b, k in zip(A, B, counts):
            s = (np.arange(k) + 0.5) / k
            mids.append(a + s[:, None] * (b - a))
        vals = self.env.kde.lookup_normalized_batch(np.concatenate(mids))
        bounds = np.concatenate([[0], np.cumsum(counts)[:-1]])
        sums = np.add.reduceat(vals, bounds)
        return lengths, sums * lengths / counts

    def _compliant_edge(self, a: np.ndarray, b: np.ndarray, t0: float) -> bool:
        pred = self.env.target_pred
        if pred is None:
            return True
        dist = float(np.hypot(*(b - a)))
        if dist == 0.0:
            return True
        t1 = t0 + dist / self.cfg.own_speed_mps

        def own_pos_at(t):
            s = (t - t0) / (t1 - t0)
            return a + s * (b - a)

        return colregs.compliant(self.env.encounter, own_pos_at, pred, t0, t1,
                                 step=self.cfg.compliance_step)

    def feasible(self, parent: int, candidate: np.ndarray,
                 segment_ok: bool | None = None) -> bool:
        """Edge admissibility: containment, turn bound, encounter rules."""
        a = self.pos[parent]
        if segment_ok is None:
            segment_ok = self.env.polyset.segment_inside(a, candidate)
        if not segment_ok:
            return False
        gp = self.parent[parent]
        if gp >= 0 and not turn_within_bound(self.pos[gp], a, candidate,
                                             self.cfg.min_turn_radius):
            return False
        return self._compliant_edge(a, np.asarray(candidate, float), self.t[parent])

    def insert(self, parent: int, pos: np.ndarray, elen: float, edens: float) -> int:
        if self.n == len(self.parent):
            self._grow()
        i = self.n
        self.pos[i] = pos
        self.parent[i] = parent
        self.edge_len[i] = elen
        self.edge_dens[i] = edens
        self.length[i] = self.length[parent] + elen
        self.dens[i] = self.dens[parent] + edens
        self.t[i] = self.t[parent] + elen / self.cfg.own_speed_mps
        self.cost[i] = self.path_cost(self.length[i], self.dens[i])
        self.children.append([])
        self.children[parent].append(i)
        self.n += 1
        return i

    def best_parent(self, near_idx: np.ndarray, nearest: int, x_new: np.ndarray):
        """Lowest-cost feasible parent among the near set plus the nearest.

        Returns (index, edge_length, edge_density) or None when no candidate
        edge is feasible.
        """
        cand = near_idx if nearest in near_idx else np.append(near_idx, nearest)
        cand = cand.astype(np.int64)
        A = self.pos[cand]
        B = np.repeat(x_new[None, :], len(cand), axis=0)
        seg_ok = self.env.polyset.segments_inside(A, B)
        lengths, dens = self.edge_pairs(A, B)
        totals = np.array([
            self.path_cost(self.length[c] + lengths[k], self.dens[c] + dens[k])
            for k, c in enumerate(cand)])
        for k in np.lexsort((cand, totals)):
            if not seg_ok[k]:
                continue
            c = int(cand[k])
            if self.feasible(c, x_new, segment_ok=True):
                return c, float(lengths[k]), float(dens[k])
        return None

    def rewire(self, near_idx: np.ndarray, new: int):
        """Reparent near nodes through the new node where that lowers cost.

        Ancestors of the new node are never candidates (the mean-density
        cost is not monotone along a path, so unlike the pure-length case a
        cheaper route through a descendant can exist and would close a
        cycle).  A rewire must also keep the turn bound valid at the
        reparented node for its existing children; subtree cost, time and
        accumulated pairs are propagated after each reparenting.
        """
        x_new = self.pos[new]
        ancestors = set(self.path_indices(new))
        ys = np.array([int(y) for y in near_idx if int(y) not in ancestors],
                      dtype=np.int64)
        if len(ys) == 0:
            return
        lengths, dens = self.edge_pairs(np.repeat(x_new[None, :], len(ys), axis=0),
                                        self.pos[ys])
        tot_len = self.length[new] + lengths
        means = np.divide(self.dens[new] + dens, tot_len,
                          out=np.zeros_like(tot_len), where=tot_len > 0)
        cand_cost = self.cfg.w1 * (1.0 - means) + self.cfg.w2 * tot_len
        improving = (lengths > 0) & (cand_cost < self.cost[ys] - 1e-12)
        if not np.any(improving):
            return
        ys, lengths, dens = ys[improving], lengths[improving], dens[improving]
        cand_cost = cand_cost[improving]
        seg_ok = self.env.polyset.segments_inside(
            np.repeat(x_new[None, :], len(ys), axis=0), self.pos[ys])
        for y, elen, edens, cc, ok in zip(ys, lengths, dens, cand_cost, seg_ok):
            y = int(y)
            # an earlier reparent in this pass may already have lowered y
            if cc >= self.cost[y] - 1e-12:
                continue
            if not ok or not self.feasible(new, self.pos[y], segment_ok=True):
                continue
            if not all(turn_within_bound(x_new, self.pos[y], self.pos[c],
                                         self.cfg.min_turn_radius)
                       for c in self.children[y]):
                continue
            old = int(self.parent[y])
            self.children[old].remove(y)
            self.children[new].append(y)
            self.parent[y] = new
            self.edge_len[y] = float(elen)
            self.edge_dens[y] = float(edens)
            self._propagate(y)

    def _propagate(self, root: int):
        stack = [root]
        while stack:
            i = stack.pop()
            p = int(self.parent[i])
            self.length[i] = self.length[p] + self.edge_len[i]
            self.dens[i] = self.dens[p] + self.edge_dens[i]
            self.t[i] = self.t[p] + self.edge_len[i] / self.cfg.own_speed_mps
            self.cost[i] = self.path_cost(self.length[i], self.dens[i])
            stack.extend(self.children[i])

    def path_indices(self, v: int):
        out = [v]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out[::-1]


def sample_point(sampler: TriangleSampler, goal: np.ndarray, goal_bias: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Goal with probability ``goal_bias``, else a uniform region draw."""
    if goal_bias > 0.0 and rng.random() < goal_bias:
        return goal
    return sampler.draw()


def extract_waypoints(states: np.ndarray, min_turn_radius: float,
                      goal_tolerance: float):
    """Waypoint triples (north, east, radius of acceptance), one per state.

    Interior radii take half the shorter adjacent segment, capped by the
    minimum turning radius when one is set; endpoints use the goal
    tolerance.
    """
    states = np.atleast_2d(states)
    k = len(states)
    out = []
    for i in range(k):
        if i == 0 or i == k - 1:
            r = goal_tolerance
        else:
            half_short = 0.5 * min(float(np.hypot(*(states[i] - states[i - 1]))),
                                   float(np.hypot(*(states[i + 1] - states[i]))))
            r = min(min_turn_radius, half_short) if min_turn_radius > 0 else half_short
        out.append((float(states[i][0]), float(states[i][1]), float(r)))
    return out


def path_metrics(states: np.ndarray, kde: KdeModel | None, cfg: PlanConfig):
    """(length, mean normalized density) of a polyline, midpoint rule."""
    states = np.atleast_2d(states)
    if len(states) < 2:
        mean = kde.lookup_normalized(states[0]) if kde is not None else 0.0
        return 0.0, float(mean)
    seg = np.diff(states, axis=0)
    lengths = np.hypot(*seg.T)
    total = float(lengths.sum())
    if kde is None or total == 0.0:
        return total, 0.0
    dens = 0.0
    for a, d, l in zip(states[:-1], seg, lengths):
        if l == 0.0:
            continue
        k = max(int(math.ceil(l / cfg.kde_step)), 1)
        s = (np.arange(k) + 0.5) / k
        vals = kde.lookup_normalized_batch(a + s[:, None] * d)
        dens += float(vals.sum()) * l / k
    return total, dens / total


def validate_path(states: np.ndarray, env: PlanEnv, cfg: PlanConfig) -> bool:
    """Full-horizon recheck of a candidate solution polyline."""
    states = np.atleast_2d(states)
    if len(states) < 2:
        return env.polyset.contains_point(states[0])
    seg = np.diff(states, axis=0)
    lengths = np.hypot(*seg.T)
    keep = lengths > 0
    if not env.polyset.segments_inside(states[:-1][keep], states[1:][keep]).all():
        return False
    for i in range(1, len(states) - 1):
        if not turn_within_bound(states[i - 1], states[i], states[i + 1],
                                 cfg.min_turn_radius):
            return False
    pred = env.target_pred
    if pred is None:
        return True
    times = np.concatenate([[0.0], np.cumsum(lengths)]) / cfg.own_speed_mps
    if times[-1] == 0.0:
        return True

    def own_pos_at(t):
        return np.array([np.interp(t, times, states[:, 0]),
                         np.interp(t, times, states[:, 1])])

    return colregs.compliant(env.encounter, own_pos_at, pred, 0.0,
                             float(times[-1]), step=cfg.compliance_step)


def plan(env: PlanEnv, cfg: PlanConfig, x_start, x_goal) -> PlannedPath:
    """Run the RRT* loop and return the best goal-reaching path found.

    Deterministic for a given seed.  Raises :class:`NoPathError` with tree
    statistics when no feasible goal connection appears within the
    iteration budget.
    """
    x_start = np.asarray(x_start, dtype=float)
    x_goal = np.asarray(x_goal, dtype=float)
    if not env.polyset.contains_point(x_start):
        raise InputError("x_start outside the navigable region")
    if not env.polyset.contains_point(x_goal):
        raise InputError("x_goal outside the navigable region")
    if np.array_equal(x_start, x_goal):
        return _finish(np.array([x_start]), env, cfg, iterations=0, trace=[])

    sampler = TriangleSampler(seed=cfg.seed).fit(env.region)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(cfg.seed) ^ np.uint64(0x9E3779B97F4A7C15)))
    tree = PlanTree(x_start, cfg, env)
    goal_links = {}          # node index -> (link_len, link_dens)
    best = None              # (cost, states)
    trace = []

    def try_goal_link(i: int):
        d = float(np.hypot(*(x_goal - tree.pos[i])))
        if d > cfg.goal_tolerance:
            return
        if d == 0.0:
            goal_links[i] = (0.0, 0.0)
            return
        if tree.feasible(i, x_goal):
            lengths, dens = tree.edge_pairs(tree.pos[i][None, :], x_goal[None, :])
            goal_links[i] = (float(lengths[0]), float(dens[0]))

    try_goal_link(0)
    for it in range(1, cfg.max_iter + 1):
        x_rand = sample_point(sampler, x_goal, cfg.goal_bias, rng)
        i_nearest = tree.nearest(x_rand)
        if np.array_equal(tree.pos[i_nearest], x_rand):
            continue
        x_new = extend(tree.pos[i_nearest], x_rand, cfg.eta)
        if not tree.feasible(i_nearest, x_new):
            continue
        near_idx = tree.near(x_new)
        choice = tree.best_parent(near_idx, i_nearest, x_new)
        if choice is None:
            continue
        parent, elen, edens = choice
        if elen == 0.0:
            continue
        new = tree.insert(parent, x_new, elen, edens)
        tree.rewire(near_idx, new)
        try_goal_link(new)
        if goal_links:
            idx = np.fromiter(goal_links.keys(), dtype=np.int64)
            links = np.array(list(goal_links.values()))
            tot_len = tree.length[idx] + links[:, 0]
            tot_dens = tree.dens[idx] + links[:, 1]
            means = np.divide(tot_dens, tot_len, out=np.zeros_like(tot_dens),
                              where=tot_len > 0)
            totals = cfg.w1 * (1.0 - means) + cfg.w2 * tot_len
            k_best = int(np.argmin(totals))
            if best is None or totals[k_best] < best[0] - 1e-12:
                v = int(idx[k_best])
                states = tree.pos[tree.path_indices(v)]
                if links[k_best, 0] > 0.0:
                    states = np.vstack([states, x_goal])
                if validate_path(states, env, cfg):
                    best = (float(totals[k_best]), states.copy())
                    trace.append((it, best[0]))

    if best is None:
        d = np.hypot(*(tree.pos[:tree.n] - x_goal).T)
        raise NoPathError(
            "no feasible path within the iteration budget",
            stats={"nodes": int(tree.n), "iterations": int(cfg.max_iter),
                   "min_goal_distance_m": float(d.min())})
    return _finish(best[1], env, cfg, iterations=cfg.max_iter, trace=trace)


def _finish(states: np.ndarray, env: PlanEnv, cfg: PlanConfig,
            iterations: int, trace) -> PlannedPath:
    length, mean_density = path_metrics(states, env.kde, cfg)
    cost = cfg.w1 * (1.0 - mean_density) + cfg.w2 * length
    return PlannedPath(
        states=states,
        length=length,
        mean_density=mean_density,
        cost=cost,
        waypoints=extract_waypoints(states, cfg.min_turn_radius, cfg.goal_tolerance),
        iterations=iterations,
        seed=cfg.seed,
        cost_trace=trace,
    )

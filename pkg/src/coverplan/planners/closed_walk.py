"""Low-energy closed walk through an inspection graph that keeps its coverage.

The walk must traverse, for every primitive the graph observed, at least one
edge observing it. Construction: a greedy weighted set cover picks the
required edges, a nearest-neighbor tour strings them together through
shortest graph paths, and 2-opt plus single-edge flips improve the tour.
All tour costs are full translation-plus-turn energies of the realized
polyline.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from coverplan.energy import EnergyParams, polyline_energy
from coverplan.errors import CoverPlanError, InvalidInputError

_GAIN_EPS = 1e-12


@dataclass
class GraphEdge:
    covered: np.ndarray  # sorted triangle ids observed along the edge
    cost: float  # translation energy


@dataclass
class InspectionGraph:
    """Undirected graph of collision-free edges with cached observations."""

    n_primitives: int
    nodes: list[np.ndarray] = field(default_factory=list)
    edges: dict[tuple[int, int], GraphEdge] = field(default_factory=dict)
    adjacency: list[list[int]] = field(default_factory=list)
    observed: np.ndarray = None

    def __post_init__(self):
        if self.observed is None:
            self.observed = np.zeros(self.n_primitives, dtype=bool)

    @property
    def positions(self) -> np.ndarray:
        return np.array(self.nodes, dtype=np.float64).reshape(-1, 3)

    @property
    def observed_ids(self) -> np.ndarray:
        return np.flatnonzero(self.observed)

    def add_node(self, position) -> int:
        self.nodes.append(np.asarray(position, dtype=np.float64))
        self.adjacency.append([])
        return len(self.nodes) - 1

    def add_edge(self, a: int, b: int, covered, cost: float) -> None:
        key = (a, b) if a < b else (b, a)
        if a == b or key in self.edges:
            return
        covered = np.asarray(sorted(set(int(c) for c in np.asarray(covered).ravel())), dtype=np.int64)
        self.edges[key] = GraphEdge(covered, float(cost))
        self.adjacency[a].append(b)
        self.adjacency[b].append(a)
        self.observed[covered] = True

    def edge(self, a: int, b: int) -> GraphEdge:
        return self.edges[(a, b) if a < b else (b, a)]


def greedy_edge_cover(graph: InspectionGraph, weights) -> list[tuple[int, int]]:
    """Edges whose observations jointly cover everything the graph observed.

    Picks the edge with the most newly covered weight per unit energy until
    nothing is left, then drops edges made redundant by later picks.
    """
    weights = np.asarray(weights, dtype=np.float64)
    keys = sorted(graph.edges)
    need = graph.observed.copy()
    chosen: list[tuple[int, int]] = []
    while need.any():
        best, best_ratio = None, -1.0
        for key in keys:
            cov = graph.edges[key].covered
            gain = float(weights[cov[need[cov]]].sum())
            if gain <= 0.0:
                continue
            ratio = gain / max(graph.edges[key].cost, 1e-12)
            if ratio > best_ratio:
                best, best_ratio = key, ratio
        if best is None:
            # zero-weight primitives: fall back to raw counts
            for key in keys:
                if need[graph.edges[key].covered].any():
                    best = key
                    break
        chosen.append(best)
        need[graph.edges[best].covered] = False
    counts = np.zeros(graph.n_primitives, dtype=np.int64)
    for key in chosen:
        counts[graph.edges[key].covered] += 1
    for key in reversed(list(chosen)):
        cov = graph.edges[key].covered
        cov = cov[graph.observed[cov]]
        if cov.size == 0 or np.all(counts[cov] > 1):
            counts[graph.edges[key].covered] -= 1
            chosen.remove(key)
    return chosen


class _Paths:
    """Cheapest (translation) paths between graph nodes, computed on demand."""

    def __init__(self, graph: InspectionGraph):
        self.graph = graph
        self._tree: dict[int, tuple[dict, dict]] = {}

    def _dijkstra(self, src: int):
        if src not in self._tree:
            dist, prev = {src: 0.0}, {}
            heap = [(0.0, src)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                for v in sorted(self.graph.adjacency[u]):
                    nd = d + self.graph.edge(u, v).cost
                    if nd < dist.get(v, np.inf) - 1e-15:
                        dist[v] = nd
                        prev[v] = u
                        heapq.heappush(heap, (nd, v))
            self._tree[src] = (dist, prev)
        return self._tree[src]

    def path(self, a: int, b: int) -> list[int]:
        # computed from the smaller id so path(a, b) is exactly path(b, a) reversed
        lo, hi = (a, b) if a <= b else (b, a)
        dist, prev = self._dijkstra(lo)
        if hi not in dist:
            raise CoverPlanError(f"graph nodes {lo} and {hi} are not connected")
        out = [hi]
        while out[-1] != lo:
            out.append(prev[out[-1]])
        out.reverse()  # lo -> hi
        return out if a == lo else out[::-1]


def _turn(d1, d2) -> float:
    n1, n2 = np.linalg.norm(d1), np.linalg.norm(d2)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return 1.0 - float(np.clip(d1 @ d2 / (n1 * n2), -1.0, 1.0))


class _Tour:
    """Cost model for a sequence of oriented required edges.

    Element ``(e, flip)`` traverses required edge ``e`` from ``u`` to ``v``
    (or ``v`` to ``u`` when flipped). The tour starts and ends at ``start``.
    Turn angles are unchanged by reversing a sub-sequence, so a 2-opt move
    only changes the two junctions at its ends.
    """

    def __init__(self, graph: InspectionGraph, required, start: int, params: EnergyParams):
        self.graph, self.start, self.params = graph, start, params
        self.req = list(required)
        self.paths = _Paths(graph)
        self.pos = graph.positions
        self._junction: dict = {}

    def ends(self, elem):
        u, v = self.req[elem[0]]
        return (v, u) if elem[1] else (u, v)

    def direction(self, elem):
        a, b = self.ends(elem)
        return self.pos[b] - self.pos[a]

    def junction(self, prev, nxt) -> float:
        """Energy from the end of ``prev`` into the start of ``nxt`` (None = tour start/end)."""
        key = (prev, nxt)
        if key in self._junction:
            return self._junction[key]
        a = self.start if prev is None else self.ends(prev)[1]
        b = self.start if nxt is None else self.ends(nxt)[0]
        nodes = self.paths.path(a, b)
        pts = self.pos[nodes]
        segs = list(np.diff(pts, axis=0))
        dirs = ([self.direction(prev)] if prev is not None else []) + segs
        dirs += [self.direction(nxt)] if nxt is not None else []
        cost = self.params.w_trans * float(sum(np.linalg.norm(s) for s in segs))
        cost += self.params.w_rot * sum(_turn(d1, d2) for d1, d2 in zip(dirs[:-1], dirs[1:]))
        self._junction[key] = cost
        return cost

    def cost(self, seq) -> float:
        full = [None] + list(seq) + [None]
        return sum(self.junction(a, b) for a, b in zip(full[:-1], full[1:]))

    def nearest_neighbor(self) -> list:
        left = set(range(len(self.req)))
        seq, prev = [], None
        while left:
            best = min(
                ((self.junction(prev, (e, f)), e, f) for e in sorted(left) for f in (False, True)),
                key=lambda t: t[0],
            )
            seq.append((best[1], best[2]))
            left.remove(best[1])
            prev = seq[-1]
        return seq

    def two_opt(self, seq: list) -> list:
        """Reverse sub-sequences (single elements included) while energy drops."""
        n = len(seq)
        improved = True
        while improved:
            improved = False
            for i in range(n):
                for j in range(i, n):
                    before = seq[i - 1] if i > 0 else None
                    after = seq[j + 1] if j + 1 < n else None
                    old = self.junction(before, seq[i]) + self.junction(seq[j], after)
                    first = (seq[j][0], not seq[j][1])
                    last = (seq[i][0], not seq[i][1])
                    new = self.junction(before, first) + self.junction(last, after)
                    if new < old - _GAIN_EPS:
                        seq[i : j + 1] = [(e, not f) for e, f in reversed(seq[i : j + 1])]
                        improved = True
        return seq

    def realize(self, seq) -> list[int]:
        walk = [self.start]
        for elem in seq:
            a, b = self.ends(elem)
            walk.extend(self.paths.path(walk[-1], a)[1:])
            walk.append(b)
        walk.extend(self.paths.path(walk[-1], self.start)[1:])
        return walk


@dataclass
class ClosedWalk:
    nodes: list[int]
    required_edges: list[tuple[int, int]]
    energy: float


def find_closed_walk(
    graph: InspectionGraph,
    start: int = 0,
    params: EnergyParams | None = None,
    weights=None,
) -> ClosedWalk:
    """Closed walk from ``start`` whose edges cover every observed primitive.

    ``weights`` (default: all ones) are the per-primitive values used by the
    set-cover step, normally triangle areas.
    """
    params = params or EnergyParams(collision_penalty=0.0)
    if not 0 <= start < len(graph.nodes):
        raise InvalidInputError(f"start node {start} not in graph")
    if not graph.observed.any():
        raise InvalidInputError("graph has observed nothing")
    weights = np.ones(graph.n_primitives) if weights is None else weights
    required = greedy_edge_cover(graph, weights)
    tour = _Tour(graph, required, start, params)
    seq = tour.two_opt(tour.nearest_neighbor())
    nodes = tour.realize(seq)
    energy = polyline_energy(graph.positions[nodes], params).energy
    return ClosedWalk(nodes, required, energy)

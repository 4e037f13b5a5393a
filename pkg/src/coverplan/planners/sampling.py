"""Sampling-based inspection planning.

Grows a graph of collision-free edges from a start configuration by drawing
points from a Sobol sequence over the padded bounding box, until the edges
together observe a fraction ``f`` of the target area. The last ``epsilon``
of that fraction is chased with edges sampled next to specific unobserved
triangles. A closed walk through the graph then covers everything observed.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from coverplan.discretize import DEFAULT_BUFFER, DEFAULT_PAD, DEFAULT_VOLUME_SCALING, compute_wp_interval, padded_box
from coverplan.energy import EnergyParams
from coverplan.errors import InvalidInputError, UnreachableCoverageError
from coverplan.geometry import TriangleMesh
from coverplan.planners.closed_walk import ClosedWalk, InspectionGraph, find_closed_walk
from coverplan.sensing import CameraModel, default_cameras, edge_coverage_mask, make_edge_pose, snapshot_spacing

Q0_MAX_DISTANCE = 10.0


@dataclass(frozen=True)
class SamplingParams:
    f: float = 1.0
    epsilon: float = 0.05
    k_neighbors: int = 5
    q0: tuple[float, float, float] | None = None
    rng_seed: int = 0
    local_radius: float | None = None  # default: 2 x far plane
    max_stall_iterations: int = 500
    view_attempts: int = 10
    pad: float = DEFAULT_PAD
    buffer: float = DEFAULT_BUFFER
    volume_scaling: float = DEFAULT_VOLUME_SCALING

    def __post_init__(self):
        if not 0 < self.f <= 1:
            raise InvalidInputError("f must be in (0, 1]")
        if not 0 <= self.epsilon < self.f:
            raise InvalidInputError("epsilon must be in [0, f)")
        if self.k_neighbors < 1 or self.max_stall_iterations < 1 or self.view_attempts < 1:
            raise InvalidInputError("k_neighbors, max_stall_iterations and view_attempts must be >= 1")


class GraphBuilder:
    """Incremental construction of an inspection graph for one target.

    The Sobol stream is unscrambled, so two builders with the same ``q0`` and
    ``rng_seed`` produce identical graphs.
    """

    def __init__(
        self,
        mesh: TriangleMesh,
        params: SamplingParams,
        cameras: Sequence[CameraModel] | None = None,
        energy_params: EnergyParams | None = None,
    ):
        if params.q0 is None:
            raise InvalidInputError("SamplingParams.q0 is required to build a graph")
        self.mesh, self.params = mesh, params
        self.cameras = default_cameras() if cameras is None else tuple(cameras)
        self.energy = energy_params or EnergyParams()
        self.box = padded_box(mesh, params.pad)
        wp_interval = compute_wp_interval(mesh, params.pad, params.volume_scaling)
        self.step = wp_interval
        self.spacing = snapshot_spacing(wp_interval, self.cameras)
        far = max(c.far_plane for c in self.cameras)
        self.local_radius = params.local_radius if params.local_radius is not None else 2.0 * far
        self.view_range = 0.9 * min(far, self.local_radius)
        self.center = mesh.center
        self.sobol = qmc.Sobol(d=3, scramble=False)
        self._sobol_buffer = np.empty((0, 3))
        self.rng = np.random.default_rng(params.rng_seed)
        self.graph = InspectionGraph(mesh.n_triangles)
        self._tried: set[int] = set()
        q0 = np.asarray(params.q0, dtype=np.float64)
        if mesh.point_distances(q0[None])[0] < params.buffer:
            raise InvalidInputError("start configuration is inside the buffer around the target")
        self.graph.add_node(q0)

    # -- helpers -----------------------------------------------------------

    @property
    def observed_fraction(self) -> float:
        ids = np.flatnonzero(self.graph.observed & self.mesh.eligible)
        return float(self.mesh.triangle_areas[ids].sum()) / self.mesh.total_area

    def _next_sobol(self) -> np.ndarray:
        if len(self._sobol_buffer) == 0:
            # draws in powers of two keep the sequence's balance properties
            n = 64 if self.sobol.num_generated == 0 else self.sobol.num_generated
            self._sobol_buffer = self.sobol.random(n)
        u, self._sobol_buffer = self._sobol_buffer[0], self._sobol_buffer[1:]
        return self.box[0] + u * (self.box[1] - self.box[0])

    def _valid(self, p) -> bool:
        if np.any(p < self.box[0]) or np.any(p > self.box[1]):
            return False
        return bool(self.mesh.point_distances(p[None])[0] >= self.params.buffer)

    def _edge(self, p, q):
        """(covered mask, cost), or None when pq comes closer than the safety buffer."""
        if self.mesh.segment_collides(p, q, self.energy.safety_buffer):
            return None
        mask = edge_coverage_mask(self.mesh, make_edge_pose(p, q, self.center), self.cameras, self.spacing)
        return mask, self.energy.w_trans * float(np.linalg.norm(q - p))

    def _connections(self, p) -> list[tuple[int, np.ndarray, float]]:
        """Collision-free edges from ``p`` to up to k nearest graph nodes."""
        pos = self.graph.positions
        order = np.argsort(np.linalg.norm(pos - p, axis=1), kind="stable")
        k = self.params.k_neighbors
        out = []
        for j in order[: 4 * k]:
            e = self._edge(p, pos[j])
            if e is not None:
                out.append((int(j), e[0], e[1]))
                if len(out) == k:
                    break
        return out

    # -- graph growth ------------------------------------------------------

    def add_to_graph(self) -> bool:
        """Sample one configuration and wire it in. True when it observed something new."""
        p = self._next_sobol()
        if not self._valid(p):
            return False
        links = self._connections(p)
        if not links:
            return False
        before = self.graph.observed.copy()
        node = self.graph.add_node(p)
        for j, mask, cost in links:
            self.graph.add_edge(node, j, np.flatnonzero(mask), cost)
        return bool((self.graph.observed & ~before).any())

    def _pick_unobserved(self) -> int | None:
        open_ids = np.flatnonzero(self.mesh.eligible & ~self.graph.observed)
        if open_ids.size == 0:
            return None
        fresh = [i for i in open_ids.tolist() if i not in self._tried]
        if not fresh:
            self._tried.clear()
            fresh = open_ids.tolist()
        target = int(self.rng.choice(fresh))
        self._tried.add(target)
        return target

    def _random_unit(self) -> np.ndarray:
        v = self.rng.normal(size=3)
        return v / np.linalg.norm(v)

    def add_missing_view(self) -> bool:
        """Try a random edge near a random unobserved triangle; keep it only if it sees something new."""
        target = self._pick_unobserved()
        if target is None:
            return False
        c = self.mesh.centroids[target]
        n = self.mesh.normals[target]
        lo = min(self.params.buffer, self.view_range)
        for _ in range(self.params.view_attempts):
            v = self._random_unit()
            if v @ n < 0:
                v = -v
            p1 = c + self.rng.uniform(lo, self.view_range) * v
            p2 = p1 + self.rng.uniform(0.0, 2.0 * self.step) * self._random_unit()
            if not (self._valid(p1) and self._valid(p2)):
                continue
            inner = self._edge(p1, p2)
            if inner is None:
                continue
            links1 = self._connections(p1)
            links2 = self._connections(p2)
            if not links1 and not links2:
                continue
            seen = inner[0].copy()
            for _, mask, _ in links1 + links2:
                seen |= mask
            if not (seen & ~self.graph.observed).any():
                return False
            a = self.graph.add_node(p1)
            b = self.graph.add_node(p2)
            self.graph.add_edge(a, b, np.flatnonzero(inner[0]), inner[1])
            for node, links in ((a, links1), (b, links2)):
                for j, mask, cost in links:
                    self.graph.add_edge(node, j, np.flatnonzero(mask), cost)
            return True
        return False

    def build(self) -> InspectionGraph:
        """Grow the graph until the observed area fraction reaches ``f``.

        Raises:
            UnreachableCoverageError: ``max_stall_iterations`` consecutive
                steps observed nothing new.
        """
        f, eps = self.params.f, self.params.epsilon
        stall = iterations = 0
        frac = self.observed_fraction
        while frac < f:
            iterations += 1
            grew = self.add_missing_view() if frac >= f - eps else self.add_to_graph()
            if grew:
                stall = 0
                frac = self.observed_fraction
            else:
                stall += 1
                if stall >= self.params.max_stall_iterations:
                    raise UnreachableCoverageError(f, frac, iterations)
        self.iterations = iterations
        return self.graph


def build_inspection_graph(mesh: TriangleMesh, params: SamplingParams, cameras=None, energy_params=None) -> InspectionGraph:
    return GraphBuilder(mesh, params, cameras, energy_params).build()


def sample_start(mesh: TriangleMesh, rng: np.random.Generator, buffer: float = DEFAULT_BUFFER) -> np.ndarray:
    """Random start outside the bounding box, at most 10 m from it, not below the floor."""
    lo = mesh.bbox[0] - np.array([Q0_MAX_DISTANCE, Q0_MAX_DISTANCE, 0.0])
    hi = mesh.bbox[1] + Q0_MAX_DISTANCE
    for _ in range(100_000):
        p = rng.uniform(lo, hi)
        gap = np.maximum(np.maximum(mesh.bbox[0] - p, p - mesh.bbox[1]), 0.0)
        d = float(np.linalg.norm(gap))
        if 0.0 < d <= Q0_MAX_DISTANCE and mesh.point_distances(p[None])[0] >= buffer:
            return p
    raise InvalidInputError("could not sample a start configuration")


@dataclass
class SamplingRun:
    f: float
    repetition: int
    q0: list[float]
    params: dict
    positions: np.ndarray | None = None
    walk: ClosedWalk | None = None
    graph_nodes: int = 0
    graph_edges: int = 0
    observed_fraction: float = 0.0
    iterations: int = 0
    timings: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def plan_sampling(
    mesh: TriangleMesh,
    params: SamplingParams,
    cameras=None,
    energy_params: EnergyParams | None = None,
    repetition: int = 0,
) -> SamplingRun:
    """Build the graph and extract the walk; unreachable coverage is recorded, not raised."""
    energy_params = (energy_params or EnergyParams()).resolved(mesh)
    run = SamplingRun(params.f, repetition, [float(x) for x in params.q0], asdict(params))
    t0 = time.perf_counter()
    builder = GraphBuilder(mesh, params, cameras, energy_params)
    try:
        graph = builder.build()
    except UnreachableCoverageError as exc:
        run.error = str(exc)
        run.observed_fraction = exc.best_fraction
        run.iterations = exc.iterations
        run.timings["graph_build"] = time.perf_counter() - t0
        run.graph_nodes, run.graph_edges = len(builder.graph.nodes), len(builder.graph.edges)
        return run
    t1 = time.perf_counter()
    walk = find_closed_walk(graph, 0, energy_params, weights=mesh.triangle_areas * mesh.eligible)
    t2 = time.perf_counter()
    run.walk = walk
    run.positions = graph.positions[walk.nodes]
    run.graph_nodes, run.graph_edges = len(graph.nodes), len(graph.edges)
    run.observed_fraction = builder.observed_fraction
    run.iterations = builder.iterations
    run.timings = {"graph_build": t1 - t0, "walk_solve": t2 - t1, "total": t2 - t0}
    return run


def f_values(f_min: float, f_max: float, steps: int) -> list[float]:
    if not f_min <= f_max or steps < 1:
        raise InvalidInputError("need f_min <= f_max and steps >= 1")
    if steps == 1:
        return [float(f_max)]
    return [float(x) for x in np.linspace(f_min, f_max, steps)]


def f_sweep(
    mesh: TriangleMesh,
    f_min: float,
    f_max: float,
    steps: int,
    repetitions: int,
    base: SamplingParams | None = None,
    cameras=None,
    energy_params=None,
    seed: int = 0,
) -> list[SamplingRun]:
    """Runs for evenly spaced f values, each repeated from fresh random starts.

    Repetition ``r`` draws its start from ``default_rng(seed + r)`` and uses
    ``rng_seed = seed + r``, so the same start is shared across f values.
    """
    base = base or SamplingParams()
    runs = []
    for rep in range(repetitions):
        q0 = sample_start(mesh, np.random.default_rng(seed + rep), base.buffer)
        for f in f_values(f_min, f_max, steps):
            params = replace(base, f=f, q0=tuple(float(x) for x in q0), rng_seed=seed + rep, epsilon=min(base.epsilon, f / 2))
            runs.append(plan_sampling(mesh, params, cameras, energy_params, repetition=rep))
    runs.sort(key=lambda r: (r.f, r.repetition))
    return runs


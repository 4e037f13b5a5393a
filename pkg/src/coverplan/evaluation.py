"""Two-objective plan evaluation with per-edge caching.

Planners evaluate the same waypoint pairs over and over, so the collision
flag and covered-triangle set of each edge are computed once and reused.
An edge's heading and snapshot samples do not depend on its direction, so
the cache is keyed by the unordered waypoint pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from coverplan.discretize import WaypointGrid
from coverplan.energy import EnergyParams, EnergyResult, polyline_energy
from coverplan.errors import InvalidInputError, InvalidPlanError
from coverplan.geometry import TriangleMesh
from coverplan.sensing import (
    CameraModel,
    CoverageResult,
    coverage_from_mask,
    default_cameras,
    edge_coverage_mask,
    make_edge_pose,
    snapshot_spacing,
)


class Fitness(NamedTuple):
    coverage_score: float
    energy: float


class EdgeRecord(NamedTuple):
    covered: np.ndarray  # triangle ids
    collides: bool


@dataclass
class PlanEvaluation:
    fitness: Fitness
    energy: EnergyResult
    coverage: CoverageResult
    diagnostics: list[str] = field(default_factory=list)


class PlanEvaluator:
    """Scores waypoint-ID plans on one mesh and grid.

    Thread-compatible but not thread-safe: the edge cache is filled lazily.
    """

    def __init__(
        self,
        mesh: TriangleMesh,
        grid: WaypointGrid,
        cameras: Sequence[CameraModel] | None = None,
        energy_params: EnergyParams | None = None,
        spacing: float | None = None,
    ):
        self.mesh = mesh
        self.grid = grid
        self.cameras = default_cameras() if cameras is None else tuple(cameras)
        self.energy_params = (energy_params or EnergyParams()).resolved(mesh)
        self.spacing = snapshot_spacing(grid.wp_interval, self.cameras) if spacing is None else float(spacing)
        self.center = mesh.center
        self._edges: dict[tuple[int, int], EdgeRecord] = {}
        self.diagnostics: list[str] = []

    def edge(self, a: int, b: int) -> EdgeRecord:
        key = (a, b) if a <= b else (b, a)
        rec = self._edges.get(key)
        if rec is None:
            pa, pb = self.grid.positions[key[0]], self.grid.positions[key[1]]
            collides = self.mesh.segment_collides(pa, pb, self.energy_params.safety_buffer)
            if collides:
                covered = np.empty(0, dtype=np.int64)
            else:
                pose = make_edge_pose(pa, pb, self.center, self.diagnostics)
                covered = np.flatnonzero(edge_coverage_mask(self.mesh, pose, self.cameras, self.spacing))
            rec = EdgeRecord(covered, bool(collides))
            self._edges[key] = rec
        return rec

    @property
    def cached_edges(self) -> int:
        return len(self._edges)

    def _check(self, genome) -> list[int]:
        ids = [int(i) for i in genome]
        if ids and (min(ids) < 0 or max(ids) >= len(self.grid)):
            raise InvalidPlanError(f"plan references unknown waypoint ids (grid has {len(self.grid)})")
        return ids

    def covered_mask(self, genome) -> np.ndarray:
        ids = self._check(genome)
        mask = np.zeros(self.mesh.n_triangles, dtype=bool)
        for a, b in zip(ids[:-1], ids[1:]):
            mask[self.edge(a, b).covered] = True
        return mask

    def details(self, genome) -> PlanEvaluation:
        ids = self._check(genome)
        mask = np.zeros(self.mesh.n_triangles, dtype=bool)
        flags = []
        for a, b in zip(ids[:-1], ids[1:]):
            rec = self.edge(a, b)
            mask[rec.covered] = True
            flags.append(rec.collides)
        coverage = coverage_from_mask(self.mesh, mask)
        energy = polyline_energy(self.grid.positions[ids] if ids else np.empty((0, 3)), self.energy_params, flags)
        return PlanEvaluation(Fitness(coverage.coverage_score, energy.energy), energy, coverage)

    def evaluate(self, genome) -> Fitness:
        return self.details(genome).fitness


def evaluate_path(
    mesh: TriangleMesh,
    positions,
    cameras: Sequence[CameraModel] | None = None,
    energy_params: EnergyParams | None = None,
    spacing: float | None = None,
    wp_interval: float | None = None,
) -> PlanEvaluation:
    """Score a plan given directly as 3-D positions (no waypoint grid needed).

    ``spacing`` defaults to the snapshot spacing implied by ``wp_interval``;
    one of the two is required.
    """
    cameras = default_cameras() if cameras is None else tuple(cameras)
    params = (energy_params or EnergyParams()).resolved(mesh)
    if spacing is None:
        if wp_interval is None:
            raise InvalidInputError("need spacing or wp_interval")
        spacing = snapshot_spacing(wp_interval, cameras)
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    center = mesh.center
    diagnostics: list[str] = []
    mask = np.zeros(mesh.n_triangles, dtype=bool)
    flags = []
    for a, b in zip(pts[:-1], pts[1:]):
        hit = mesh.segment_collides(a, b, params.safety_buffer)
        flags.append(hit)
        if not hit:
            mask |= edge_coverage_mask(mesh, make_edge_pose(a, b, center, diagnostics), cameras, spacing)
    coverage = coverage_from_mask(mesh, mask)
    energy = polyline_energy(pts, params, flags)
    return PlanEvaluation(Fitness(coverage.coverage_score, energy.energy), energy, coverage, diagnostics)


def evaluate(genome, mesh: TriangleMesh, grid: WaypointGrid, cameras=None, energy_params=None) -> Fitness:
    """Fitness of one genome; builds a throwaway evaluator (use PlanEvaluator in loops)."""
    return PlanEvaluator(mesh, grid, cameras, energy_params).evaluate(genome)

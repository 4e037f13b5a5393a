"""Two-camera sensor simulation and the coverage score.

A triangle counts as seen from a camera position when its centroid is inside
the camera's pyramidal frustum, within the near/far range, the triangle faces
the camera, and no other triangle blocks the line of sight to the centroid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from coverplan.energy import EnergyParams
from coverplan.errors import InvalidInputError, InvalidPlanError
from coverplan.geometry import TriangleMesh
from coverplan.geometry import bvh as _bvh

MOUNTS = ("forward", "down")
_XY_EPS = 1e-9
_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera fixed to the robot body. Angles are in degrees."""

    mount: str = "forward"
    vertical_fov: float = 46.0
    horizontal_fov: float = 46.0
    near_plane: float = 0.1
    far_plane: float = 10.0
    resolution: int = 1024  # metadata only

    def __post_init__(self):
        if self.mount not in MOUNTS:
            raise InvalidInputError(f"camera mount must be one of {MOUNTS}, got {self.mount!r}")
        if not 0 < self.near_plane < self.far_plane:
            raise InvalidInputError("need 0 < near_plane < far_plane")
        for fov in (self.vertical_fov, self.horizontal_fov):
            if not 0 < fov < 180:
                raise InvalidInputError("field of view must be in (0, 180) degrees")

    def frame(self, heading) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(viewing axis, image up, image right) for a robot facing ``heading``."""
        h = np.asarray(heading, dtype=np.float64)
        if self.mount == "forward":
            axis, up = h, _UP
        else:
            axis, up = -_UP, h
        return axis, up, np.cross(axis, up)


def default_cameras() -> tuple[CameraModel, CameraModel]:
    """Forward- and down-looking cameras, 46 x 46 degrees, 0.1 to 10 m."""
    return CameraModel("forward"), CameraModel("down")


class EdgePose(NamedTuple):
    start: np.ndarray
    end: np.ndarray
    heading: np.ndarray


@dataclass(frozen=True)
class CoverageResult:
    covered_ids: frozenset
    covered_area: float
    coverage_score: float


def edge_heading(start, end, target_center, diagnostics: list | None = None) -> np.ndarray:
    """Horizontal viewing direction used while traversing an edge.

    For edges with horizontal extent this is the x-y perpendicular facing the
    target; for vertical edges it points from the midpoint toward the target.
    When neither is defined (vertical edge on the target's axis) the heading
    falls back to +x and a note is appended to ``diagnostics``.
    """
    a = np.asarray(start, dtype=np.float64)
    b = np.asarray(end, dtype=np.float64)
    c = np.asarray(target_center, dtype=np.float64)
    if tuple(b) < tuple(a):
        a, b = b, a  # direction-independent even when the perpendicular is ambiguous
    mid = 0.5 * (a + b)
    to_target = np.array([c[0] - mid[0], c[1] - mid[1], 0.0])
    dx, dy = b[0] - a[0], b[1] - a[1]
    xy_len = math.hypot(dx, dy)
    if xy_len > _XY_EPS:
        perp = np.array([-dy / xy_len, dx / xy_len, 0.0])
        return perp if perp @ to_target >= 0.0 else -perp
    dist = math.hypot(to_target[0], to_target[1])
    if dist > _XY_EPS:
        return to_target / dist
    if diagnostics is not None:
        diagnostics.append(f"vertical edge at {mid.tolist()} is on the target axis; heading defaulted to +x")
    return np.array([1.0, 0.0, 0.0])


def make_edge_pose(start, end, target_center, diagnostics: list | None = None) -> EdgePose:
    a = np.asarray(start, dtype=np.float64)
    b = np.asarray(end, dtype=np.float64)
    return EdgePose(a, b, edge_heading(a, b, target_center, diagnostics))


def snapshot_spacing(wp_interval: float, cameras: Sequence[CameraModel]) -> float:
    far = max(cam.far_plane for cam in cameras)
    return min(wp_interval, far) / 2.0


def edge_samples(start, end, spacing: float) -> np.ndarray:
    """Both endpoints plus evenly spaced interior points no more than ``spacing`` apart.

    Endpoints are put in lexicographic order first, so an edge and its
    reverse produce bit-identical sample points.
    """
    a = np.asarray(start, dtype=np.float64)
    b = np.asarray(end, dtype=np.float64)
    if tuple(b) < tuple(a):
        a, b = b, a
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        return a[None, :].copy()
    if spacing <= 0:
        raise InvalidInputError("snapshot spacing must be positive")
    n = max(1, math.ceil(length / spacing - 1e-12))
    t = np.arange(n + 1) / n
    pts = a + t[:, None] * (b - a)
    pts[-1] = b
    return pts


def _camera_arrays(cameras: Sequence[CameraModel], heading):
    axes, ups, rights = zip(*(cam.frame(heading) for cam in cameras))
    tan_h = np.array([math.tan(math.radians(cam.horizontal_fov) / 2.0) for cam in cameras])
    tan_v = np.array([math.tan(math.radians(cam.vertical_fov) / 2.0) for cam in cameras])
    near = np.array([cam.near_plane for cam in cameras])
    far = np.array([cam.far_plane for cam in cameras])
    return np.array(axes), np.array(ups), np.array(rights), tan_h, tan_v, near, far


def visible_mask(mesh: TriangleMesh, points, heading, cameras: Sequence[CameraModel]) -> np.ndarray:
    """Boolean mask over triangles seen by any camera from any of ``points``."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    if len(cameras) == 0 or len(pts) == 0:
        return np.zeros(mesh.n_triangles, dtype=bool)
    return _bvh.visible_from_points(
        pts,
        *_camera_arrays(cameras, heading),
        mesh.centroids,
        mesh.normals,
        mesh.eligible,
        mesh._v0,
        mesh._e1,
        mesh._e2,
        *mesh.spatial_index.arrays(),
    )


def snapshot_visible(mesh: TriangleMesh, position, heading, cameras: Sequence[CameraModel]) -> frozenset:
    return frozenset(np.flatnonzero(visible_mask(mesh, [position], heading, cameras)).tolist())


def edge_coverage_mask(mesh: TriangleMesh, edge: EdgePose, cameras: Sequence[CameraModel], spacing: float) -> np.ndarray:
    return visible_mask(mesh, edge_samples(edge.start, edge.end, spacing), edge.heading, cameras)


def edge_coverage(mesh: TriangleMesh, edge: EdgePose, cameras: Sequence[CameraModel], spacing: float) -> frozenset:
    """Triangles seen from any snapshot along the edge."""
    return frozenset(np.flatnonzero(edge_coverage_mask(mesh, edge, cameras, spacing)).tolist())


def coverage_from_mask(mesh: TriangleMesh, mask: np.ndarray) -> CoverageResult:
    """Coverage score of a covered-triangle mask: 1 - covered area / total area."""
    ids = np.flatnonzero(mask & mesh.eligible)
    area = float(mesh.triangle_areas[ids].sum())
    score = 1.0 - area / mesh.total_area
    return CoverageResult(frozenset(ids.tolist()), area, min(1.0, max(0.0, score)))


def plan_coverage(
    mesh: TriangleMesh,
    plan,
    grid,
    cameras: Sequence[CameraModel] | None = None,
    energy_params=None,
    spacing: float | None = None,
) -> CoverageResult:
    """Coverage of a waypoint-ID plan; observations from colliding edges are dropped."""
    cameras = default_cameras() if cameras is None else tuple(cameras)
    params = energy_params or EnergyParams()
    ids = np.asarray(list(plan), dtype=np.int64)
    if not grid.contains(ids):
        raise InvalidPlanError(f"plan references unknown waypoint ids (grid has {len(grid)})")
    spacing = snapshot_spacing(grid.wp_interval, cameras) if spacing is None else spacing
    covered = np.zeros(mesh.n_triangles, dtype=bool)
    center = mesh.center
    for a, b in zip(ids[:-1], ids[1:]):
        pa, pb = grid.positions[a], grid.positions[b]
        if mesh.segment_collides(pa, pb, params.safety_buffer):
            continue
        covered |= edge_coverage_mask(mesh, make_edge_pose(pa, pb, center), cameras, spacing)
    return coverage_from_mask(mesh, covered)

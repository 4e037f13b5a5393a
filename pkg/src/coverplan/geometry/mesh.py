"""Immutable triangle mesh with per-triangle areas and a BVH for queries."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from coverplan.errors import InvalidInputError
from coverplan.geometry import bvh as _bvh

DEGENERATE_AREA = 1e-12


class RayHit(NamedTuple):
    triangle_id: int
    distance: float
    point: np.ndarray


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Triangle soup with cached geometry.

    Build instances with :meth:`from_arrays`; every array is read-only so a
    mesh can be shared freely between threads and planners.

    Degenerate triangles (area below ``DEGENERATE_AREA``) keep their ids and
    stay in the spatial index, but are excluded from ``total_area`` and from
    coverage accounting (``eligible`` is False for them).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    triangle_areas: np.ndarray
    total_area: float
    bbox: np.ndarray  # (2, 3): min corner, max corner
    normals: np.ndarray
    centroids: np.ndarray
    eligible: np.ndarray
    spatial_index: _bvh.BVH = field(repr=False)
    _v0: np.ndarray = field(repr=False)
    _v1: np.ndarray = field(repr=False)
    _v2: np.ndarray = field(repr=False)
    _e1: np.ndarray = field(repr=False)
    _e2: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, vertices, triangles) -> "TriangleMesh":
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(triangles) == 0:
            raise InvalidInputError("mesh has no triangles")
        if not np.all(np.isfinite(vertices)):
            raise InvalidInputError("mesh vertices must be finite")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise InvalidInputError(
                f"triangle index out of range [0, {len(vertices)}): "
                f"min {triangles.min()}, max {triangles.max()}"
            )
        v0 = vertices[triangles[:, 0]]
        v1 = vertices[triangles[:, 1]]
        v2 = vertices[triangles[:, 2]]
        e1 = v1 - v0
        e2 = v2 - v0
        cross = np.cross(e1, e2)
        norm = np.linalg.norm(cross, axis=1)
        areas = 0.5 * norm
        eligible = areas >= DEGENERATE_AREA
        normals = np.zeros_like(cross)
        normals[eligible] = cross[eligible] / norm[eligible, None]
        bbox = np.stack([vertices.min(axis=0), vertices.max(axis=0)])
        index = _bvh.build_bvh(v0, v1, v2)
        return cls(
            vertices=_frozen(vertices),
            triangles=_frozen(triangles),
            triangle_areas=_frozen(areas),
            total_area=float(areas[eligible].sum()),
            bbox=_frozen(bbox),
            normals=_frozen(normals),
            centroids=_frozen((v0 + v1 + v2) / 3.0),
            eligible=_frozen(eligible),
            spatial_index=index,
            _v0=_frozen(v0),
            _v1=_frozen(v1),
            _v2=_frozen(v2),
            _e1=_frozen(e1),
            _e2=_frozen(e2),
        )

    # -- simple properties -------------------------------------------------

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def extent(self) -> np.ndarray:
        return self.bbox[1] - self.bbox[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.bbox[0] + self.bbox[1])

    @property
    def coverable_ids(self) -> np.ndarray:
        return np.flatnonzero(self.eligible)

    def fingerprint(self) -> str:
        """Content hash identifying the geometry (used to refuse mixed-mesh comparisons)."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.triangles).tobytes())
        return h.hexdigest()[:16]

    # -- queries -----------------------------------------------------------

    def ray_intersect(self, origin, direction, max_distance: float = np.inf) -> RayHit | None:
        return ray_intersect(self, origin, direction, max_distance)

    def segment_min_distance(self, a, b) -> float:
        return segment_min_distance(self, a, b)

    def point_distances(self, points) -> np.ndarray:
        """Distance from each point to the closest triangle."""
        pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        if len(pts) == 0:
            return np.empty(0)
        return _bvh.points_distance(pts, self._v0, self._v1, self._v2, *self.spatial_index.arrays())

    def segment_collides(self, a, b, clearance: float) -> bool:
        """True when segment ab passes strictly closer than ``clearance`` to the mesh."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        return bool(
            _bvh.segment_closer_than(
                a, b, float(clearance), self._v0, self._v1, self._v2, self._e1, self._e2,
                *self.spatial_index.arrays(),
            )
        )


def ray_intersect(mesh: TriangleMesh, origin, direction, max_distance: float = np.inf) -> RayHit | None:
    """Nearest triangle hit by the ray, or None.

    ``direction`` must be a unit vector; distances are then in meters.
    Among hits at exactly the same distance the lowest triangle id wins.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise InvalidInputError("ray direction must be normalized")
    tmax = float(max_distance) if np.isfinite(max_distance) else 1e300
    tri, t = _bvh.ray_nearest(o, d, tmax, mesh._v0, mesh._e1, mesh._e2, *mesh.spatial_index.arrays())
    if tri < 0:
        return None
    return RayHit(int(tri), float(t), o + t * d)


def segment_min_distance(mesh: TriangleMesh, a, b) -> float:
    """Exact minimum Euclidean distance between segment ab and any triangle."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(
        _bvh.segment_distance(
            a, b, mesh._v0, mesh._v1, mesh._v2, mesh._e1, mesh._e2, *mesh.spatial_index.arrays()
        )
    )

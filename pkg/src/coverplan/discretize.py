"""Candidate waypoint lattice around an inspection target."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from coverplan.errors import InvalidInputError
from coverplan.geometry import TriangleMesh

DEFAULT_PAD = 4.0
DEFAULT_BUFFER = 2.0
DEFAULT_VOLUME_SCALING = 1000.0
_BOUNDARY_EPS = 1e-9


class Waypoint(NamedTuple):
    id: int
    position: tuple[float, float, float]
    grid_coords: tuple[int, int, int]


def padded_box(mesh: TriangleMesh, pad: float) -> np.ndarray:
    """Bounding box grown by ``pad`` in x and y on both sides and in z above only."""
    lo = mesh.bbox[0] - np.array([pad, pad, 0.0])
    hi = mesh.bbox[1] + np.array([pad, pad, pad])
    return np.stack([lo, hi])


def compute_wp_interval(mesh: TriangleMesh, pad: float = DEFAULT_PAD, volume_scaling: float = DEFAULT_VOLUME_SCALING) -> float:
    """Waypoint spacing: cube root of padded box volume over ``volume_scaling``."""
    if volume_scaling <= 0:
        raise InvalidInputError("volume_scaling must be positive")
    box = padded_box(mesh, pad)
    volume = float(np.prod(box[1] - box[0]))
    if volume <= 0.0:
        raise InvalidInputError("padded bounding box has zero volume")
    return float(np.cbrt(volume / volume_scaling))


@dataclass(frozen=True, eq=False)
class WaypointGrid:
    """Regular lattice of candidate waypoints.

    Waypoint ``i`` sits at ``positions[i] == grid_origin + grid_coords[i] * wp_interval``.
    ``clearance[i]`` is its distance to the mesh.
    """

    positions: np.ndarray
    grid_coords: np.ndarray
    clearance: np.ndarray
    wp_interval: float
    pad: float
    buffer: float
    volume_scaling: float
    grid_origin: np.ndarray
    shape: tuple[int, int, int]

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self.positions))

    @property
    def z_levels(self) -> np.ndarray:
        return np.unique(self.positions[:, 2])

    @property
    def waypoints(self) -> list[Waypoint]:
        return [self.waypoint(i) for i in range(len(self))]

    def waypoint(self, wp_id: int) -> Waypoint:
        p = self.positions[wp_id]
        g = self.grid_coords[wp_id]
        return Waypoint(int(wp_id), (float(p[0]), float(p[1]), float(p[2])), (int(g[0]), int(g[1]), int(g[2])))

    def contains(self, ids) -> bool:
        ids = np.asarray(ids)
        return bool(ids.size == 0 or (ids.min() >= 0 and ids.max() < len(self)))

    def id_lookup(self) -> dict[tuple[int, int, int], int]:
        return {tuple(int(x) for x in g): i for i, g in enumerate(self.grid_coords)}

    def params(self) -> dict:
        return {
            "pad": self.pad,
            "buffer": self.buffer,
            "volume_scaling": self.volume_scaling,
            "wp_interval": self.wp_interval,
            "n_waypoints": len(self),
        }

    def to_json(self) -> str:
        return json.dumps(
            {
                "wp_interval": self.wp_interval,
                "pad": self.pad,
                "buffer": self.buffer,
                "volume_scaling": self.volume_scaling,
                "grid_origin": self.grid_origin.tolist(),
                "shape": list(self.shape),
                "waypoints": [
                    {"id": w.id, "position": list(w.position), "grid_coords": list(w.grid_coords)}
                    for w in self.waypoints
                ],
            },
            indent=1,
        )


def generate_candidate_waypoints(
    mesh: TriangleMesh,
    pad: float = DEFAULT_PAD,
    buffer: float = DEFAULT_BUFFER,
    volume_scaling: float = DEFAULT_VOLUME_SCALING,
) -> WaypointGrid:
    """Lattice of waypoints filling the padded box, minus those within ``buffer`` of the mesh.

    The lattice starts at the padded box's minimum corner, so no waypoint is
    ever below the structure. IDs follow (k, j, i) scan order: z slowest, x
    fastest.
    """
    if not pad >= buffer >= 0:
        raise InvalidInputError(f"need pad >= buffer >= 0, got pad={pad}, buffer={buffer}")
    step = compute_wp_interval(mesh, pad, volume_scaling)
    box = padded_box(mesh, pad)
    origin = box[0]
    counts = np.floor((box[1] - box[0]) / step + _BOUNDARY_EPS).astype(int) + 1
    k, j, i = np.meshgrid(np.arange(counts[2]), np.arange(counts[1]), np.arange(counts[0]), indexing="ij")
    coords = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)
    positions = origin + coords * step
    clearance = mesh.point_distances(positions)
    keep = (clearance >= buffer) & (positions[:, 2] >= mesh.bbox[0, 2])
    if not keep.any():
        raise InvalidInputError("waypoint grid is empty after applying the buffer")
    return WaypointGrid(
        positions=positions[keep],
        grid_coords=coords[keep],
        clearance=clearance[keep],
        wp_interval=step,
        pad=float(pad),
        buffer=float(buffer),
        volume_scaling=float(volume_scaling),
        grid_origin=origin,
        shape=(int(counts[0]), int(counts[1]), int(counts[2])),
    )

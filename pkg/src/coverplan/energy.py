"""Plan energy: weighted translation plus turning cost, with a collision penalty."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from coverplan.errors import InvalidInputError, InvalidPlanError
from coverplan.geometry import TriangleMesh

DEFAULT_W_TRANS = 0.1
DEFAULT_W_ROT = 1.0
DEFAULT_SAFETY_BUFFER = 1.5


@dataclass(frozen=True)
class EnergyParams:
    """Weights of the energy model.

    ``collision_penalty`` of None means "use :func:`default_collision_penalty`
    of the target"; call :meth:`resolved` to fill it in.
    """

    w_trans: float = DEFAULT_W_TRANS
    w_rot: float = DEFAULT_W_ROT
    safety_buffer: float = DEFAULT_SAFETY_BUFFER
    collision_penalty: float | None = None

    def __post_init__(self):
        for name in ("w_trans", "w_rot", "safety_buffer"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")
        if self.collision_penalty is not None and self.collision_penalty < 0:
            raise InvalidInputError("collision_penalty must be >= 0")

    def resolved(self, mesh: TriangleMesh) -> "EnergyParams":
        if self.collision_penalty is not None:
            return self
        return replace(self, collision_penalty=default_collision_penalty(mesh))


@dataclass
class EnergyResult:
    energy: float
    per_edge: list[tuple[float, float, float]] = field(default_factory=list)
    colliding_edges: list[int] = field(default_factory=list)


def default_collision_penalty(mesh: TriangleMesh) -> float:
    """Twice the longest side of the target's bounding box."""
    return 2.0 * float(np.max(mesh.extent))


def turn_costs(points: np.ndarray, w_rot: float) -> np.ndarray:
    """Rotation term per edge; the first edge, and any edge touching a zero-length one, costs 0."""
    d = np.diff(points, axis=0)
    n = len(d)
    out = np.zeros(n)
    if n < 2:
        return out
    lens = np.linalg.norm(d, axis=1)
    prev, cur = d[:-1], d[1:]
    ok = (lens[:-1] > 0) & (lens[1:] > 0)
    cos = np.ones(n - 1)
    cos[ok] = np.einsum("ij,ij->i", prev[ok], cur[ok]) / (lens[:-1][ok] * lens[1:][ok])
    out[1:] = w_rot * (1.0 - np.clip(cos, -1.0, 1.0))
    return out


def polyline_energy(points, params: EnergyParams, collides: Sequence[bool] | None = None) -> EnergyResult:
    """Energy of visiting ``points`` in order.

    ``collides[e]`` flags edge ``e`` for the collision penalty; when omitted
    no edge is penalized.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 2:
        return EnergyResult(0.0)
    trans = params.w_trans * np.linalg.norm(np.diff(pts, axis=0), axis=1)
    rot = turn_costs(pts, params.w_rot)
    penalty_value = params.collision_penalty or 0.0
    flags = np.zeros(len(trans), dtype=bool) if collides is None else np.asarray(collides, dtype=bool)
    pen = np.where(flags, penalty_value, 0.0)
    per_edge = list(zip(trans.tolist(), rot.tolist(), pen.tolist()))
    # summed edge by edge so the total equals the sum of the listed components
    total = 0.0
    for t, r, p in per_edge:
        total += t + r + p
    return EnergyResult(total, per_edge, np.flatnonzero(flags).tolist())


def edge_collisions(mesh: TriangleMesh, points, safety_buffer: float) -> list[bool]:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return [mesh.segment_collides(pts[i], pts[i + 1], safety_buffer) for i in range(len(pts) - 1)]


def plan_energy(plan, grid, mesh: TriangleMesh, params: EnergyParams | None = None) -> EnergyResult:
    """Energy of a waypoint-ID plan on ``grid``, with collision penalties from ``mesh``."""
    params = (params or EnergyParams()).resolved(mesh)
    ids = np.asarray(list(plan), dtype=np.int64)
    if not grid.contains(ids):
        raise InvalidPlanError(f"plan references unknown waypoint ids (grid has {len(grid)})")
    if len(ids) < 2:
        return EnergyResult(0.0)
    pts = grid.positions[ids]
    return polyline_energy(pts, params, edge_collisions(mesh, pts, params.safety_buffer))

"""Procedurally generated inspection targets.

All targets use z-up and meters. Box-like targets stand on the z = 0 floor;
the sphere is centered at the origin.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from coverplan.errors import InvalidInputError
from coverplan.geometry.mesh import TriangleMesh

OCCLUDED_STYLES = ("nested-box", "channel-block", "cube")


class OccludedTarget(NamedTuple):
    mesh: TriangleMesh
    hidden_area_fraction: float
    hidden_ids: np.ndarray


def _orient_outward(vertices: np.ndarray, triangles: np.ndarray, center) -> np.ndarray:
    """Flip triangles whose normal points toward ``center`` (star-shaped solids only)."""
    v0, v1, v2 = (vertices[triangles[:, k]] for k in range(3))
    n = np.cross(v1 - v0, v2 - v0)
    c = (v0 + v1 + v2) / 3.0 - np.asarray(center)
    flip = np.einsum("ij,ij->i", n, c) < 0
    out = triangles.copy()
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def _sphere_layout(budget: int) -> tuple[int, int] | None:
    """(slices, stacks) of the UV sphere closest to ``budget`` triangles; None for a tetrahedron."""
    best = (abs(4 - budget), 0, None)
    for stacks in range(2, max(3, budget)):
        slices_f = budget / (2.0 * (stacks - 1))
        for slices in {max(3, int(math.floor(slices_f))), max(3, int(math.ceil(slices_f)))}:
            count = 2 * slices * (stacks - 1)
            key = (abs(count - budget), abs(slices - 2 * stacks), (slices, stacks))
            if key[:2] < best[:2]:
                best = key
        if 2 * 3 * (stacks - 1) > budget + best[0]:
            break
    return best[2]


def generate_sphere(radius: float, triangle_budget: int) -> TriangleMesh:
    """Closed UV sphere (or tetrahedron for tiny budgets) centered at the origin.

    The slice/stack counts are chosen so the triangle count is as close as
    possible to ``triangle_budget``; 960 gives 32 slices x 16 stacks exactly.
    """
    if radius <= 0:
        raise InvalidInputError("radius must be positive")
    if triangle_budget < 4:
        raise InvalidInputError("triangle_budget must be at least 4")
    layout = _sphere_layout(int(triangle_budget))
    if layout is None:
        s = radius / math.sqrt(3.0)
        verts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64) * s
        tris = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
        return TriangleMesh.from_arrays(verts, _orient_outward(verts, tris, (0, 0, 0)))

    slices, stacks = layout
    verts = [[0.0, 0.0, radius]]
    for i in range(1, stacks):
        theta = math.pi * i / stacks
        z = radius * math.cos(theta)
        rr = radius * math.sin(theta)
        for j in range(slices):
            phi = 2.0 * math.pi * j / slices
            verts.append([rr * math.cos(phi), rr * math.sin(phi), z])
    verts.append([0.0, 0.0, -radius])
    verts = np.array(verts)
    # snap the exact axis extremes so the bounding box is symmetric
    verts[np.abs(verts) < 1e-12 * radius] = 0.0
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * slices + (j % slices)

    tris = []
    for j in range(slices):
        tris.append([0, ring(1, j), ring(1, j + 1)])
    for i in range(1, stacks - 1):
        for j in range(slices):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    for j in range(slices):
        tris.append([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)])
    tris = np.array(tris, dtype=np.int64)
    return TriangleMesh.from_arrays(verts, _orient_outward(verts, tris, (0, 0, 0)))


def _box_faces(lo, hi, cell: float, inward: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Closed axis-aligned box surface split into roughly ``cell``-sized quads."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    axes = [np.linspace(lo[k], hi[k], max(1, int(math.ceil((hi[k] - lo[k]) / cell - 1e-9))) + 1) for k in range(3)]
    key_to_id: dict[tuple[int, int, int], int] = {}
    verts: list[list[float]] = []
    tris: list[list[int]] = []

    def vid(ijk):
        if ijk not in key_to_id:
            key_to_id[ijk] = len(verts)
            verts.append([axes[0][ijk[0]], axes[1][ijk[1]], axes[2][ijk[2]]])
        return key_to_id[ijk]

    n = [len(a) - 1 for a in axes]
    for axis in range(3):
        u_ax, v_ax = [k for k in range(3) if k != axis]
        for side, fixed in ((-1, 0), (1, n[axis])):
            for iu in range(n[u_ax]):
                for iv in range(n[v_ax]):
                    corners = []
                    for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        ijk = [0, 0, 0]
                        ijk[axis] = fixed
                        ijk[u_ax] = iu + du
                        ijk[v_ax] = iv + dv
                        corners.append(vid(tuple(ijk)))
                    a, b, c, d = corners
                    quad = [[a, b, c], [a, c, d]]
                    # (u, v, axis) is right-handed when axis follows u, v cyclically
                    right_handed = (u_ax + 1) % 3 == v_ax
                    outward = side > 0
                    if right_handed != outward:
                        quad = [[a, c, b], [a, d, c]]
                    if inward:
                        quad = [[t[0], t[2], t[1]] for t in quad]
                    tris.extend(quad)
    return np.array(verts), np.array(tris, dtype=np.int64)


def generate_box(lo, hi, cell: float = 1.0) -> TriangleMesh:
    verts, tris = _box_faces(lo, hi, cell)
    return TriangleMesh.from_arrays(verts, tris)


def voxel_surface(occupied: np.ndarray, cell: float = 1.0, origin=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boundary faces of a voxel solid.

    Every face between an occupied cell and an empty one (or the outside)
    becomes two triangles whose normal points into the empty side.

    Returns:
        vertices, triangles, and for each triangle the empty cell it faces as
        an (n, 3) integer array (-1 components mark the outside).
    """
    occ = np.asarray(occupied, dtype=bool)
    shape = occ.shape
    origin = np.asarray(origin, dtype=np.float64)
    key_to_id: dict[tuple[int, int, int], int] = {}
    verts: list = []
    tris: list = []
    faces_cell: list = []

    def vid(p):
        if p not in key_to_id:
            key_to_id[p] = len(verts)
            verts.append(origin + cell * np.array(p, dtype=np.float64))
        return key_to_id[p]

    for i, j, k in zip(*np.nonzero(occ)):
        for axis in range(3):
            for step in (-1, 1):
                nb = [i, j, k]
                nb[axis] += step
                inside = 0 <= nb[axis] < shape[axis]
                if inside and occ[tuple(nb)]:
                    continue
                u_ax, v_ax = [a for a in range(3) if a != axis]
                base = [i, j, k]
                if step > 0:
                    base[axis] += 1
                corners = []
                for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    p = list(base)
                    p[u_ax] += du
                    p[v_ax] += dv
                    corners.append(vid(tuple(int(x) for x in p)))
                a, b, c, d = corners
                quad = [[a, b, c], [a, c, d]]
                right_handed = (u_ax + 1) % 3 == v_ax
                if right_handed != (step > 0):
                    quad = [[a, c, b], [a, d, c]]
                tris.extend(quad)
                face = tuple(int(x) for x in nb) if inside else (-1, -1, -1)
                faces_cell.extend([face, face])
    return np.array(verts), np.array(tris, dtype=np.int64), np.array(faces_cell, dtype=np.int64)


def _nested_box() -> OccludedTarget:
    ov, ot = _box_faces((-5.0, -5.0, 0.0), (5.0, 5.0, 6.0), cell=2.0)
    iv, it = _box_faces((-2.0, -2.0, 1.0), (2.0, 2.0, 4.0), cell=1.0)
    verts = np.vstack([ov, iv])
    tris = np.vstack([ot, it + len(ov)])
    mesh = TriangleMesh.from_arrays(verts, tris)
    hidden = np.arange(len(ot), len(tris))
    frac = float(mesh.triangle_areas[hidden].sum() / mesh.total_area)
    return OccludedTarget(mesh, frac, hidden)


def _channel_block() -> OccludedTarget:
    # 10 x 6 x 5 m block; an open groove across the top and a sealed 2 m cavity
    occ = np.ones((10, 6, 5), dtype=bool)
    occ[5:7, :, 3:5] = False
    cavity = np.zeros_like(occ)
    cavity[1:3, 2:4, 1:3] = True
    occ[cavity] = False
    verts, tris, faces_cell = voxel_surface(occ, cell=1.0, origin=(-5.0, -3.0, 0.0))
    mesh = TriangleMesh.from_arrays(verts, tris)
    inside = faces_cell[:, 0] >= 0
    hidden_mask = np.zeros(len(tris), dtype=bool)
    hidden_mask[inside] = cavity[tuple(faces_cell[inside].T)]
    hidden = np.flatnonzero(hidden_mask)
    frac = float(mesh.triangle_areas[hidden].sum() / mesh.total_area)
    return OccludedTarget(mesh, frac, hidden)


def _cube() -> OccludedTarget:
    mesh = generate_box((-3.0, -3.0, 0.0), (3.0, 3.0, 6.0), cell=1.0)
    return OccludedTarget(mesh, 0.0, np.empty(0, dtype=np.int64))


def generate_occluded_target(style: str = "nested-box") -> OccludedTarget:
    """Desk-scale target whose hidden (fully enclosed) area is known exactly.

    * ``nested-box``: a 4 x 4 x 3 m box sealed inside a 10 x 10 x 6 m box.
    * ``channel-block``: a 10 x 6 x 5 m block with an open groove across its
      top and a sealed 2 x 2 x 2 m internal cavity.
    * ``cube``: a plain 6 m cube (nothing hidden).

    The hidden fraction counts only enclosed faces; faces that merely cannot
    be reached from above the floor (the underside) are not included.
    """
    if style == "nested-box":
        return _nested_box()
    if style == "channel-block":
        return _channel_block()
    if style == "cube":
        return _cube()
    raise InvalidInputError(f"unknown target style {style!r}; expected one of {OCCLUDED_STYLES}")

"""Circling sweeps: one boundary loop per z-level, stacked every dz levels.

Each level's loop is the Moore-neighbor trace of the waypoints hugging the
structure at that height, with collinear waypoints pruned away. Sweeps for
every level spacing dz are then composed from these loops. There is no
randomness anywhere in this planner.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from coverplan.discretize import WaypointGrid
from coverplan.energy import DEFAULT_SAFETY_BUFFER
from coverplan.errors import InvalidInputError, InvalidPlanError
from coverplan.geometry import TriangleMesh

# clockwise Moore neighborhood in (row, col) offsets, starting west
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_LATTICE_STEPS = [s for s in itertools.product((-1, 0, 1), repeat=3) if s != (0, 0, 0)]


@dataclass(frozen=True)
class LevelLoop:
    z_level: float
    waypoint_ids: tuple[int, ...]


@dataclass(frozen=True)
class CirclingPlan:
    delta_z: int
    waypoint_ids: tuple[int, ...]
    loop_levels: tuple[float, ...]


@dataclass
class CirclingResult:
    loops: list[LevelLoop]
    plans: list[CirclingPlan]
    diagnostics: list[str] = field(default_factory=list)


def moore_trace(occupancy) -> list[tuple[int, int]]:
    """Ordered outer boundary of the largest 8-connected component.

    Tracing starts at the first occupied cell in row-major order, entered
    from its west side, and stops by Jacob's criterion generalized to any
    cell: as soon as some cell is entered a second time from the same
    direction. (Checking only the start cell loops forever on one-cell-wide
    shapes, where the start is never re-entered from the west.) Ties between
    equally large components go to the one found first in row-major order.
    """
    occ = np.asarray(occupancy, dtype=bool)
    if occ.ndim != 2 or not occ.any():
        raise InvalidInputError("occupancy must be a non-empty 2-D boolean grid")
    labels, n = ndimage.label(occ, structure=np.ones((3, 3), dtype=int))
    if n > 1:
        sizes = np.bincount(labels.ravel())[1:]
        occ = labels == (int(np.argmax(sizes)) + 1)
    rows, cols = occ.shape

    def filled(r, c):
        return 0 <= r < rows and 0 <= c < cols and occ[r, c]

    flat = int(np.flatnonzero(occ.ravel())[0])
    start = (flat // cols, flat % cols)
    # a state is (cell, direction of the empty cell we backtrack to)
    state = (start, 0)
    seen: dict[tuple, int] = {}
    states = []
    while state not in seen:
        seen[state] = len(states)
        states.append(state)
        cur, back = state
        for step in range(1, 9):
            d = (back + step) % 8
            r, c = cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1]
            if filled(r, c):
                prev = (back + step - 1) % 8
                pr, pc = cur[0] + _MOORE[prev][0], cur[1] + _MOORE[prev][1]
                state = ((r, c), _MOORE.index((pr - r, pc - c)))
                break
        else:
            return [start]  # isolated cell
    cycle = [cell for cell, _ in states[seen[state]:]]
    first = cycle.index(start)
    return cycle[first:] + cycle[:first]


def _collinear_between(p, q, r, tol: float) -> bool:
    u, v = q - p, r - q
    if np.linalg.norm(np.cross(u, v)) > tol * max(1.0, np.linalg.norm(u) * np.linalg.norm(v)):
        return False
    return float(u @ v) > 0.0 or np.allclose(u, 0) or np.allclose(v, 0)


def prune_edge(loop, positions, tol: float = 1e-9) -> list:
    """Drop every loop entry lying on the straight segment between its neighbors.

    ``loop`` is a closed sequence (closure implicit) of keys into
    ``positions``. The traced geometric path is unchanged.
    """
    pos = np.asarray(positions, dtype=np.float64)
    out = list(loop)
    changed = True
    while changed and len(out) > 2:
        changed = False
        i = 0
        while i < len(out) and len(out) > 2:
            p, q, r = pos[out[i - 1]], pos[out[i]], pos[out[(i + 1) % len(out)]]
            if _collinear_between(p, q, r, tol):
                del out[i]
                changed = True
            else:
                i += 1
    return out


def neighbor_distance(grid: WaypointGrid) -> float:
    return grid.buffer + grid.wp_interval


def circle_each_level(mesh: TriangleMesh, grid: WaypointGrid, diagnostics: list | None = None) -> list[LevelLoop]:
    """One pruned boundary loop per z-level that has waypoints next to the structure."""
    if len(grid) == 0:
        raise InvalidInputError("waypoint grid is empty")
    diagnostics = diagnostics if diagnostics is not None else []
    near = grid.clearance <= neighbor_distance(grid) + 1e-9
    loops = []
    nx, ny = grid.shape[0], grid.shape[1]
    for k in np.unique(grid.grid_coords[:, 2]):
        sel = np.flatnonzero(near & (grid.grid_coords[:, 2] == k))
        z = float(grid.grid_origin[2] + k * grid.wp_interval)
        if len(sel) < 3:
            if len(sel):
                diagnostics.append(f"level z={z:.3f}: only {len(sel)} neighbor waypoints, skipped")
            continue
        occ = np.zeros((nx, ny), dtype=bool)
        cell_to_id = {}
        for wp in sel:
            i, j = int(grid.grid_coords[wp, 0]), int(grid.grid_coords[wp, 1])
            occ[i, j] = True
            cell_to_id[(i, j)] = int(wp)
        ring = [cell_to_id[c] for c in moore_trace(occ)]
        if len(ring) < 3:
            diagnostics.append(f"level z={z:.3f}: boundary of {len(ring)} cells, skipped")
            continue
        loops.append(LevelLoop(z, tuple(prune_edge(ring, grid.positions))))
    return loops


def choose_offset(n_levels: int, delta_z: int, level_z, center_z: float) -> int:
    """Offset whose every-``delta_z``-th loop selection is best centered on ``center_z``."""
    z = np.asarray(level_z, dtype=np.float64)
    best = None
    for off in range(min(delta_z, n_levels)):
        gap = abs(float(z[off::delta_z].mean()) - center_z)
        if best is None or gap < best[0] - 1e-12:
            best = (gap, off)
    return best[1]


class _LatticeRouter:
    """Shortest collision-free paths over the 26-connected waypoint lattice."""

    def __init__(self, mesh: TriangleMesh, grid: WaypointGrid, safety_buffer: float):
        self.mesh, self.grid, self.buffer = mesh, grid, safety_buffer
        self.lookup = grid.id_lookup()
        self._ok: dict[tuple[int, int], bool] = {}

    def clear(self, a: int, b: int) -> bool:
        key = (a, b) if a <= b else (b, a)
        if key not in self._ok:
            pa, pb = self.grid.positions[key[0]], self.grid.positions[key[1]]
            self._ok[key] = not self.mesh.segment_collides(pa, pb, self.buffer)
        return self._ok[key]

    def path(self, src: int, targets: set[int]) -> list[int] | None:
        pos = self.grid.positions
        dist = {src: 0.0}
        prev: dict[int, int] = {}
        heap = [(0.0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            if u in targets:
                out = [u]
                while out[-1] != src:
                    out.append(prev[out[-1]])
                return out[::-1]
            g = self.grid.grid_coords[u]
            for s in _LATTICE_STEPS:
                v = self.lookup.get((int(g[0]) + s[0], int(g[1]) + s[1], int(g[2]) + s[2]))
                if v is None or not self.clear(u, v):
                    continue
                nd = d + float(np.linalg.norm(pos[v] - pos[u]))
                if nd < dist.get(v, np.inf) - 1e-12:
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
        return None


def _loop_from(loop: tuple[int, ...], entry: int) -> list[int]:
    s = loop.index(entry)
    return list(loop[s:]) + list(loop[: s + 1])


def _connect(router: _LatticeRouter, walk: list[int], loop: tuple[int, ...], nxt: tuple[int, ...]) -> tuple[list[int], int]:
    """Leave the finished loop for the next one; returns (extra waypoints along the loop, entry of next loop).

    The preferred exit is the current position. If no straight hop from it is
    collision-free, the walk continues around the loop to the closest
    collision-free pair, and as a last resort routes over the lattice.
    """
    pos = router.grid.positions
    here = walk[-1]
    ordered = _loop_from(loop, here)[:-1]
    pairs = []
    for steps, x in enumerate(ordered):
        for y in nxt:
            pairs.append((float(np.linalg.norm(pos[y] - pos[x])), steps, x, y))
    pairs.sort()
    for _, steps, x, y in pairs:
        if steps == 0 and router.clear(x, y):
            return [], y
    for _, steps, x, y in pairs:
        if router.clear(x, y):
            return ordered[1 : steps + 1], y
    route = router.path(here, set(nxt))
    if route is None:
        raise InvalidPlanError("no collision-free connection between consecutive loops")
    return route[1:-1], route[-1]


def compose_circling_plans(
    loops: list[LevelLoop],
    mesh: TriangleMesh,
    grid: WaypointGrid,
    safety_buffer: float = DEFAULT_SAFETY_BUFFER,
) -> list[CirclingPlan]:
    """One plan per dz in 1..len(loops), loops stacked bottom to top.

    Each selected loop is flown once around, from its entry waypoint back to
    it, before hopping to the nearest waypoint of the next loop. Any loop edge
    that would pass closer than ``safety_buffer`` is replaced by a lattice
    detour, so every returned plan is collision-free.
    """
    if not loops:
        raise InvalidInputError("need at least one level loop")
    loops = sorted(loops, key=lambda lp: lp.z_level)
    router = _LatticeRouter(mesh, grid, safety_buffer)
    center_z = float(mesh.center[2])
    z = [lp.z_level for lp in loops]
    plans = []
    for dz in range(1, len(loops) + 1):
        chosen = loops[choose_offset(len(loops), dz, z, center_z) :: dz]
        walk = [chosen[0].waypoint_ids[0]]
        for idx, lp in enumerate(chosen):
            walk.extend(_loop_from(lp.waypoint_ids, walk[-1])[1:])
            if idx + 1 < len(chosen):
                extra, entry = _connect(router, walk, lp.waypoint_ids, chosen[idx + 1].waypoint_ids)
                walk.extend(extra)
                walk.append(entry)
        walk = _repair(router, walk)
        plans.append(CirclingPlan(dz, tuple(int(w) for w in walk), tuple(lp.z_level for lp in chosen)))
    return plans


def _repair(router: _LatticeRouter, walk: list[int]) -> list[int]:
    out = [walk[0]]
    for b in walk[1:]:
        a = out[-1]
        if a != b and not router.clear(a, b):
            detour = router.path(a, {b})
            if detour is None:
                raise InvalidPlanError(f"waypoints {a} and {b} cannot be joined without collision")
            out.extend(detour[1:-1])
        out.append(b)
    return out


def plan_circling(
    mesh: TriangleMesh,
    grid: WaypointGrid,
    safety_buffer: float = DEFAULT_SAFETY_BUFFER,
) -> CirclingResult:
    """All circling sweeps for the target, one per dz."""
    diagnostics: list[str] = []
    loops = circle_each_level(mesh, grid, diagnostics)
    plans = compose_circling_plans(loops, mesh, grid, safety_buffer)
    for plan in plans:
        pts = grid.positions[list(plan.waypoint_ids)]
        for a, b in zip(pts[:-1], pts[1:]):
            if mesh.segment_collides(a, b, safety_buffer):
                raise InvalidPlanError(f"circling plan dz={plan.delta_z} has a colliding edge")
    return CirclingResult(loops, plans, diagnostics)

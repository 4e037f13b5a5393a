"""Bounding-volume hierarchy over triangles and the compiled query kernels.

The tree is stored as flat arrays so the traversal kernels can be compiled
with numba. Triangles keep their original indices; leaves reference a
contiguous slice of ``order``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

LEAF_SIZE = 4
_STACK_SIZE = 128
_PARALLEL_EPS = 1e-14
_BARY_EPS = 1e-12


@dataclass(frozen=True)
class BVH:
    bmin: np.ndarray  # (K, 3)
    bmax: np.ndarray  # (K, 3)
    left: np.ndarray  # (K,) child index or -1
    right: np.ndarray
    start: np.ndarray  # (K,) first slot in ``order`` for leaves
    count: np.ndarray  # (K,) 0 for interior nodes
    order: np.ndarray  # (M,) triangle ids grouped by leaf

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    def arrays(self):
        return self.bmin, self.bmax, self.left, self.right, self.start, self.count, self.order


def build_bvh(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray, leaf_size: int = LEAF_SIZE) -> BVH:
    """Build a median-split BVH over the triangles ``(v0[i], v1[i], v2[i])``."""
    m = len(v0)
    tri_min = np.minimum(np.minimum(v0, v1), v2)
    tri_max = np.maximum(np.maximum(v0, v1), v2)
    centroids = (v0 + v1 + v2) / 3.0
    order = np.arange(m, dtype=np.int64)

    bmin, bmax, left, right, start, count = [], [], [], [], [], []

    def new_node():
        bmin.append(None)
        bmax.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(left) - 1

    root = new_node()
    stack = [(root, 0, m)]
    while stack:
        node, lo, hi = stack.pop()
        idx = order[lo:hi]
        bmin[node] = tri_min[idx].min(axis=0)
        bmax[node] = tri_max[idx].max(axis=0)
        c = centroids[idx]
        extent = c.max(axis=0) - c.min(axis=0)
        axis = int(np.argmax(extent))
        if hi - lo <= leaf_size or extent[axis] <= 0.0:
            start[node] = lo
            count[node] = hi - lo
            continue
        mid = (lo + hi) // 2
        part = np.argpartition(c[:, axis], mid - lo, kind="introselect")
        order[lo:hi] = idx[part]
        l_node = new_node()
        r_node = new_node()
        left[node] = l_node
        right[node] = r_node
        stack.append((r_node, mid, hi))
        stack.append((l_node, lo, mid))

    return BVH(
        bmin=np.ascontiguousarray(np.array(bmin, dtype=np.float64)),
        bmax=np.ascontiguousarray(np.array(bmax, dtype=np.float64)),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        start=np.array(start, dtype=np.int64),
        count=np.array(count, dtype=np.int64),
        order=order,
    )


# ---------------------------------------------------------------------------
# scalar helpers


@njit(cache=True, inline="always")
def _dot(ax, ay, az, bx, by, bz):
    return ax * bx + ay * by + az * bz


@njit(cache=True)
def _ray_box(ox, oy, oz, ix, iy, iz, bmin, bmax, tmax):
    """Entry parameter of the ray into the box, or inf when missed."""
    t1 = (bmin[0] - ox) * ix
    t2 = (bmax[0] - ox) * ix
    tn = min(t1, t2)
    tf = max(t1, t2)
    t1 = (bmin[1] - oy) * iy
    t2 = (bmax[1] - oy) * iy
    tn = max(tn, min(t1, t2))
    tf = min(tf, max(t1, t2))
    t1 = (bmin[2] - oz) * iz
    t2 = (bmax[2] - oz) * iz
    tn = max(tn, min(t1, t2))
    tf = min(tf, max(t1, t2))
    if tf < max(tn, 0.0) or tn > tmax:
        return np.inf
    return max(tn, 0.0)


@njit(cache=True)
def _inv(d):
    if d > 1e-300 or d < -1e-300:
        return 1.0 / d
    return 1e300


@njit(cache=True)
def _ray_triangle(ox, oy, oz, dx, dy, dz, v0, e1, e2):
    """Moller-Trumbore; returns the ray parameter or inf."""
    px = dy * e2[2] - dz * e2[1]
    py = dz * e2[0] - dx * e2[2]
    pz = dx * e2[1] - dy * e2[0]
    det = e1[0] * px + e1[1] * py + e1[2] * pz
    if -_PARALLEL_EPS < det < _PARALLEL_EPS:
        return np.inf
    inv = 1.0 / det
    tx = ox - v0[0]
    ty = oy - v0[1]
    tz = oz - v0[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -_BARY_EPS or u > 1.0 + _BARY_EPS:
        return np.inf
    qx = ty * e1[2] - tz * e1[1]
    qy = tz * e1[0] - tx * e1[2]
    qz = tx * e1[1] - ty * e1[0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -_BARY_EPS or u + v > 1.0 + _BARY_EPS:
        return np.inf
    return (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv


@njit(cache=True)
def _closest_point_triangle(p, a, b, c, out):
    """Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5)."""
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = _dot(abx, aby, abz, apx, apy, apz)
    d2 = _dot(acx, acy, acz, apx, apy, apz)
    if d1 <= 0.0 and d2 <= 0.0:
        out[0], out[1], out[2] = a[0], a[1], a[2]
        return
    bpx, bpy, bpz = p[0] - b[0], p[1] - b[1], p[2] - b[2]
    d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
    d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
    if d3 >= 0.0 and d4 <= d3:
        out[0], out[1], out[2] = b[0], b[1], b[2]
        return
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        out[0], out[1], out[2] = a[0] + v * abx, a[1] + v * aby, a[2] + v * abz
        return
    cpx, cpy, cpz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
    d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
    d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
    if d6 >= 0.0 and d5 <= d6:
        out[0], out[1], out[2] = c[0], c[1], c[2]
        return
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        out[0], out[1], out[2] = a[0] + w * acx, a[1] + w * acy, a[2] + w * acz
        return
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out[0] = b[0] + w * (c[0] - b[0])
        out[1] = b[1] + w * (c[1] - b[1])
        out[2] = b[2] + w * (c[2] - b[2])
        return
    denom = va + vb + vc
    if denom == 0.0:
        # degenerate triangle: fall back to the nearest vertex
        out[0], out[1], out[2] = a[0], a[1], a[2]
        return
    denom = 1.0 / denom
    v = vb * denom
    w = vc * denom
    out[0] = a[0] + abx * v + acx * w
    out[1] = a[1] + aby * v + acy * w
    out[2] = a[2] + abz * v + acz * w


@njit(cache=True)
def _point_triangle_dist(p, a, b, c, buf):
    _closest_point_triangle(p, a, b, c, buf)
    dx = p[0] - buf[0]
    dy = p[1] - buf[1]
    dz = p[2] - buf[2]
    return np.sqrt(dx * dx + dy * dy + dz * dz)


@njit(cache=True)
def _clamp01(x):
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


@njit(cache=True)
def _segment_segment_dist(p1, q1, p2, q2):
    """Distance between segments p1q1 and p2q2 (Ericson 5.1.9)."""
    d1x, d1y, d1z = q1[0] - p1[0], q1[1] - p1[1], q1[2] - p1[2]
    d2x, d2y, d2z = q2[0] - p2[0], q2[1] - p2[1], q2[2] - p2[2]
    rx, ry, rz = p1[0] - p2[0], p1[1] - p2[1], p1[2] - p2[2]
    a = _dot(d1x, d1y, d1z, d1x, d1y, d1z)
    e = _dot(d2x, d2y, d2z, d2x, d2y, d2z)
    f = _dot(d2x, d2y, d2z, rx, ry, rz)
    eps = 1e-24
    if a <= eps and e <= eps:
        s = 0.0
        t = 0.0
    elif a <= eps:
        s = 0.0
        t = _clamp01(f / e)
    else:
        c = _dot(d1x, d1y, d1z, rx, ry, rz)
        if e <= eps:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            b = _dot(d1x, d1y, d1z, d2x, d2y, d2z)
            denom = a * e - b * b
            if denom > 1e-18 * a * e:
                s = _clamp01((b * f - c * e) / denom)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    cx = p1[0] + d1x * s - (p2[0] + d2x * t)
    cy = p1[1] + d1y * s - (p2[1] + d2y * t)
    cz = p1[2] + d1z * s - (p2[2] + d2z * t)
    return np.sqrt(cx * cx + cy * cy + cz * cz)


@njit(cache=True)
def _segment_triangle_dist(a, b, v0, v1, v2, e1, e2, buf):
    dx, dy, dz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    if dx * dx + dy * dy + dz * dz <= 0.0:
        return _point_triangle_dist(a, v0, v1, v2, buf)
    t = _ray_triangle(a[0], a[1], a[2], dx, dy, dz, v0, e1, e2)
    if 0.0 <= t <= 1.0:
        return 0.0
    best = _point_triangle_dist(a, v0, v1, v2, buf)
    d = _point_triangle_dist(b, v0, v1, v2, buf)
    if d < best:
        best = d
    d = _segment_segment_dist(a, b, v0, v1)
    if d < best:
        best = d
    d = _segment_segment_dist(a, b, v1, v2)
    if d < best:
        best = d
    d = _segment_segment_dist(a, b, v2, v0)
    if d < best:
        best = d
    return best


@njit(cache=True)
def _point_box_dist(p, bmin, bmax):
    s = 0.0
    for k in range(3):
        if p[k] < bmin[k]:
            g = bmin[k] - p[k]
            s += g * g
        elif p[k] > bmax[k]:
            g = p[k] - bmax[k]
            s += g * g
    return np.sqrt(s)


@njit(cache=True)
def _segment_box_lower_bound(a, b, mid, half_len, bmin, bmax):
    # box-to-box gap between the segment's own bounds and the node
    s = 0.0
    for k in range(3):
        lo = min(a[k], b[k])
        hi = max(a[k], b[k])
        if hi < bmin[k]:
            g = bmin[k] - hi
            s += g * g
        elif lo > bmax[k]:
            g = lo - bmax[k]
            s += g * g
    lb = np.sqrt(s)
    lb2 = _point_box_dist(mid, bmin, bmax) - half_len
    if lb2 > lb:
        lb = lb2
    return lb


@njit(cache=True)
def _segment_hits_box(a, b, bmin, bmax, r):
    """Slab test of segment ab against the box expanded by r."""
    t0 = 0.0
    t1 = 1.0
    for k in range(3):
        d = b[k] - a[k]
        lo = bmin[k] - r
        hi = bmax[k] + r
        if -1e-300 < d < 1e-300:
            if a[k] < lo or a[k] > hi:
                return False
        else:
            inv = 1.0 / d
            ta = (lo - a[k]) * inv
            tb = (hi - a[k]) * inv
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            if t0 > t1:
                return False
    return True


# ---------------------------------------------------------------------------
# traversal kernels


@njit(cache=True)
def ray_nearest(o, d, tmax, v0, e1, e2, bmin, bmax, left, right, start, count, order):
    """Nearest hit along ``o + t d`` with ``0 <= t <= tmax``; returns (tri, t)."""
    ix, iy, iz = _inv(d[0]), _inv(d[1]), _inv(d[2])
    best_t = tmax
    best_i = -1
    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _ray_box(o[0], o[1], o[2], ix, iy, iz, bmin[node], bmax[node], best_t) == np.inf:
            continue
        n = count[node]
        if n > 0:
            s = start[node]
            for j in range(s, s + n):
                tri = order[j]
                t = _ray_triangle(o[0], o[1], o[2], d[0], d[1], d[2], v0[tri], e1[tri], e2[tri])
                if 0.0 <= t <= best_t and (t < best_t or best_i < 0 or tri < best_i):
                    best_t = t
                    best_i = tri
        else:
            stack[sp] = left[node]
            stack[sp + 1] = right[node]
            sp += 2
    return best_i, best_t


@njit(cache=True)
def ray_blocked(o, d, tmin, tmax, skip, v0, e1, e2, bmin, bmax, left, right, start, count, order):
    """True when any triangle other than ``skip`` is hit with tmin < t < tmax."""
    ix, iy, iz = _inv(d[0]), _inv(d[1]), _inv(d[2])
    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _ray_box(o[0], o[1], o[2], ix, iy, iz, bmin[node], bmax[node], tmax) == np.inf:
            continue
        n = count[node]
        if n > 0:
            s = start[node]
            for j in range(s, s + n):
                tri = order[j]
                if tri == skip:
                    continue
                t = _ray_triangle(o[0], o[1], o[2], d[0], d[1], d[2], v0[tri], e1[tri], e2[tri])
                if tmin < t < tmax:
                    return True
        else:
            stack[sp] = left[node]
            stack[sp + 1] = right[node]
            sp += 2
    return False


@njit(cache=True)
def segment_distance(a, b, v0, v1, v2, e1, e2, bmin, bmax, left, right, start, count, order):
    """Exact minimum distance between segment ab and the mesh (branch and bound)."""
    mid = 0.5 * (a + b)
    half = 0.5 * np.sqrt(((b - a) ** 2).sum())
    buf = np.empty(3)
    best = np.inf
    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _segment_box_lower_bound(a, b, mid, half, bmin[node], bmax[node]) >= best:
            continue
        n = count[node]
        if n > 0:
            s = start[node]
            for j in range(s, s + n):
                tri = order[j]
                d = _segment_triangle_dist(a, b, v0[tri], v1[tri], v2[tri], e1[tri], e2[tri], buf)
                if d < best:
                    best = d
                    if best == 0.0:
                        return 0.0
        else:
            l_node = left[node]
            r_node = right[node]
            lb_l = _segment_box_lower_bound(a, b, mid, half, bmin[l_node], bmax[l_node])
            lb_r = _segment_box_lower_bound(a, b, mid, half, bmin[r_node], bmax[r_node])
            # push the farther child first so the nearer one is explored first
            if lb_l < lb_r:
                stack[sp] = r_node
                stack[sp + 1] = l_node
            else:
                stack[sp] = l_node
                stack[sp + 1] = r_node
            sp += 2
    return best


@njit(cache=True)
def segment_closer_than(a, b, r, v0, v1, v2, e1, e2, bmin, bmax, left, right, start, count, order):
    """True when some triangle lies strictly closer than r to segment ab."""
    buf = np.empty(3)
    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _segment_hits_box(a, b, bmin[node], bmax[node], r):
            continue
        n = count[node]
        if n > 0:
            s = start[node]
            for j in range(s, s + n):
                tri = order[j]
                if _segment_triangle_dist(a, b, v0[tri], v1[tri], v2[tri], e1[tri], e2[tri], buf) < r:
                    return True
        else:
            stack[sp] = left[node]
            stack[sp + 1] = right[node]
            sp += 2
    return False


@njit(cache=True)
def points_distance(points, v0, v1, v2, bmin, bmax, left, right, start, count, order):
    """Minimum point-to-mesh distance for every row of ``points``."""
    out = np.empty(len(points))
    buf = np.empty(3)
    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    for i in range(len(points)):
        p = points[i]
        best = np.inf
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if _point_box_dist(p, bmin[node], bmax[node]) >= best:
                continue
            n = count[node]
            if n > 0:
                s = start[node]
                for j in range(s, s + n):
                    tri = order[j]
                    d = _point_triangle_dist(p, v0[tri], v1[tri], v2[tri], buf)
                    if d < best:
                        best = d
            else:
                l_node = left[node]
                r_node = right[node]
                if _point_box_dist(p, bmin[l_node], bmax[l_node]) < _point_box_dist(p, bmin[r_node], bmax[r_node]):
                    stack[sp] = r_node
                    stack[sp + 1] = l_node
                else:
                    stack[sp] = l_node
                    stack[sp + 1] = r_node
                sp += 2
        out[i] = best
    return out


@njit(cache=True)
def visible_from_points(
    points,
    cam_axis,
    cam_up,
    cam_right,
    tan_h,
    tan_v,
    near,
    far,
    centroids,
    normals,
    eligible,
    v0,
    e1,
    e2,
    bmin,
    bmax,
    left,
    right,
    start,
    count,
    order,
):
    """Mask of triangles whose centroid some camera sees from some point.

    Camera ``c`` looks along ``cam_axis[c]``; a centroid is inside its frustum
    when the lateral offsets along ``cam_right[c]``/``cam_up[c]`` are within
    ``tan_h[c]``/``tan_v[c]`` times the depth. Visibility additionally needs a
    front-facing triangle, a distance in ``[near[c], far[c]]`` and no other
    triangle hit strictly before the centroid.
    """
    m = len(centroids)
    seen = np.zeros(m, dtype=np.bool_)
    n_cams = len(cam_axis)
    d = np.empty(3)
    for s in range(len(points)):
        p = points[s]
        for t in range(m):
            if seen[t] or not eligible[t]:
                continue
            dx = centroids[t, 0] - p[0]
            dy = centroids[t, 1] - p[1]
            dz = centroids[t, 2] - p[2]
            # back-facing (or edge-on) triangles cannot be inspected
            if normals[t, 0] * dx + normals[t, 1] * dy + normals[t, 2] * dz >= 0.0:
                continue
            dist = np.sqrt(dx * dx + dy * dy + dz * dz)
            for c in range(n_cams):
                if dist < near[c] or dist > far[c]:
                    continue
                depth = dx * cam_axis[c, 0] + dy * cam_axis[c, 1] + dz * cam_axis[c, 2]
                if depth <= 0.0:
                    continue
                lat = dx * cam_right[c, 0] + dy * cam_right[c, 1] + dz * cam_right[c, 2]
                if abs(lat) > tan_h[c] * depth:
                    continue
                ver = dx * cam_up[c, 0] + dy * cam_up[c, 1] + dz * cam_up[c, 2]
                if abs(ver) > tan_v[c] * depth:
                    continue
                d[0] = dx
                d[1] = dy
                d[2] = dz
                if not ray_blocked(p, d, 1e-9, 1.0 - 1e-9, t, v0, e1, e2, bmin, bmax, left, right, start, count, order):
                    seen[t] = True
                    break
    return seen

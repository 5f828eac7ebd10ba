"""Axis-aligned BVH over mesh faces with exact-match ray casting.

The tree is a flat-array median split (leaf size <= 4). The per-triangle
intersection is a single scalar Moeller-Trumbore kernel shared by both the
BVH traversal and the brute-force all-faces reference, and the nearest hit
is chosen by lexicographic (t, face-id) order, so the two paths agree
bit-for-bit on every (mesh, ray) pair regardless of traversal order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import TriangleMesh

T_MIN = 1e-6  # self-intersection guard along the ray parameter


@njit(cache=True)
def _ray_triangle(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz, t_min):
    """Moeller-Trumbore, two-sided; returns the ray parameter t or -1.0."""
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -1e-14 < det < 1e-14:
        return -1.0
    inv = 1.0 / det
    tx = ox - ax
    ty = oy - ay
    tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -1e-12 or u > 1.0 + 1e-12:
        return -1.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -1e-12 or u + v > 1.0 + 1e-12:
        return -1.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= t_min:
        return -1.0
    return t


@njit(cache=True)
def _build_nodes(bb_min, bb_max, cent, leaf_size):
    m = cent.shape[0]
    cap = 2 * m + 8
    node_min = np.empty((cap, 3), np.float64)
    node_max = np.empty((cap, 3), np.float64)
    node_left = np.full(cap, -1, np.int64)
    node_right = np.full(cap, -1, np.int64)
    leaf_start = np.full(cap, -1, np.int64)
    leaf_count = np.zeros(cap, np.int64)
    order = np.arange(m)

    stack_node = np.empty(cap, np.int64)
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    sp = 0
    stack_node[sp] = 0
    stack_lo[sp] = 0
    stack_hi[sp] = m
    sp += 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        nid = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]

        for k in range(3):
            node_min[nid, k] = np.inf
            node_max[nid, k] = -np.inf
        for i in range(lo, hi):
            f = order[i]
            for k in range(3):
                if bb_min[f, k] < node_min[nid, k]:
                    node_min[nid, k] = bb_min[f, k]
                if bb_max[f, k] > node_max[nid, k]:
                    node_max[nid, k] = bb_max[f, k]

        if hi - lo <= leaf_size:
            leaf_start[nid] = lo
            leaf_count[nid] = hi - lo
            continue

        # Split along the widest centroid extent at the index median.
        best_axis = 0
        best_extent = -1.0
        for k in range(3):
            cmin = np.inf
            cmax = -np.inf
            for i in range(lo, hi):
                v = cent[order[i], k]
                if v < cmin:
                    cmin = v
                if v > cmax:
                    cmax = v
            if cmax - cmin > best_extent:
                best_extent = cmax - cmin
                best_axis = k

        vals = np.empty(hi - lo, np.float64)
        for i in range(hi - lo):
            vals[i] = cent[order[lo + i], best_axis]
        perm = np.argsort(vals, kind="mergesort")
        tmp = np.empty(hi - lo, np.int64)
        for i in range(hi - lo):
            tmp[i] = order[lo + perm[i]]
        for i in range(hi - lo):
            order[lo + i] = tmp[i]

        mid = lo + (hi - lo) // 2
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        node_left[nid] = left_id
        node_right[nid] = right_id
        stack_node[sp] = left_id
        stack_lo[sp] = lo
        stack_hi[sp] = mid
        sp += 1
        stack_node[sp] = right_id
        stack_lo[sp] = mid
        stack_hi[sp] = hi
        sp += 1

    return node_min[:n_nodes], node_max[:n_nodes], node_left[:n_nodes], node_right[:n_nodes], \
        leaf_start[:n_nodes], leaf_count[:n_nodes], order


@njit(cache=True, inline="always")
def _slab_hit(nmin, nmax, nid, ox, oy, oz, ix, iy, iz, t_best):
    t0 = (nmin[nid, 0] - ox) * ix
    t1 = (nmax[nid, 0] - ox) * ix
    if t0 > t1:
        t0, t1 = t1, t0
    near = t0
    far = t1
    t0 = (nmin[nid, 1] - oy) * iy
    t1 = (nmax[nid, 1] - oy) * iy
    if t0 > t1:
        t0, t1 = t1, t0
    if t0 > near:
        near = t0
    if t1 < far:
        far = t1
    t0 = (nmin[nid, 2] - oz) * iz
    t1 = (nmax[nid, 2] - oz) * iz
    if t0 > t1:
        t0, t1 = t1, t0
    if t0 > near:
        near = t0
    if t1 < far:
        far = t1
    return near <= far and far >= 0.0 and near <= t_best


@njit(cache=True)
def _inv_component(d):
    if d > 1e-300 or d < -1e-300:
        return 1.0 / d
    return 1e300 if d >= 0.0 else -1e300


@njit(cache=True)
def _traverse_nearest(node_min, node_max, node_left, node_right, leaf_start, leaf_count,
                      ta, tb, tc, face_ids, ox, oy, oz, dx, dy, dz, t_min):
    """Nearest hit minimizing (t, original face id); returns (t, face) or (inf, -1)."""
    ix = _inv_component(dx)
    iy = _inv_component(dy)
    iz = _inv_component(dz)
    stack = np.empty(128, np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    best_t = np.inf
    best_f = -1
    while sp > 0:
        sp -= 1
        nid = stack[sp]
        if not _slab_hit(node_min, node_max, nid, ox, oy, oz, ix, iy, iz, best_t):
            continue
        if leaf_start[nid] >= 0:
            for k in range(leaf_start[nid], leaf_start[nid] + leaf_count[nid]):
                t = _ray_triangle(ox, oy, oz, dx, dy, dz,
                                  ta[k, 0], ta[k, 1], ta[k, 2],
                                  tb[k, 0], tb[k, 1], tb[k, 2],
                                  tc[k, 0], tc[k, 1], tc[k, 2], t_min)
                if t > 0.0 and (t < best_t or (t == best_t and face_ids[k] < best_f)):
                    best_t = t
                    best_f = face_ids[k]
        else:
            stack[sp] = node_left[nid]
            sp += 1
            stack[sp] = node_right[nid]
            sp += 1
    return best_t, best_f


@njit(cache=True)
def _traverse_any(node_min, node_max, node_left, node_right, leaf_start, leaf_count,
                  ta, tb, tc, ox, oy, oz, dx, dy, dz, t_min, t_max):
    """True when any face intersects the ray with t in (t_min, t_max)."""
    ix = _inv_component(dx)
    iy = _inv_component(dy)
    iz = _inv_component(dz)
    stack = np.empty(128, np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        nid = stack[sp]
        if not _slab_hit(node_min, node_max, nid, ox, oy, oz, ix, iy, iz, t_max):
            continue
        if leaf_start[nid] >= 0:
            for k in range(leaf_start[nid], leaf_start[nid] + leaf_count[nid]):
                t = _ray_triangle(ox, oy, oz, dx, dy, dz,
                                  ta[k, 0], ta[k, 1], ta[k, 2],
                                  tb[k, 0], tb[k, 1], tb[k, 2],
                                  tc[k, 0], tc[k, 1], tc[k, 2], t_min)
                if 0.0 < t < t_max:
                    return True
        else:
            stack[sp] = node_left[nid]
            sp += 1
            stack[sp] = node_right[nid]
            sp += 1
    return False


@njit(cache=True)
def _brute_nearest(ta, tb, tc, ox, oy, oz, dx, dy, dz, t_min):
    """All-faces reference with the identical (t, face) selection rule."""
    best_t = np.inf
    best_f = -1
    for k in range(ta.shape[0]):
        t = _ray_triangle(ox, oy, oz, dx, dy, dz,
                          ta[k, 0], ta[k, 1], ta[k, 2],
                          tb[k, 0], tb[k, 1], tb[k, 2],
                          tc[k, 0], tc[k, 1], tc[k, 2], t_min)
        if t > 0.0 and (t < best_t or (t == best_t and k < best_f)):
            best_t = t
            best_f = k
    return best_t, best_f


@dataclass
class Bvh:
    """Flat-array BVH; immutable after build, safe for concurrent queries."""

    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    leaf_start: np.ndarray
    leaf_count: np.ndarray
    tri_a: np.ndarray       # (m, 3) corners reordered into leaf-contiguous layout
    tri_b: np.ndarray
    tri_c: np.ndarray
    face_ids: np.ndarray    # original face index of each reordered triangle

    @property
    def n_nodes(self) -> int:
        return int(self.node_min.shape[0])


def build_bvh(mesh: TriangleMesh, leaf_size: int = 4) -> Bvh:
    a, b, c = mesh.triangle_corners()
    bb_min = np.minimum(np.minimum(a, b), c)
    bb_max = np.maximum(np.maximum(a, b), c)
    nodes = _build_nodes(np.ascontiguousarray(bb_min), np.ascontiguousarray(bb_max),
                         np.ascontiguousarray(mesh.centroids), leaf_size)
    node_min, node_max, node_left, node_right, leaf_start, leaf_count, order = nodes
    return Bvh(
        node_min=node_min, node_max=node_max,
        node_left=node_left, node_right=node_right,
        leaf_start=leaf_start, leaf_count=leaf_count,
        tri_a=np.ascontiguousarray(a[order]),
        tri_b=np.ascontiguousarray(b[order]),
        tri_c=np.ascontiguousarray(c[order]),
        face_ids=np.ascontiguousarray(order),
    )


def intersect(bvh: Bvh, origin: np.ndarray, direction: np.ndarray,
              t_min: float = T_MIN) -> tuple[int, float, np.ndarray] | None:
    """Nearest (face, t, point) hit of a single ray, or None on a miss."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    t, f = _traverse_nearest(
        bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
        bvh.leaf_start, bvh.leaf_count, bvh.tri_a, bvh.tri_b, bvh.tri_c,
        bvh.face_ids, o[0], o[1], o[2], d[0], d[1], d[2], t_min,
    )
    if f < 0:
        return None
    return int(f), float(t), o + t * d


def intersect_brute(mesh: TriangleMesh, origin: np.ndarray, direction: np.ndarray,
                    t_min: float = T_MIN) -> tuple[int, float, np.ndarray] | None:
    """Brute-force all-faces nearest hit (reference path)."""
    a, b, c = mesh.triangle_corners()
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    t, f = _brute_nearest(np.ascontiguousarray(a), np.ascontiguousarray(b),
                          np.ascontiguousarray(c), o[0], o[1], o[2], d[0], d[1], d[2], t_min)
    if f < 0:
        return None
    return int(f), float(t), o + t * d


def occluded(bvh: Bvh, origin: np.ndarray, direction: np.ndarray, t_max: float,
             t_min: float = T_MIN) -> bool:
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    return bool(_traverse_any(
        bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
        bvh.leaf_start, bvh.leaf_count, bvh.tri_a, bvh.tri_b, bvh.tri_c,
        o[0], o[1], o[2], d[0], d[1], d[2], t_min, t_max,
    ))

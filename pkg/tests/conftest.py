"""Shared synthetic geometry and image builders for the test suite."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from gecm.geometry import TriangleMesh


# ------------------------------------------------------------------
# Mesh builders
# ------------------------------------------------------------------

def box_arrays(center, size):
    """Axis-aligned box: returns (8 vertices, 12 triangles)."""
    cx, cy, cz = center
    hx, hy, hz = (s / 2.0 for s in size)
    v = np.array(
        [[cx + sx * hx, cy + sy * hy, cz + sz * hz]
         for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
        dtype=np.float64,
    )
    quads = [
        [0, 1, 3, 2], [4, 6, 7, 5],  # x- x+
        [0, 4, 5, 1], [2, 3, 7, 6],  # y- y+
        [0, 2, 6, 4], [1, 5, 7, 3],  # z- z+
    ]
    f = []
    for q in quads:
        f.append([q[0], q[1], q[2]])
        f.append([q[0], q[2], q[3]])
    return v, np.array(f, dtype=np.int64)


def quad_arrays(p0, p1, p2, p3):
    """Planar quad from four corners (two triangles)."""
    v = np.array([p0, p1, p2, p3], dtype=np.float64)
    f = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    return v, f


def merge_arrays(*parts):
    verts = []
    faces = []
    offset = 0
    for v, f in parts:
        verts.append(v)
        faces.append(f + offset)
        offset += v.shape[0]
    return np.vstack(verts), np.vstack(faces)


def subdivide_arrays(v, f, levels=1):
    """Midpoint subdivision: every triangle becomes four."""
    v = list(map(tuple, np.asarray(v, dtype=np.float64)))
    f = [tuple(map(int, row)) for row in f]
    for _ in range(levels):
        cache = {}
        out = []

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                cache[key] = len(v)
                v.append(tuple((np.array(v[i]) + np.array(v[j])) / 2.0))
            return cache[key]

        for a, b, c in f:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            out += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        f = out
    return np.array(v, dtype=np.float64), np.array(f, dtype=np.int64)


def ellipsoid_arrays(a, b, c, n_u=32, n_v=16):
    """UV-sphere scaled to semi-axes (a, b, c) along x, y, z."""
    verts = []
    for i in range(1, n_v):
        theta = np.pi * i / n_v
        for j in range(n_u):
            phi = 2 * np.pi * j / n_u
            verts.append(
                [a * np.sin(theta) * np.cos(phi), b * np.sin(theta) * np.sin(phi), c * np.cos(theta)]
            )
    top = len(verts)
    verts.append([0.0, 0.0, c])
    bottom = len(verts)
    verts.append([0.0, 0.0, -c])
    faces = []
    for i in range(n_v - 2):
        for j in range(n_u):
            j2 = (j + 1) % n_u
            p00 = i * n_u + j
            p01 = i * n_u + j2
            p10 = (i + 1) * n_u + j
            p11 = (i + 1) * n_u + j2
            faces += [[p00, p10, p11], [p00, p11, p01]]
    for j in range(n_u):
        j2 = (j + 1) % n_u
        faces.append([top, j, j2])
        faces.append([bottom, (n_v - 2) * n_u + j2, (n_v - 2) * n_u + j])
    return np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64)


def aircraft_arrays(length=20.0, span=16.0, fuselage_width=2.0, wing_chord=3.0,
                    thickness=1.0, wing_offset=0.0, subdiv=0):
    """Mirror-symmetric aircraft stand-in: fuselage along y (nose at -y),
    wing box along x centered at y = wing_offset. Left wing is +x."""
    fuselage = box_arrays((0.0, 0.0, 0.0), (fuselage_width, length, thickness))
    wings = box_arrays((0.0, wing_offset, 0.0), (span, wing_chord, thickness * 0.6))
    v, f = merge_arrays(fuselage, wings)
    if subdiv:
        v, f = subdivide_arrays(v, f, subdiv)
    return v, f


def trihedral_arrays(corner, boresight, size=0.6, mirror_x=False):
    """Trihedral corner reflector: three square plates meeting at ``corner``.

    The cube diagonal (retro boresight) points along ``boresight``; arrivals
    within roughly 35 degrees of it retro-reflect after three bounces.
    ``mirror_x`` flips the edge triple through the x = corner.x plane, giving
    the mirror-image (equally valid) reflector for symmetric layouts.
    """
    u = np.asarray(boresight, dtype=np.float64)
    u = u / np.linalg.norm(u)
    helper = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    p = np.cross(helper, u)
    p /= np.linalg.norm(p)
    q = np.cross(u, p)
    edges = []
    for theta in (0.0, 2 * np.pi / 3, 4 * np.pi / 3):
        e = np.sqrt(2.0 / 3.0) * (np.cos(theta) * p + np.sin(theta) * q) + np.sqrt(1.0 / 3.0) * u
        if mirror_x:
            e = e * np.array([-1.0, 1.0, 1.0])
        edges.append(size * e)
    corner = np.asarray(corner, dtype=np.float64)
    parts = []
    for i in range(3):
        a, b = edges[i], edges[(i + 1) % 3]
        parts.append(quad_arrays(corner, corner + a, corner + a + b, corner + b))
    return merge_arrays(*parts)


def wedge_arrays(y0, y1, half_width, half_height):
    """Tapered end cap: a box cross-section at y0 closing to an edge at y1."""
    v = np.array(
        [
            [-half_width, y0, -half_height],
            [half_width, y0, -half_height],
            [half_width, y0, half_height],
            [-half_width, y0, half_height],
            [-half_width, y1, 0.0],
            [half_width, y1, 0.0],
        ],
        dtype=np.float64,
    )
    f = np.array(
        [[0, 1, 5], [0, 5, 4], [3, 5, 1], [3, 4, 5],  # bottom and top slopes
         [0, 4, 3], [1, 2, 5]],                        # side triangles
        dtype=np.int64,
    )
    return v, f


def hex_wing_arrays(span=16.0, chord=3.0, thickness=0.6):
    """Wing with a sharp-edged hexagonal section (no flat leading edge)."""
    hw, hc, ht = span / 2.0, chord / 2.0, thickness / 2.0
    section = [(-hc, 0.0), (-hc / 2.0, ht), (hc / 2.0, ht),
               (hc, 0.0), (hc / 2.0, -ht), (-hc / 2.0, -ht)]
    v = np.array([[x, y, z] for x in (-hw, hw) for (y, z) in section], dtype=np.float64)
    f = []
    for i in range(6):
        j = (i + 1) % 6
        f += [[i, j, 6 + j], [i, 6 + j, 6 + i]]      # side strips
    for i in range(1, 5):                             # end caps as fans
        f.append([0, i + 1, i])
        f.append([6, 6 + i, 6 + i + 1])
    return v, np.array(f, dtype=np.int64)


def reflector_aircraft_arrays(boresight_elevation_deg=20.0, subdiv=2):
    """Symmetric aircraft dressed with trihedral reflector rows.

    Fore-aft symmetric about the wing line (so the planform centroid sits at
    the wing station), wedge nose/tail and a sharp-edged wing section so no
    long flat strip faces the radar. The trihedral rows give strong retro
    returns along the whole planform, the way calibration corners do, so the
    rendered scatterer cloud spans the silhouette. Reflectors come in mirror
    pairs, keeping the mesh symmetric about the fuselage plane.
    """
    el = np.radians(boresight_elevation_deg)
    bore = np.array([0.0, -np.cos(el), np.sin(el)])  # toward the nose, tilted up
    parts = [
        box_arrays((0.0, 0.0, 0.0), (2.0, 18.0, 1.0)),   # fuselage along y
        wedge_arrays(-9.0, -10.5, 1.0, 0.5),             # pointed nose
        wedge_arrays(9.0, 10.5, 1.0, 0.5),               # pointed tail
        hex_wing_arrays(16.0, 3.0, 0.6),                 # wings along x
    ]
    # Trihedral corners sit 0.25 m aft of each station so the plate material
    # (which spreads toward the boresight) is centered on the station.
    for y in np.arange(-9.75, 9.76, 1.5):                 # fuselage rows, mirror pairs
        z0 = 0.55 if abs(y) <= 9.0 else 0.3
        parts.append(trihedral_arrays((0.8, y + 0.25, z0), bore, size=0.5))
        parts.append(trihedral_arrays((-0.8, y + 0.25, z0), bore, size=0.5, mirror_x=True))
    for x in np.arange(1.95, 7.4, 1.35):                  # wing rows at the wing line
        parts.append(trihedral_arrays((x, 0.25, 0.35), bore, size=0.5))
        parts.append(trihedral_arrays((-x, 0.25, 0.35), bore, size=0.5, mirror_x=True))
    v, f = merge_arrays(*parts)
    if subdiv:
        v, f = subdivide_arrays(v, f, subdiv)
    return v, f


def dihedral_arrays(width=2.0, depth=1.0):
    """Right-angle corner with its fold along x, opening toward +y.

    Retro-reflects bundles traveling along -y (the rotated-frame bundle at
    azimuth 0, depression 90).
    """
    a = quad_arrays(
        [-width / 2, 0.0, 0.0], [width / 2, 0.0, 0.0],
        [width / 2, depth, depth], [-width / 2, depth, depth],
    )
    b = quad_arrays(
        [-width / 2, depth, -depth], [width / 2, depth, -depth],
        [width / 2, 0.0, 0.0], [-width / 2, 0.0, 0.0],
    )
    return merge_arrays(a, b)


def mesh_from(v, f) -> TriangleMesh:
    return TriangleMesh.from_arrays(v, f)


# ------------------------------------------------------------------
# Mesh file writers
# ------------------------------------------------------------------

def write_obj(path, v, f):
    lines = [f"v {x} {y} {z}" for x, y, z in v]
    lines += ["f " + " ".join(str(i + 1) for i in tri) for tri in f]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_stl(path, v, f):
    v = np.asarray(v, dtype=np.float64)
    blob = bytearray(b"\0" * 80)
    blob += struct.pack("<I", len(f))
    for tri in f:
        a, b, c = v[tri[0]], v[tri[1]], v[tri[2]]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n)
        n = n / norm if norm > 0 else n
        blob += struct.pack("<3f", *n)
        for p in (a, b, c):
            blob += struct.pack("<3f", *p)
        blob += struct.pack("<H", 0)
    path.write_bytes(bytes(blob))


# ------------------------------------------------------------------
# Synthetic images
# ------------------------------------------------------------------

def silhouette_image(h=256, w=256, rect=(78, 108, 178, 148), bright_points=(), base=0.05):
    """Dark background, bright axis-aligned rectangle, optional point targets."""
    rng = np.random.default_rng(7)
    img = base * np.ones((h, w)) + 0.01 * rng.standard_normal((h, w))
    x0, y0, x1, y1 = rect
    img[y0:y1, x0:x1] = 0.55
    yy, xx = np.mgrid[0:h, 0:w]
    for (px, py, amp) in bright_points:
        img += amp * np.exp(-((xx - px) ** 2 + (yy - py) ** 2) / (2 * 2.0**2))
    return np.clip(img, 0.0, 1.0)


@pytest.fixture(scope="session")
def unit_cube_mesh() -> TriangleMesh:
    return mesh_from(*box_arrays((0, 0, 0), (1, 1, 1)))


@pytest.fixture(scope="session")
def aircraft_mesh() -> TriangleMesh:
    return mesh_from(*aircraft_arrays())


@pytest.fixture(scope="session")
def dihedral_mesh() -> TriangleMesh:
    return mesh_from(*dihedral_arrays())

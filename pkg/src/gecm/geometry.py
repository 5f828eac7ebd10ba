"""Mesh ingestion, radar-frame transforms, and 3-D pose-skeleton extraction.

Frame conventions
-----------------
Azimuth rotates about +z with 0 degrees pointing West and clockwise
increase; depression tilts about +x. The frame rotation is the composition
R_az(azimuth) @ R_dep(depression) and maps the reference look (0, 1, 0) to
the incident look vector

    k_i = (sin(az) cos(dep), cos(az) cos(dep), -sin(dep)),

so the look vector and the rotation stay mutually consistent for every
angle pair (and in particular at azimuth 0).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ImagingParams, PoseSkeleton3D
from .errors import DegenerateGeometryError, EmptyMeshError, MeshParseError

MIN_FACE_AREA = 1e-12  # [m^2] faces below this are dropped at load


@dataclass
class TriangleMesh:
    """Triangle mesh with cached per-face centroids, unit normals and areas.

    Treat instances as immutable: transforms return new meshes.
    """

    vertices: np.ndarray                     # (n, 3) float64, meters
    faces: np.ndarray                        # (m, 3) int64 vertex indices
    centroids: np.ndarray = field(repr=False, default=None)  # (m, 3)
    normals: np.ndarray = field(repr=False, default=None)    # (m, 3) unit
    areas: np.ndarray = field(repr=False, default=None)      # (m,)
    dropped_degenerate: int = 0

    @classmethod
    def from_arrays(
        cls,
        vertices: np.ndarray,
        faces: np.ndarray,
        recenter: bool = False,
    ) -> "TriangleMesh":
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if vertices.size == 0 or faces.size == 0:
            raise EmptyMeshError("mesh has no geometry")
        if faces.min() < 0 or faces.max() >= vertices.shape[0]:
            raise MeshParseError("<arrays>", "face index out of range")
        if recenter:
            vertices = vertices - vertices.mean(axis=0)
        centroids, normals, areas = _face_geometry(vertices, faces)
        keep = areas > MIN_FACE_AREA
        dropped = int((~keep).sum())
        if dropped:
            faces = faces[keep]
            if faces.size == 0:
                raise EmptyMeshError("all faces degenerate")
            centroids, normals, areas = centroids[keep], normals[keep], areas[keep]
        return cls(vertices, faces, centroids, normals, areas, dropped)

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    def triangle_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.vertices
        return v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]


def _face_geometry(vertices: np.ndarray, faces: np.ndarray):
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    cross = np.cross(b - a, c - a)
    twice_area = np.linalg.norm(cross, axis=1)
    areas = 0.5 * twice_area
    normals = cross / np.clip(twice_area[:, None], 1e-300, None)
    centroids = (a + b + c) / 3.0
    return centroids, normals, areas


# ------------------------------------------------------------------
# File loaders: ASCII OBJ (v/f) and binary STL
# ------------------------------------------------------------------

def _load_obj(path: Path) -> tuple[np.ndarray, np.ndarray]:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    raise MeshParseError(path, "vertex needs 3 coordinates", lineno)
                try:
                    verts.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise MeshParseError(path, f"bad vertex {line.strip()!r}", lineno) from None
            elif tag == "f":
                if len(tokens) < 4:
                    raise MeshParseError(path, "face needs >= 3 indices", lineno)
                idxs = []
                for t in tokens[1:]:
                    head = t.split("/")[0]
                    try:
                        idx = int(head)
                    except ValueError:
                        raise MeshParseError(path, f"bad face index {t!r}", lineno) from None
                    if idx <= 0:
                        raise MeshParseError(path, "face indices must be positive (1-based)", lineno)
                    idxs.append(idx - 1)
                for i in range(1, len(idxs) - 1):  # fan triangulation
                    faces.append([idxs[0], idxs[i], idxs[i + 1]])
            # all other record types (vn, vt, usemtl, ...) are ignored
    if not verts or not faces:
        raise EmptyMeshError(f"{path}: no v/f geometry found")
    v = np.asarray(verts, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    if f.max() >= v.shape[0]:
        raise MeshParseError(path, "face index beyond vertex count")
    return v, f


def _load_stl(path: Path) -> tuple[np.ndarray, np.ndarray]:
    blob = path.read_bytes()
    if len(blob) < 84:
        raise MeshParseError(path, "binary STL shorter than its 84-byte preamble")
    (count,) = struct.unpack_from("<I", blob, 80)
    expected = 84 + count * 50
    if len(blob) < expected:
        raise MeshParseError(path, f"truncated STL: {len(blob)} bytes, need {expected}")
    if count == 0:
        raise EmptyMeshError(f"{path}: STL contains no triangles")
    records = np.frombuffer(blob, dtype=np.uint8, count=count * 50, offset=84)
    tri = records.reshape(count, 50)[:, 12:48].copy().view("<f4").reshape(count, 3, 3)
    flat = tri.reshape(-1, 3).astype(np.float64)
    # Deduplicate exactly-equal vertices so vertex statistics are unweighted.
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    faces = inverse.reshape(count, 3).astype(np.int64)
    return uniq, faces


def load_mesh(path: str | Path) -> TriangleMesh:
    """Load an ASCII OBJ or binary STL mesh, recentered to its vertex centroid.

    Degenerate faces (area below 1e-12 m^2) are dropped; the count is kept
    on the returned mesh. Units are assumed to be meters.
    """
    path = Path(path)
    if not path.exists():
        raise MeshParseError(path, "file not found")
    if path.stat().st_size == 0:
        raise EmptyMeshError(f"{path}: empty file")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        v, f = _load_obj(path)
    elif suffix == ".stl":
        v, f = _load_stl(path)
    else:
        # Sniff: OBJ files are text starting with comments or v records.
        head = path.read_bytes()[:512]
        if b"v " in head or head.lstrip().startswith(b"#"):
            v, f = _load_obj(path)
        else:
            v, f = _load_stl(path)
    return TriangleMesh.from_arrays(v, f, recenter=True)


# ------------------------------------------------------------------
# Radar frame
# ------------------------------------------------------------------

@dataclass(frozen=True)
class RadarFrame:
    """Rigid frame of one viewpoint: rotation R_az @ R_dep plus look vector."""

    rotation: np.ndarray  # (3, 3)
    look: np.ndarray      # (3,) unit incident direction


def azimuth_rotation(azimuth_deg: float) -> np.ndarray:
    a = math.radians(azimuth_deg)
    ca, sa = math.cos(a), math.sin(a)
    return np.array([[ca, sa, 0.0], [-sa, ca, 0.0], [0.0, 0.0, 1.0]])


def depression_rotation(depression_deg: float) -> np.ndarray:
    b = math.radians(depression_deg)
    cb, sb = math.cos(b), math.sin(b)
    # Tilt about +x taking the reference look (0, 1, 0) to (0, cos b, -sin b).
    return np.array([[1.0, 0.0, 0.0], [0.0, cb, sb], [0.0, -sb, cb]])


def look_vector(azimuth_deg: float, depression_deg: float) -> np.ndarray:
    a = math.radians(azimuth_deg)
    b = math.radians(depression_deg)
    return np.array([math.sin(a) * math.cos(b), math.cos(a) * math.cos(b), -math.sin(b)])


def radar_frame(params: ImagingParams) -> RadarFrame:
    rot = azimuth_rotation(params.azimuth_deg) @ depression_rotation(params.depression_deg)
    return RadarFrame(rotation=rot, look=look_vector(params.azimuth_deg, params.depression_deg))


def transform_mesh(mesh: TriangleMesh, frame: RadarFrame) -> TriangleMesh:
    """Rotate a mesh into the radar frame (v' = R v); caches recomputed."""
    verts = mesh.vertices @ frame.rotation.T
    centroids, normals, areas = _face_geometry(verts, mesh.faces)
    return TriangleMesh(
        vertices=verts,
        faces=mesh.faces,
        centroids=centroids,
        normals=normals,
        areas=areas,
        dropped_degenerate=mesh.dropped_degenerate,
    )


# ------------------------------------------------------------------
# 3-D pose skeleton
# ------------------------------------------------------------------

@dataclass(frozen=True)
class CenterlineSample:
    """One fuselage-axis slice: parameter, median point and lateral spans."""

    u: float
    point: np.ndarray       # (3,)
    span_left: float
    span_right: float


def _principal_axes(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centered = vertices - vertices.mean(axis=0)
    cov = centered.T @ centered / max(1, vertices.shape[0])
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    if eigvals[order[0]] <= 1e-18 or eigvals[order[1]] <= 1e-12 * eigvals[order[0]]:
        raise DegenerateGeometryError("vertex covariance is rank deficient")
    e_f = eigvecs[:, order[0]]
    e_s = eigvecs[:, order[1]]
    # Deterministic signs: largest-magnitude component positive.
    for vec in (e_f, e_s):
        k = int(np.argmax(np.abs(vec)))
        if vec[k] < 0:
            vec *= -1.0
    return e_f, e_s


def compute_centerline(
    mesh: TriangleMesh, n_slices: int = 64
) -> tuple[list[CenterlineSample], np.ndarray, np.ndarray]:
    """Slice the mesh along its fuselage axis into per-slice medians.

    Returns the non-empty slices ordered by the axis parameter, plus the
    fuselage and lateral principal axes.
    """
    verts = mesh.vertices
    if verts.shape[0] < 4:
        raise DegenerateGeometryError("need at least 4 vertices")
    e_f, e_s = _principal_axes(verts)
    t = verts @ e_f
    t_min, t_max = float(t.min()), float(t.max())
    if t_max <= t_min:
        raise DegenerateGeometryError("zero extent along the fuselage axis")
    edges = np.linspace(t_min, t_max, n_slices + 1)
    idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, n_slices - 1)

    samples: list[CenterlineSample] = []
    for j in range(n_slices):
        sel = idx == j
        if not sel.any():
            continue
        pts = verts[sel]
        median = np.median(pts, axis=0)
        s = (pts - median) @ e_s
        span_l = float(max(s.max(), 0.0))
        span_r = float(max(-s.min(), 0.0))
        samples.append(CenterlineSample(u=float(0.5 * (edges[j] + edges[j + 1])), point=median,
                                        span_left=span_l, span_right=span_r))
    if len(samples) < 2:
        raise DegenerateGeometryError("centerline collapsed to fewer than 2 slices")
    return samples, e_f, e_s


def project_onto_polyline(point: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Nearest point on a sampled polyline (segments between samples)."""
    best = polyline[0]
    best_d = math.inf
    for i in range(polyline.shape[0] - 1):
        a, b = polyline[i], polyline[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0.0 else float(np.clip((point - a) @ ab / denom, 0.0, 1.0))
        q = a + t * ab
        d = float(np.linalg.norm(point - q))
        if d < best_d:
            best, best_d = q, d
    return best


def extract_pose_3d(
    mesh: TriangleMesh,
    n_slices: int = 64,
    tip_window: int = 2,
    balance_threshold: float = 0.25,
) -> PoseSkeleton3D:
    """Extract the 3-D pose skeleton from a (radar-frame) mesh.

    The wing root is the centerline point at the slice of maximal lateral
    support; tips are the extreme lateral support points within +-tip_window
    slices of it, re-searched over a wider window when the two sides differ
    by more than ``balance_threshold`` of the longer one. Nose and tail are
    the centerline endpoints, the nose lying on the side with lower lateral
    span mass (tapered end). Callers that know the azimuth should relabel
    nose/tail and left/right in image space after projection.
    """
    samples, e_f, e_s = compute_centerline(mesh, n_slices=n_slices)
    verts = mesh.vertices
    t = verts @ e_f

    spans = np.array([s.span_left + s.span_right for s in samples])
    u_all = np.array([s.u for s in samples])
    # Flat-topped supports (box wings) give a plateau of maximal slices,
    # possibly sparse; take the member nearest the plateau's mean coordinate
    # rather than its leading edge.
    max_span = float(spans.max())
    plateau = np.flatnonzero(spans >= max_span - 1e-12 * max(1.0, abs(max_span)))
    u_center = float(u_all[plateau].mean())
    j_star = int(plateau[np.argmin(np.abs(u_all[plateau] - u_center))])
    polyline = np.stack([s.point for s in samples])
    # Initialize at the plateau's mean centerline point, then constrain onto
    # the centerline; for a single-slice maximum this is that slice's point.
    root_init = np.mean([samples[j].point for j in plateau], axis=0)
    root = project_onto_polyline(root_init, polyline)

    u_vals = np.array([s.u for s in samples])
    half_width = (u_vals.max() - u_vals.min()) / max(1, len(samples) - 1) * 0.5

    def tips_in_window(window: int, side: int) -> tuple[np.ndarray, float]:
        lo = u_vals[max(0, j_star - window)] - half_width
        hi = u_vals[min(len(samples) - 1, j_star + window)] + half_width
        sel = (t >= lo) & (t <= hi)
        pts = verts[sel]
        s = side * ((pts - root) @ e_s)
        s_max = float(s.max())
        # Ties along a flat tip contour resolve to the vertex nearest the
        # root's axial station, keeping mirrored wings symmetric.
        near = np.flatnonzero(s >= s_max - 1e-9 * max(1.0, abs(s_max)))
        axial = np.abs((pts[near] - root) @ e_f)
        k = int(near[np.argmin(axial)])
        return pts[k], s_max

    tip_plus, len_plus = tips_in_window(tip_window, +1)
    tip_minus, len_minus = tips_in_window(tip_window, -1)
    longest = max(len_plus, len_minus)
    if longest > 0 and abs(len_plus - len_minus) > balance_threshold * longest:
        if len_plus < len_minus:
            tip_plus, len_plus = tips_in_window(tip_window * 2, +1)
        else:
            tip_minus, len_minus = tips_in_window(tip_window * 2, -1)

    mass_lo = float(spans[:j_star].sum())
    mass_hi = float(spans[j_star + 1:].sum())
    first, last = samples[0].point, samples[-1].point
    if mass_lo <= mass_hi:
        nose, tail = first, last
    else:
        nose, tail = last, first

    return PoseSkeleton3D(
        nose=tuple(nose),
        tail=tuple(tail),
        wing_root=tuple(root),
        left_tip=tuple(tip_plus),   # +e_s side; image-space relabeling may swap
        right_tip=tuple(tip_minus),
    )

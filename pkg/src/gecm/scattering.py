"""Multi-bounce geometric-optics ray tracing with energy-recursive scoring,
image-plane aggregation, and relative-dB scatterer selection.

An orthographic ray bundle is launched along the frame's look vector from a
plane just outside the mesh. Every hit terminates one recorded path (so an
m-bounce ray contributes m paths); per bounce the energy is attenuated by a
Fresnel factor, a roughness exponential and a floored incidence cosine.
Per-facet sensor visibility (front-facing and unoccluded toward the sensor)
is realized implicitly by the ray casting itself: only such facets receive
first-bounce hits. Tracing is sequential in a fixed ray order, so results
are identical regardless of any outer parallelism.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bvh import Bvh, T_MIN, _traverse_any, _traverse_nearest, build_bvh
from .config import Config
from .errors import ZeroPathLengthError
from .geometry import RadarFrame, TriangleMesh
from .pointops import greedy_nms

ALIGN_EPS = 1e-12  # retro-reflection weights below this are zeroed outright


@dataclass(frozen=True)
class TraceConfig:
    """Tracer constants; see Config for the documented defaults."""

    max_bounces: int = 3
    roughness_m: float = 0.0015
    fresnel_power: float = 0.8
    cosine_floor: float = 0.05
    bounce_gain: float = 0.3
    align_power: float = 8.0
    rays_per_side: int = 256
    launch_margin: float = 0.05
    energy_floor: float = 1e-6

    def __post_init__(self):
        if self.max_bounces < 1:
            raise ValueError("max_bounces must be >= 1")
        if not 0.0 < self.fresnel_power <= 1.0:
            raise ValueError("fresnel_power must lie in (0, 1]")
        if not 0.0 < self.cosine_floor < 0.5:
            raise ValueError("cosine_floor must lie in (0, 0.5)")
        if self.bounce_gain < 0.0:
            raise ValueError("bounce_gain must be >= 0")
        if self.rays_per_side < 1:
            raise ValueError("rays_per_side must be >= 1")

    @classmethod
    def from_config(cls, cfg: Config, wavelength_m: float) -> "TraceConfig":
        roughness = cfg.roughness_m if cfg.roughness_m is not None else wavelength_m / 20.0
        return cls(
            max_bounces=cfg.max_bounces,
            roughness_m=roughness,
            fresnel_power=cfg.fresnel_power,
            cosine_floor=cfg.cosine_floor,
            bounce_gain=cfg.bounce_gain,
            align_power=cfg.align_power,
            rays_per_side=cfg.rays_per_side,
            launch_margin=cfg.launch_margin,
            energy_floor=cfg.energy_floor,
        )


@dataclass(frozen=True)
class RayPath:
    """One traced prefix path ending at a surface hit."""

    face_hits: tuple[int, ...]
    bounces: int
    energies: tuple[float, ...]   # E_0 .. E_m, E_0 = 1
    length_in: float              # [m] launch plane -> terminal along the path
    length_out: float             # [m] terminal -> launch plane along the exit direction
    align_weight: float           # retro-reflection weight in [0, 1]
    terminal: tuple[float, float, float]

    @property
    def energy(self) -> float:
        return self.energies[-1]


class PathBatch:
    """Column-store of traced paths (cheap to aggregate, indexable as RayPath)."""

    def __init__(self, terminals, energy, bounces, length_in, length_out, align, faces, energies):
        self.terminals = terminals    # (n, 3)
        self.energy = energy          # (n,) E_m
        self.bounces = bounces        # (n,)
        self.length_in = length_in    # (n,)
        self.length_out = length_out  # (n,)
        self.align = align            # (n,)
        self.faces = faces            # (n, M) original face ids, -1 padded
        self.energies = energies      # (n, M+1) E_0..E_m, NaN padded

    def __len__(self) -> int:
        return int(self.terminals.shape[0])

    def path(self, i: int) -> RayPath:
        m = int(self.bounces[i])
        return RayPath(
            face_hits=tuple(int(f) for f in self.faces[i, :m]),
            bounces=m,
            energies=tuple(float(e) for e in self.energies[i, : m + 1]),
            length_in=float(self.length_in[i]),
            length_out=float(self.length_out[i]),
            align_weight=float(self.align[i]),
            terminal=tuple(self.terminals[i]),
        )

    def __iter__(self):
        return (self.path(i) for i in range(len(self)))


@njit(cache=True)
def _trace_kernel(node_min, node_max, node_left, node_right, leaf_start, leaf_count,
                  ta, tb, tc, face_ids, normals,
                  kx, ky, kz, p0, e1, e2, half1, half2, n_side,
                  max_bounces, sigma_r, wavelength, gamma, c_min, align_p, e_floor,
                  out_term, out_e, out_m, out_lin, out_lout, out_align, out_faces, out_eseq):
    count = 0
    step1 = 2.0 * half1 / n_side
    step2 = 2.0 * half2 / n_side
    four_pi = 4.0 * math.pi
    for i in range(n_side):
        s1 = -half1 + (i + 0.5) * step1
        for j in range(n_side):
            s2 = -half2 + (j + 0.5) * step2
            ox = p0[0] + s1 * e1[0] + s2 * e2[0]
            oy = p0[1] + s1 * e1[1] + s2 * e2[1]
            oz = p0[2] + s1 * e1[2] + s2 * e2[2]
            dx, dy, dz = kx, ky, kz
            energy = 1.0
            path_len = 0.0
            for b in range(1, max_bounces + 1):
                t, f = _traverse_nearest(node_min, node_max, node_left, node_right,
                                         leaf_start, leaf_count, ta, tb, tc, face_ids,
                                         ox, oy, oz, dx, dy, dz, T_MIN)
                if f < 0:
                    break
                hx = ox + t * dx
                hy = oy + t * dy
                hz = oz + t * dz
                path_len += t
                nx = normals[f, 0]
                ny = normals[f, 1]
                nz = normals[f, 2]
                cos_inc = -(nx * dx + ny * dy + nz * dz)
                if cos_inc < 0.0:
                    nx = -nx
                    ny = -ny
                    nz = -nz
                    cos_inc = -cos_inc
                if cos_inc > 1.0:
                    cos_inc = 1.0
                rough = four_pi * sigma_r * cos_inc / wavelength
                refl_gain = gamma * math.exp(-rough * rough) * max(cos_inc, c_min)
                energy *= refl_gain
                if energy < e_floor:
                    break

                # Specular exit direction, renormalized for propagation stability.
                dot_dn = dx * nx + dy * ny + dz * nz
                rx = dx - 2.0 * dot_dn * nx
                ry = dy - 2.0 * dot_dn * ny
                rz = dz - 2.0 * dot_dn * nz
                rnorm = math.sqrt(rx * rx + ry * ry + rz * rz)
                rx /= rnorm
                ry /= rnorm
                rz /= rnorm

                cos_back = -(rx * kx + ry * ky + rz * kz)
                if cos_back > 1.0:
                    cos_back = 1.0
                w_align = cos_back ** align_p if cos_back > 0.0 else 0.0
                l_out = 0.0
                if cos_back > ALIGN_EPS:
                    h = (hx - p0[0]) * kx + (hy - p0[1]) * ky + (hz - p0[2]) * kz
                    l_out = h / cos_back
                if w_align > ALIGN_EPS:
                    if _traverse_any(node_min, node_max, node_left, node_right,
                                     leaf_start, leaf_count, ta, tb, tc,
                                     hx, hy, hz, rx, ry, rz, T_MIN, l_out):
                        w_align = 0.0  # return leg blocked toward the sensor
                else:
                    w_align = 0.0

                out_term[count, 0] = hx
                out_term[count, 1] = hy
                out_term[count, 2] = hz
                out_e[count] = energy
                out_m[count] = b
                out_lin[count] = path_len
                out_lout[count] = l_out
                out_align[count] = w_align
                out_faces[count, b - 1] = f
                # Row count-1 is this same ray's (b-1)-bounce path, so the
                # face/energy prefixes can be copied from it directly.
                if b > 1:
                    for q in range(b - 1):
                        out_faces[count, q] = out_faces[count - 1, q]
                    for q in range(b):
                        out_eseq[count, q] = out_eseq[count - 1, q]
                else:
                    out_eseq[count, 0] = 1.0
                out_eseq[count, b] = energy
                count += 1

                ox, oy, oz = hx, hy, hz
                dx, dy, dz = rx, ry, rz
    return count


def _launch_basis(look: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([0.0, 0.0, 1.0]) if abs(look[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, look)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(look, e1)
    return e1, e2


def trace(mesh: TriangleMesh, frame: RadarFrame, cfg: TraceConfig,
          wavelength_m: float | None = None, bvh: Bvh | None = None) -> PathBatch:
    """Trace the orthographic bundle through a radar-frame mesh.

    The mesh is expected pre-rotated by the frame; the bundle direction is
    the frame's look vector expressed in those rotated coordinates
    (rotation @ look), so the illumination of the original geometry is
    exactly the frame's look direction for every angle pair.

    ``wavelength_m`` only scales the roughness term and defaults to 20x the
    configured roughness so that the ratio matches the default convention.
    """
    if wavelength_m is None:
        wavelength_m = cfg.roughness_m * 20.0 if cfg.roughness_m > 0 else 0.03
    if bvh is None:
        bvh = build_bvh(mesh)
    look = np.asarray(frame.rotation, dtype=np.float64) @ np.asarray(frame.look, dtype=np.float64)
    look = look / np.linalg.norm(look)
    e1, e2 = _launch_basis(look)

    verts = mesh.vertices
    center = 0.5 * (verts.min(axis=0) + verts.max(axis=0))
    rel = verts - center
    proj1 = rel @ e1
    proj2 = rel @ e2
    projk = rel @ look
    half1 = float(max(proj1.max(), -proj1.min()))
    half2 = float(max(proj2.max(), -proj2.min()))
    half1 = (half1 if half1 > 0 else 1e-6) * (1.0 + cfg.launch_margin)
    half2 = (half2 if half2 > 0 else 1e-6) * (1.0 + cfg.launch_margin)
    diag = float(np.linalg.norm(verts.max(axis=0) - verts.min(axis=0)))
    standoff = float(-projk.min()) + 0.05 * diag + 1e-3
    p0 = center - standoff * look

    n = cfg.rays_per_side
    cap = n * n * cfg.max_bounces
    out_term = np.empty((cap, 3), np.float64)
    out_e = np.empty(cap, np.float64)
    out_m = np.empty(cap, np.int64)
    out_lin = np.empty(cap, np.float64)
    out_lout = np.empty(cap, np.float64)
    out_align = np.empty(cap, np.float64)
    out_faces = np.full((cap, cfg.max_bounces), -1, np.int64)
    out_eseq = np.full((cap, cfg.max_bounces + 1), np.nan, np.float64)

    count = _trace_kernel(
        bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
        bvh.leaf_start, bvh.leaf_count, bvh.tri_a, bvh.tri_b, bvh.tri_c, bvh.face_ids,
        np.ascontiguousarray(mesh.normals),
        float(look[0]), float(look[1]), float(look[2]),
        np.ascontiguousarray(p0), np.ascontiguousarray(e1), np.ascontiguousarray(e2),
        half1, half2, n,
        cfg.max_bounces, cfg.roughness_m, float(wavelength_m), cfg.fresnel_power,
        cfg.cosine_floor, cfg.align_power, cfg.energy_floor,
        out_term, out_e, out_m, out_lin, out_lout, out_align, out_faces, out_eseq,
    )
    sl = slice(0, count)
    return PathBatch(out_term[sl].copy(), out_e[sl].copy(), out_m[sl].copy(),
                     out_lin[sl].copy(), out_lout[sl].copy(), out_align[sl].copy(),
                     out_faces[sl].copy(), out_eseq[sl].copy())


def saliency(path: RayPath, cfg: TraceConfig) -> float:
    """Score of one path: energy x alignment x bounce gain / round-trip length squared."""
    total = path.length_in + path.length_out
    if total <= 0.0:
        raise ZeroPathLengthError("path has zero round-trip length")
    return path.energy * path.align_weight * (1.0 + cfg.bounce_gain * (path.bounces - 1)) / (total * total)


def saliencies(batch: PathBatch, cfg: TraceConfig) -> np.ndarray:
    total = batch.length_in + batch.length_out
    if np.any(total <= 0.0):
        raise ZeroPathLengthError("batch contains a zero-length path")
    gain = 1.0 + cfg.bounce_gain * (batch.bounces - 1.0)
    return batch.energy * batch.align * gain / (total * total)


@dataclass(frozen=True)
class BinGrid:
    """Image-plane aggregation grid: per-bin saliency mass and weighted centroid."""

    bin_size: float
    keys: np.ndarray       # (k, 2) int64 bin indices, lexicographically sorted
    weights: np.ndarray    # (k,) accumulated saliency, > 0
    centroids: np.ndarray  # (k, 2) saliency-weighted centroid, inside its bin

    def __len__(self) -> int:
        return int(self.keys.shape[0])


def aggregate(points: np.ndarray, weights: np.ndarray, bin_size: float) -> BinGrid:
    """Bin continuous image-plane points, accumulating saliency in path order."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    keep = w > 0.0
    pts, w = pts[keep], w[keep]
    if pts.shape[0] == 0:
        return BinGrid(float(bin_size), np.zeros((0, 2), np.int64), np.zeros(0), np.zeros((0, 2)))
    keys = np.floor(pts / float(bin_size)).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    mass = np.bincount(inverse, weights=w, minlength=uniq.shape[0])
    cx = np.bincount(inverse, weights=w * pts[:, 0], minlength=uniq.shape[0])
    cy = np.bincount(inverse, weights=w * pts[:, 1], minlength=uniq.shape[0])
    centroids = np.stack([cx / mass, cy / mass], axis=1)
    return BinGrid(float(bin_size), uniq, mass, centroids)


@dataclass(frozen=True)
class SelectedScatterers:
    """Output of thresholding + NMS + Top-K over a BinGrid."""

    points: np.ndarray    # (k, 2) continuous image-plane centroids
    weights: np.ndarray   # (k,) raw aggregated saliency
    weights_db: np.ndarray

    def __len__(self) -> int:
        return int(self.points.shape[0])


def select_scatterers(grid: BinGrid, threshold_db: float, nms_radius: float, top_k: int) -> SelectedScatterers:
    """Keep bins within threshold_db of the strongest, NMS them, cap at top_k."""
    empty = SelectedScatterers(np.zeros((0, 2)), np.zeros(0), np.zeros(0))
    if len(grid) == 0:
        return empty
    w_max = float(grid.weights.max())
    db = 10.0 * np.log10(grid.weights / w_max)
    keep = db >= threshold_db
    if not keep.any():
        return empty
    pts = grid.centroids[keep]
    w = grid.weights[keep]
    db = db[keep]
    keys = grid.keys[keep]
    # Descending weight; equal weights resolved by bin index order.
    tie = np.arange(pts.shape[0])  # keys are pre-sorted lexicographically
    order = np.lexsort((tie, -w))
    kept = greedy_nms(pts, nms_radius, order)[:top_k]
    return SelectedScatterers(points=pts[kept], weights=w[kept], weights_db=db[kept])


def dump_paths_jsonl(batch: PathBatch, fh) -> None:
    """Write one JSON object per path (bounces, energy, lengths, terminal)."""
    for i in range(len(batch)):
        rec = {
            "bounces": int(batch.bounces[i]),
            "energy": float(batch.energy[i]),
            "length_in": float(batch.length_in[i]),
            "length_out": float(batch.length_out[i]),
            "align_weight": float(batch.align[i]),
            "terminal": [float(v) for v in batch.terminals[i]],
            "faces": [int(f) for f in batch.faces[i] if f >= 0],
        }
        fh.write(json.dumps(rec) + "\n")

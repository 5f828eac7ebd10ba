"""SAR image to conditioning-map derivation.

From a normalized grayscale image this module extracts the dominant target
mask, estimates the five-point pose skeleton from an azimuth prior (PCA
fallback when the azimuth is unknown), and localizes strong scattering
centers by mask-gated peak detection followed by density clustering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .config import Config
from .core import Gecm, ImagingParams, PoseSkeleton2D, Provenance, Scatterer, ScattererSet
from .errors import (
    CollinearMaskError,
    DegenerateMaskError,
    EmptyImageError,
    NoForegroundError,
)
from .imageops import (
    binary_dilate_disc,
    binary_open_cross,
    clahe,
    connected_components,
    normalize,
    otsu_threshold,
    to_uint8,
)
from .pointops import dbscan, nms_by_score, quantile

__all__ = [
    "ScattererCandidates",
    "normalize",
    "extract_mask",
    "estimate_pose",
    "detect_scatterers",
    "cluster_scatterers",
    "derive_gecm",
]

WEIGHT_EPS = 1e-6  # added to peak scores when weighting cluster centroids


@dataclass(frozen=True)
class ScattererCandidates:
    """Peak candidates (x, y, score) plus the threshold that admitted them."""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))  # (n, 2) x, y
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    threshold: float = 0.0
    used_fallback: bool = False

    def __len__(self) -> int:
        return int(self.points.shape[0])


def extract_mask(image01: np.ndarray, center_penalty: float = 5.0, cfg: Config | None = None) -> np.ndarray:
    """Extract the dominant target mask from a normalized image.

    Pipeline: CLAHE -> Otsu -> morphological opening -> connected components
    -> pick the component maximizing area - penalty * distance(centroid,
    image center) -> dilate. Raises NoForegroundError when thresholding
    leaves nothing.
    """
    cfg = cfg or Config()
    img = np.asarray(image01, dtype=np.float64)
    if img.size == 0:
        raise EmptyImageError("empty image")
    enhanced = clahe(img, tiles=cfg.clahe_tiles, clip=cfg.clahe_clip)
    t = otsu_threshold(enhanced)
    fg = to_uint8(enhanced) > t
    if not fg.any() or fg.all():
        # fg.all() means the threshold separated nothing (constant image).
        raise NoForegroundError("Otsu produced no foreground/background split")
    opened = binary_open_cross(fg)
    if not opened.any():
        raise NoForegroundError("foreground vanished after opening")
    labels, count = connected_components(opened)
    h, w = img.shape
    center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    best_label, best_score = 0, -np.inf
    for lab in range(1, count + 1):
        ys, xs = np.nonzero(labels == lab)
        area = xs.size
        centroid = np.array([xs.mean(), ys.mean()])
        score = area - center_penalty * float(np.linalg.norm(centroid - center))
        if score > best_score:
            best_label, best_score = lab, score
    return binary_dilate_disc(labels == best_label)


def _pca_axis(points: np.ndarray) -> np.ndarray:
    """Major axis of a 2-D point set, sign fixed by the projection skewness."""
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / max(1, points.shape[0])
    eigvals, eigvecs = np.linalg.eigh(cov)
    axis = eigvecs[:, int(np.argmax(eigvals))]
    proj = centered @ axis
    skew = float(np.sum(proj**3))
    if skew < 0.0:
        axis = -axis
    elif skew == 0.0:
        if axis[0] < 0.0 or (axis[0] == 0.0 and axis[1] < 0.0):
            axis = -axis
    return axis


def estimate_pose(
    mask: np.ndarray,
    azimuth_deg: float | None = None,
    min_foreground: int = 10,
) -> PoseSkeleton2D:
    """Estimate the five-point pose skeleton of a binary target mask.

    The nose direction comes from the azimuth prior (image convention:
    0 deg points West, clockwise increase); without a prior the PCA major
    axis is used. Longitudinal extents are the 1st/99th quantiles of the
    axial projections; wing tips are the 98th side quantiles of the lateral
    projections inside a longitudinal band around the centroid. The left
    tip lies on the +d_l side, where d_l = (d_n.y, -d_n.x).
    """
    mask = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    if xs.size < min_foreground:
        raise DegenerateMaskError(f"only {xs.size} foreground pixels (< {min_foreground})")
    pts = np.stack([xs, ys], axis=1).astype(np.float64)
    c = pts.mean(axis=0)

    if azimuth_deg is None:
        d_n = _pca_axis(pts)
    else:
        a = math.radians(float(azimuth_deg))
        d_n = np.array([-math.cos(a), -math.sin(a)])
    d_l = np.array([d_n[1], -d_n[0]])

    rel = pts - c
    a_proj = rel @ d_n
    s_proj = rel @ d_l
    l_front = quantile(a_proj, 0.99)
    l_back = -quantile(a_proj, 0.01)
    nose = c + l_front * d_n
    tail = c - l_back * d_n

    band = (a_proj > -0.2 * l_back) & (a_proj < 0.3 * l_front)
    s_band = s_proj[band] if band.any() else s_proj
    if s_band.size == 0 or float(np.abs(s_band).max()) == 0.0:
        raise CollinearMaskError("no lateral extent inside the wing band")
    pos = s_band[s_band > 0]
    neg = -s_band[s_band < 0]
    len_left = quantile(pos, 0.98) if pos.size else 0.0
    len_right = quantile(neg, 0.98) if neg.size else 0.0
    left_tip = c + len_left * d_l
    right_tip = c - len_right * d_l

    h, w = mask.shape
    skeleton = PoseSkeleton2D(
        nose=tuple(nose), tail=tuple(tail), wing_root=tuple(c),
        left_tip=tuple(left_tip), right_tip=tuple(right_tip),
    )
    return skeleton.clipped(w, h)


def detect_scatterers(image01: np.ndarray, mask: np.ndarray, cfg: Config | None = None) -> ScattererCandidates:
    """Locate strong-scatterer candidates by mask-gated local maxima.

    The normalized image is Gaussian-smoothed; peaks must dominate their
    3x3 neighborhood (within ``peak_delta``), exceed the 90th intensity
    quantile inside the mask, and lie on the mask. If nothing qualifies, a
    global 97th-quantile fallback over the whole image fires (without mask
    gating). Survivors are ranked by intensity (ties by (y, x)) and thinned
    by distance-constrained NMS.
    """
    cfg = cfg or Config()
    img = np.asarray(image01, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    smoothed = ndimage.gaussian_filter(img, sigma=cfg.smooth_sigma)
    local_max = smoothed >= ndimage.maximum_filter(smoothed, size=3) - cfg.peak_delta

    used_fallback = False
    if mask.any():
        tau = quantile(smoothed[mask], 0.90)
    else:
        tau = math.inf
    keep = local_max & (smoothed >= tau) & mask
    if not keep.any():
        used_fallback = True
        tau = quantile(smoothed.ravel(), 0.97)
        keep = local_max & (smoothed >= tau)
    if not keep.any():
        return ScattererCandidates(threshold=float(tau), used_fallback=used_fallback)

    ys, xs = np.nonzero(keep)
    pts = np.stack([xs, ys], axis=1).astype(np.float64)
    scores = smoothed[ys, xs]
    tie = ys.astype(np.int64) * (img.shape[1] + 1) + xs.astype(np.int64)  # (y, x) lexicographic
    kept = nms_by_score(pts, scores, cfg.nms_radius, tiebreak=tie)
    return ScattererCandidates(
        points=pts[kept], scores=scores[kept], threshold=float(tau), used_fallback=used_fallback
    )


def cluster_scatterers(cands: ScattererCandidates, cfg: Config | None = None) -> ScattererSet:
    """Consolidate peak candidates into at most K scattering centers.

    DBSCAN groups candidates spatially; each cluster contributes its
    intensity-weighted centroid (weights score + 1e-6) with the cluster's
    maximum score. Without any valid cluster the NMS-selected candidates
    pass through unchanged. Up to ``noise_keep`` highest-score noise points
    are retained, a final NMS enforces spacing, the list is capped at K and
    intensities are rescaled to [0, 1] by the maximum retained score.
    """
    cfg = cfg or Config()
    if len(cands) == 0:
        return ScattererSet()
    labels = dbscan(cands.points, cfg.dbscan_eps, cfg.dbscan_min_samples)

    centers: list[tuple[float, float, float]] = []
    n_clusters = labels.max() + 1 if labels.size else 0
    for k in range(n_clusters):
        sel = labels == k
        w = cands.scores[sel] + WEIGHT_EPS
        cx = float(np.sum(w * cands.points[sel, 0]) / np.sum(w))
        cy = float(np.sum(w * cands.points[sel, 1]) / np.sum(w))
        centers.append((cx, cy, float(cands.scores[sel].max())))

    if not centers:
        centers = [(float(x), float(y), float(s)) for (x, y), s in zip(cands.points, cands.scores)]
    else:
        noise_idx = np.flatnonzero(labels == -1)
        if noise_idx.size:
            order = np.lexsort((noise_idx, -cands.scores[noise_idx]))
            for idx in noise_idx[order[: cfg.noise_keep]]:
                centers.append(
                    (float(cands.points[idx, 0]), float(cands.points[idx, 1]), float(cands.scores[idx]))
                )

    pts = np.array([(x, y) for x, y, _ in centers], dtype=np.float64)
    scores = np.array([s for _, _, s in centers], dtype=np.float64)
    kept = nms_by_score(pts, scores, cfg.nms_radius)
    kept = kept[: cfg.max_scatterers]
    top = float(scores[kept].max()) if kept.size else 0.0
    scale = 1.0 / top if top > 0.0 else 0.0
    return ScattererSet(
        tuple(
            Scatterer(float(pts[i, 0]), float(pts[i, 1]), float(scores[i] * scale)) for i in kept
        )
    )


def derive_gecm(image: np.ndarray, params: ImagingParams, cfg: Config | None = None) -> Gecm:
    """Run the full image-side pipeline and assemble the conditioning map."""
    cfg = cfg or Config()
    norm = normalize(image, high_dynamic_range=cfg.hdr_log)
    mask = extract_mask(norm, center_penalty=cfg.center_penalty, cfg=cfg)
    skeleton = estimate_pose(mask, azimuth_deg=params.azimuth_deg, min_foreground=cfg.min_foreground)
    cands = detect_scatterers(norm, mask, cfg=cfg)
    scatterers = cluster_scatterers(cands, cfg=cfg)
    h, w = norm.shape
    return Gecm(
        skeleton=skeleton,
        scatterers=scatterers,
        canvas_height=int(h),
        canvas_width=int(w),
        provenance=Provenance.DERIVED_FROM_IMAGE,
    )

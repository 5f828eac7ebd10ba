"""Image-plane projection, rasterization, and conditioning-map rendering.

Projection convention
---------------------
A radar-frame point (x', y', z') maps to continuous image-plane coordinates

    image x = (y' cos(dep) - z' sin(dep)) / resolution   (slant-range)
    image y = x' / resolution                            (cross-range)

i.e. an orthographic slant-plane projection scaled to pixels of the
configured resolution. With the frame rotation applied first, a target
whose nose points along -y in its own frame appears with the nose toward
(-cos(az), -sin(az)) in image coordinates, matching the azimuth convention
of the image-derivation side. Canvas fitting centers the projected
footprint; an extra shrink factor is applied only when the footprint would
not fit inside the configured margin.

Rendering uses integer Bresenham lines and integer disc fills only, so a
given map renders to byte-identical pixels on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .config import Config
from .core import (
    Gecm,
    ImagingParams,
    PALETTE,
    Palette,
    PoseSkeleton2D,
    Provenance,
    Scatterer,
    ScattererSet,
)
from .errors import EmptySkeletonError
from .geometry import TriangleMesh, extract_pose_3d, radar_frame, transform_mesh
from .scattering import (
    SelectedScatterers,
    TraceConfig,
    aggregate,
    saliencies,
    select_scatterers,
    trace,
)


def project_point(point: np.ndarray, params: ImagingParams) -> tuple[float, float]:
    """Continuous image-plane projection of one radar-frame point."""
    b = math.radians(params.depression_deg)
    x, y, z = float(point[0]), float(point[1]), float(point[2])
    g = params.resolution_m_per_px
    return ((y * math.cos(b) - z * math.sin(b)) / g, x / g)


def project_points(points: np.ndarray, params: ImagingParams) -> np.ndarray:
    """Vectorized projection: (n, 3) radar-frame -> (n, 2) image-plane."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    b = math.radians(params.depression_deg)
    g = params.resolution_m_per_px
    out = np.empty((pts.shape[0], 2), np.float64)
    out[:, 0] = (pts[:, 1] * math.cos(b) - pts[:, 2] * math.sin(b)) / g
    out[:, 1] = pts[:, 0] / g
    return out


@dataclass(frozen=True)
class Projector:
    """Continuous projection plus canvas fitting for one viewpoint."""

    params: ImagingParams
    canvas_height: int
    canvas_width: int
    offset: tuple[float, float]
    fit_scale: float = 1.0

    @classmethod
    def fit(
        cls,
        params: ImagingParams,
        radar_frame_points: np.ndarray,
        canvas_height: int,
        canvas_width: int,
        margin: float = 0.10,
    ) -> "Projector":
        """Fit the canvas transform to a radar-frame point cloud.

        The projected footprint's bounding box is centered on the canvas.
        When the footprint exceeds the canvas minus its margin, a uniform
        shrink is applied (recorded in ``fit_scale``).
        """
        q = project_points(radar_frame_points, params)
        lo = q.min(axis=0)
        hi = q.max(axis=0)
        span = hi - lo
        usable = np.array([canvas_width, canvas_height], np.float64) * (1.0 - 2.0 * margin)
        scale = 1.0
        with np.errstate(divide="ignore"):
            ratios = np.where(span > 0, usable / np.maximum(span, 1e-300), np.inf)
        worst = float(min(ratios[0], ratios[1]))
        if worst < 1.0:
            scale = worst
        center = 0.5 * (lo + hi) * scale
        offset = (canvas_width / 2.0 - center[0], canvas_height / 2.0 - center[1])
        return cls(params, canvas_height, canvas_width, offset, scale)

    def project(self, point: np.ndarray) -> tuple[float, float]:
        return project_point(point, self.params)

    def rasterize(self, q: tuple[float, float]) -> tuple[int, int]:
        """Continuous image-plane point -> integer pixel, clipped to canvas."""
        px = int(math.floor(self.offset[0] + self.fit_scale * q[0]))
        py = int(math.floor(self.offset[1] + self.fit_scale * q[1]))
        return (
            min(max(px, 0), self.canvas_width - 1),
            min(max(py, 0), self.canvas_height - 1),
        )

    def in_bounds(self, q: tuple[float, float]) -> bool:
        px = math.floor(self.offset[0] + self.fit_scale * q[0])
        py = math.floor(self.offset[1] + self.fit_scale * q[1])
        return 0 <= px < self.canvas_width and 0 <= py < self.canvas_height

    def to_dict(self) -> dict:
        return {
            "canvas_height": self.canvas_height,
            "canvas_width": self.canvas_width,
            "offset_x": self.offset[0],
            "offset_y": self.offset[1],
            "fit_scale": self.fit_scale,
        }


# ------------------------------------------------------------------
# Integer drawing primitives
# ------------------------------------------------------------------

def _anchor(v: float) -> int:
    return int(math.floor(v + 0.5))


def _stamp_block(img: np.ndarray, x: int, y: int, width: int, color) -> None:
    h, w = img.shape[:2]
    for dy in range(width):
        yy = y + dy
        if 0 <= yy < h:
            for dx in range(width):
                xx = x + dx
                if 0 <= xx < w:
                    img[yy, xx] = color


def draw_line(img: np.ndarray, p0: tuple[float, float], p1: tuple[float, float],
              color, width: int = 1) -> None:
    """Bresenham line; each visited pixel stamps a width x width block."""
    x0, y0 = _anchor(p0[0]), _anchor(p0[1])
    x1, y1 = _anchor(p1[0]), _anchor(p1[1])
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        _stamp_block(img, x0, y0, width, color)
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def draw_disc(img: np.ndarray, center: tuple[float, float], radius: int, color) -> None:
    """Filled integer disc: pixels with dx^2 + dy^2 <= r^2."""
    cx, cy = _anchor(center[0]), _anchor(center[1])
    h, w = img.shape[:2]
    r2 = radius * radius
    for dy in range(-radius, radius + 1):
        yy = cy + dy
        if not 0 <= yy < h:
            continue
        for dx in range(-radius, radius + 1):
            if dx * dx + dy * dy <= r2:
                xx = cx + dx
                if 0 <= xx < w:
                    img[yy, xx] = color


def scatterer_intensity(weight: float, weight_max: float, kappa: float) -> float:
    """Log-scaled rendering intensity in [0, 1]; exactly 1 at the maximum."""
    if weight_max <= 0.0 or weight <= 0.0:
        return 0.0
    return math.log1p(kappa * weight) / math.log1p(kappa * weight_max)


def render_gecm(
    skeleton: PoseSkeleton2D,
    scatterers: ScattererSet,
    canvas_height: int,
    canvas_width: int,
    palette: Palette = PALETTE,
    kappa: float = 100.0,
) -> np.ndarray:
    """Draw a conditioning map onto a black canvas.

    Draw order is fixed: fuselage line, wing segments, wing-root connector,
    nose/tail markers, then scatterer discs (brightest last) on top.
    """
    if skeleton is None:
        raise EmptySkeletonError("cannot render without a pose skeleton")
    img = np.zeros((canvas_height, canvas_width, 3), dtype=np.uint8)

    draw_line(img, skeleton.nose, skeleton.tail, palette.fuselage, palette.line_width)
    draw_line(img, skeleton.wing_root, skeleton.left_tip, palette.left_wing, palette.line_width)
    draw_line(img, skeleton.wing_root, skeleton.right_tip, palette.right_wing, palette.line_width)
    draw_disc(img, skeleton.wing_root, palette.marker_radius, palette.wing_root)
    draw_disc(img, skeleton.nose, palette.marker_radius, palette.nose)
    draw_disc(img, skeleton.tail, palette.marker_radius, palette.tail)

    if len(scatterers):
        w_max = max(s.intensity for s in scatterers)
        order = sorted(range(len(scatterers.scatterers)),
                       key=lambda i: (scatterers.scatterers[i].intensity, i))
        for i in order:
            s = scatterers.scatterers[i]
            gray = palette.scatterer_gray(scatterer_intensity(s.intensity, w_max, kappa))
            draw_disc(img, (s.x, s.y), palette.scatterer_radius, gray)
    return img


# ------------------------------------------------------------------
# Full mesh-to-map pipeline
# ------------------------------------------------------------------

def _relabel_image_space(
    keypoints_px: dict[str, tuple[float, float]], azimuth_deg: float
) -> dict[str, tuple[float, float]]:
    """Orient nose/tail and left/right consistently with the azimuth prior."""
    a = math.radians(azimuth_deg)
    d_n = (-math.cos(a), -math.sin(a))
    d_l = (d_n[1], -d_n[0])
    out = dict(keypoints_px)
    nt = (out["nose"][0] - out["tail"][0], out["nose"][1] - out["tail"][1])
    if nt[0] * d_n[0] + nt[1] * d_n[1] < 0.0:
        out["nose"], out["tail"] = out["tail"], out["nose"]
    root = out["wing_root"]
    lproj = (out["left_tip"][0] - root[0]) * d_l[0] + (out["left_tip"][1] - root[1]) * d_l[1]
    rproj = (out["right_tip"][0] - root[0]) * d_l[0] + (out["right_tip"][1] - root[1]) * d_l[1]
    if lproj < rproj:
        out["left_tip"], out["right_tip"] = out["right_tip"], out["left_tip"]
    return out


def render_from_mesh(
    mesh: TriangleMesh,
    params: ImagingParams,
    cfg: Config | None = None,
    path_batch_out: list | None = None,
) -> tuple[Gecm, np.ndarray, dict]:
    """Render the conditioning map of a mesh under the given viewpoint.

    Returns (map record, H x W x 3 uint8 raster, sidecar dict). The sidecar
    records the parameters, the full effective configuration, the projected
    keypoints and the selected scatterers. ``path_batch_out``, when given,
    receives the traced PathBatch for debug dumps.
    """
    cfg = cfg or Config()
    frame = radar_frame(params)
    rframe_mesh = transform_mesh(mesh, frame)

    pose3d = extract_pose_3d(rframe_mesh)
    projector = Projector.fit(
        params, rframe_mesh.vertices, cfg.canvas_height, cfg.canvas_width, cfg.canvas_margin
    )
    keypoints_px = {
        name: tuple(float(c) for c in projector.rasterize(projector.project(np.array(p))))
        for name, p in pose3d.points().items()
    }
    keypoints_px = _relabel_image_space(keypoints_px, params.azimuth_deg)
    skeleton = PoseSkeleton2D(**keypoints_px).clipped(cfg.canvas_width, cfg.canvas_height)

    trace_cfg = TraceConfig.from_config(cfg, params.wavelength_m)
    batch = trace(rframe_mesh, frame, trace_cfg, wavelength_m=params.wavelength_m)
    if path_batch_out is not None:
        path_batch_out.append(batch)
    weights = saliencies(batch, trace_cfg) if len(batch) else np.zeros(0)
    if weights.size and weights.max() > 0.0:
        # Saliency units are arbitrary (standoff, ray density); normalizing by
        # the maximum keeps every downstream quantity scale-free.
        weights = weights / weights.max()
    q = project_points(batch.terminals, params) if len(batch) else np.zeros((0, 2))
    grid = aggregate(q, weights, cfg.bin_size_px)
    selected = select_scatterers(grid, cfg.threshold_db, cfg.select_nms_radius, cfg.select_top_k)

    scatterers, scat_records = _selected_to_set(selected, projector, cfg.log_scale_kappa)
    gecm = Gecm(
        skeleton=skeleton,
        scatterers=scatterers,
        canvas_height=cfg.canvas_height,
        canvas_width=cfg.canvas_width,
        provenance=Provenance.RENDERED_FROM_MESH,
    )
    raster = render_gecm(
        skeleton, scatterers, cfg.canvas_height, cfg.canvas_width, PALETTE, cfg.log_scale_kappa
    )
    sidecar = build_sidecar(
        gecm,
        params,
        cfg,
        projector=projector,
        scatterer_records=scat_records,
        extra={
            "n_paths": len(batch),
            "n_bins": len(grid),
            "n_selected": len(selected),
            "mesh_faces": mesh.n_faces,
            "mesh_dropped_degenerate": mesh.dropped_degenerate,
        },
    )
    return gecm, raster, sidecar


def _selected_to_set(
    selected: SelectedScatterers, projector: Projector, kappa: float
) -> tuple[ScattererSet, list[dict]]:
    """Rasterize selected scatterers directly from continuous coordinates."""
    records: list[dict] = []
    scats: list[Scatterer] = []
    if len(selected) == 0:
        return ScattererSet(), records
    w_max = float(selected.weights.max())
    for i in range(len(selected)):
        q = (float(selected.points[i, 0]), float(selected.points[i, 1]))
        px, py = projector.rasterize(q)
        norm = float(selected.weights[i] / w_max)
        scats.append(Scatterer(float(px), float(py), norm))
        records.append(
            {
                "x_px": px,
                "y_px": py,
                "weight": float(selected.weights[i]),
                "weight_db": float(selected.weights_db[i]),
                "intensity": scatterer_intensity(norm, 1.0, kappa),
            }
        )
    return ScattererSet(tuple(scats)), records


def build_sidecar(
    gecm: Gecm,
    params: ImagingParams,
    cfg: Config,
    projector: Projector | None = None,
    scatterer_records: list[dict] | None = None,
    extra: dict | None = None,
) -> dict:
    """Assemble the JSON-serializable sidecar for one conditioning map."""
    if scatterer_records is None:
        kappa = cfg.log_scale_kappa
        w_max = max((s.intensity for s in gecm.scatterers), default=0.0)
        scatterer_records = [
            {
                "x_px": s.x,
                "y_px": s.y,
                "weight": s.intensity,
                "weight_db": (10.0 * math.log10(s.intensity / w_max)
                              if w_max > 0 and s.intensity > 0 else None),
                "intensity": scatterer_intensity(s.intensity, w_max, kappa),
            }
            for s in gecm.scatterers
        ]
    sidecar = {
        "tool": "gecm",
        "version": __version__,
        "provenance": gecm.provenance.value,
        "params": params.to_dict(),
        "config": cfg.to_dict(),
        "canvas": {"height": gecm.canvas_height, "width": gecm.canvas_width},
        "keypoints_px": {k: [p[0], p[1]] for k, p in gecm.skeleton.points().items()},
        "scatterers": scatterer_records,
    }
    if projector is not None:
        sidecar["projector"] = projector.to_dict()
    if extra:
        sidecar.update(extra)
    return sidecar

"""Geometric-electromagnetic conditioning maps for SAR targets.

Two pipelines share one map representation and one palette: ``derive_gecm``
recovers pose and strong scatterers from a real SAR image, ``render_from_mesh``
produces the same kind of map from a CAD mesh under specified imaging
parameters via multi-bounce geometric-optics ray tracing.
"""

from ._version import __version__
from .config import CONFIG_ENV_VAR, Config, load_config
from .core import (
    Gecm,
    ImagingParams,
    PALETTE,
    Palette,
    Polarization,
    PoseSkeleton2D,
    PoseSkeleton3D,
    Provenance,
    Scatterer,
    ScattererSet,
    format_text_condition,
    validate_params,
)
from .derivation import (
    ScattererCandidates,
    cluster_scatterers,
    derive_gecm,
    detect_scatterers,
    estimate_pose,
    extract_mask,
    normalize,
)
from .geometry import (
    CenterlineSample,
    RadarFrame,
    TriangleMesh,
    extract_pose_3d,
    load_mesh,
    radar_frame,
    transform_mesh,
)
from .bvh import Bvh, build_bvh, intersect, intersect_brute, occluded
from .scattering import (
    BinGrid,
    PathBatch,
    RayPath,
    SelectedScatterers,
    TraceConfig,
    aggregate,
    dump_paths_jsonl,
    saliencies,
    saliency,
    select_scatterers,
    trace,
)
from .raster import (
    Projector,
    build_sidecar,
    project_point,
    project_points,
    render_from_mesh,
    render_gecm,
    scatterer_intensity,
)
from . import errors

__all__ = [
    "__version__",
    "CONFIG_ENV_VAR",
    "Config",
    "load_config",
    "Gecm",
    "ImagingParams",
    "PALETTE",
    "Palette",
    "Polarization",
    "PoseSkeleton2D",
    "PoseSkeleton3D",
    "Provenance",
    "Scatterer",
    "ScattererSet",
    "format_text_condition",
    "validate_params",
    "ScattererCandidates",
    "cluster_scatterers",
    "derive_gecm",
    "detect_scatterers",
    "estimate_pose",
    "extract_mask",
    "normalize",
    "CenterlineSample",
    "RadarFrame",
    "TriangleMesh",
    "extract_pose_3d",
    "load_mesh",
    "radar_frame",
    "transform_mesh",
    "Bvh",
    "build_bvh",
    "intersect",
    "intersect_brute",
    "occluded",
    "BinGrid",
    "PathBatch",
    "RayPath",
    "SelectedScatterers",
    "TraceConfig",
    "aggregate",
    "dump_paths_jsonl",
    "saliencies",
    "saliency",
    "select_scatterers",
    "trace",
    "Projector",
    "build_sidecar",
    "project_point",
    "project_points",
    "render_from_mesh",
    "render_gecm",
    "scatterer_intensity",
    "errors",
]

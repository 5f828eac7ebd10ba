"""In-process bindings over the two conditioning-map pipelines.

Downstream training stacks call ``py_derive_gecm`` / ``py_render_gecm`` and
receive the raster as an H x W x 3 uint8 numpy array plus plain-record
metadata, byte-identical to what the command-line tools write for the same
inputs (both run the same core code). Only the two entry points plus
version/config introspection are exposed; errors surface as GecmBindingError
carrying the core error code.

The heavy kernels inside the core release the interpreter lock, so calls
may run concurrently from multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gecm import Config, derive_gecm, load_mesh, render_from_mesh, render_gecm
from gecm import __version__ as core_version
from gecm.core import Gecm
from gecm.errors import GecmError

__version__ = "0.1.0"

__all__ = [
    "GecmBindingError",
    "GecmResult",
    "py_derive_gecm",
    "py_render_gecm",
    "version",
    "default_config",
]


class GecmBindingError(Exception):
    """Wraps a core failure; ``code`` is the stable core error code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class GecmResult:
    """One conditioning map as in-memory arrays and records."""

    raster: np.ndarray                      # (H, W, 3) uint8
    keypoints: dict[str, tuple[float, float]]
    scatterers: list[tuple[float, float, float]]  # (x, y, intensity)
    params: dict
    provenance: str
    sidecar: dict = field(repr=False, default_factory=dict)


def version() -> dict:
    return {"bindings": __version__, "core": core_version}


def default_config() -> dict:
    return Config().to_dict()


def _make_config(config: dict | None) -> Config:
    try:
        return Config().replace(**(config or {}))
    except GecmError as exc:
        raise GecmBindingError(exc.code, str(exc)) from exc


def _result(gecm: Gecm, raster: np.ndarray, params, sidecar: dict) -> GecmResult:
    return GecmResult(
        raster=raster,
        keypoints={k: (p[0], p[1]) for k, p in gecm.skeleton.points().items()},
        scatterers=[(s.x, s.y, s.intensity) for s in gecm.scatterers],
        params=params.to_dict(),
        provenance=gecm.provenance.value,
        sidecar=sidecar,
    )


def py_derive_gecm(image: np.ndarray, params: dict, config: dict | None = None) -> GecmResult:
    """Derive a conditioning map from a 2-D intensity array.

    The array is consumed without copying when it is already float64 and
    C-contiguous. Output matches the ``gecm derive`` command byte for byte
    for the same pixel data and configuration.
    """
    from gecm import build_sidecar, validate_params

    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise GecmBindingError("EmptyImage", f"expected a 2-D array, got shape {arr.shape}")
    cfg = _make_config(config)
    try:
        validated = validate_params(params)
        gecm = derive_gecm(arr, validated, cfg)
        raster = render_gecm(
            gecm.skeleton, gecm.scatterers, gecm.canvas_height, gecm.canvas_width,
            kappa=cfg.log_scale_kappa,
        )
        sidecar = build_sidecar(gecm, validated, cfg)
    except GecmError as exc:
        raise GecmBindingError(exc.code, str(exc)) from exc
    return _result(gecm, raster, validated, sidecar)


def py_render_gecm(mesh_path: str, params: dict, config: dict | None = None) -> GecmResult:
    """Render a conditioning map from a mesh file under given parameters.

    Output matches the ``gecm render`` command byte for byte for the same
    mesh, parameters, and configuration.
    """
    from gecm import validate_params

    cfg = _make_config(config)
    try:
        validated = validate_params(params)
        mesh = load_mesh(mesh_path)
        gecm, raster, sidecar = render_from_mesh(mesh, validated, cfg)
    except FileNotFoundError as exc:
        raise GecmBindingError("FileNotFound", str(exc)) from exc
    except GecmError as exc:
        raise GecmBindingError(exc.code, str(exc)) from exc
    return _result(gecm, raster, validated, sidecar)

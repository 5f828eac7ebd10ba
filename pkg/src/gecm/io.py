"""File I/O: raster input (8/16-bit PNG, luma conversion), PNG output, JSON."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

# ITU-R BT.601 luma weights for multi-channel input.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def load_gray_image(path: str | Path) -> tuple[np.ndarray, int]:
    """Load a raster as float64 grayscale; returns (array, source bit depth)."""
    with Image.open(path) as im:
        mode = im.mode
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[..., :3].astype(np.float64) @ LUMA_WEIGHTS
        depth = 8
    else:
        depth = 16 if mode in ("I", "I;16", "I;16B", "I;16L") or arr.dtype.itemsize > 1 else 8
        arr = arr.astype(np.float64)
    return arr, depth


def save_png_rgb(path: str | Path, raster: np.ndarray) -> None:
    """Write an H x W x 3 uint8 raster as PNG (no ancillary chunks)."""
    arr = np.ascontiguousarray(raster, dtype=np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))

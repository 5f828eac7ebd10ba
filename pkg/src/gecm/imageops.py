"""Low-level raster operations for the image-derivation pipeline.

Contrast-limited adaptive histogram equalization, Otsu thresholding and the
binary morphology structuring elements are implemented directly so the
whole derivation path stays bit-reproducible across platforms.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import EmptyImageError

EPS_NORM = 1e-8

# 3x3 cross for opening, radius-2 disc (5x5) for dilation.
CROSS_3 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_yy, _xx = np.mgrid[-2:3, -2:3]
DISC_5 = (_yy * _yy + _xx * _xx) <= 4
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def normalize(image: np.ndarray, high_dynamic_range: bool = False) -> np.ndarray:
    """Min-max normalize a grayscale image into [0, 1].

    With ``high_dynamic_range`` a log(1+I) compression is applied first.
    A constant image maps to all zeros (the epsilon in the denominator
    dominates).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise EmptyImageError("cannot normalize an empty image")
    if high_dynamic_range:
        img = np.log1p(img)
    lo = float(img.min())
    hi = float(img.max())
    return (img - lo) / (hi - lo + EPS_NORM)


def to_uint8(image01: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image01, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def _clip_histogram(hist: np.ndarray, limit: int) -> np.ndarray:
    clipped = np.minimum(hist, limit)
    excess = int(hist.sum() - clipped.sum())
    clipped += excess // 256
    remainder = excess % 256
    if remainder:
        clipped[:remainder] += 1
    return clipped


def clahe(image01: np.ndarray, tiles: int = 8, clip: float = 2.0) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization on a [0, 1] image.

    The image is split into a tiles x tiles grid; each tile gets a clipped
    256-bin equalization LUT and pixels blend the four surrounding tile LUTs
    bilinearly by distance to the tile centers.
    """
    img = to_uint8(image01)
    h, w = img.shape
    tiles = max(1, int(tiles))
    th = (h + tiles - 1) // tiles
    tw = (w + tiles - 1) // tiles
    n_ty = (h + th - 1) // th
    n_tx = (w + tw - 1) // tw

    luts = np.zeros((n_ty, n_tx, 256), dtype=np.float64)
    centers_y = np.empty(n_ty)
    centers_x = np.empty(n_tx)
    for ty in range(n_ty):
        y0, y1 = ty * th, min((ty + 1) * th, h)
        centers_y[ty] = (y0 + y1 - 1) / 2.0
        for tx in range(n_tx):
            x0, x1 = tx * tw, min((tx + 1) * tw, w)
            if ty == 0:
                centers_x[tx] = (x0 + x1 - 1) / 2.0
            tile = img[y0:y1, x0:x1]
            n_pix = tile.size
            hist = np.bincount(tile.ravel(), minlength=256)
            limit = max(1, int(clip * n_pix / 256.0))
            hist = _clip_histogram(hist, limit)
            cdf = np.cumsum(hist)
            luts[ty, tx] = cdf * (255.0 / n_pix)

    yy = np.arange(h, dtype=np.float64)
    xx = np.arange(w, dtype=np.float64)
    # Fractional tile coordinates of every pixel relative to tile centers.
    fy = np.interp(yy, centers_y, np.arange(n_ty, dtype=np.float64))
    fx = np.interp(xx, centers_x, np.arange(n_tx, dtype=np.float64))
    y0i = np.clip(np.floor(fy).astype(np.int64), 0, n_ty - 1)
    x0i = np.clip(np.floor(fx).astype(np.int64), 0, n_tx - 1)
    y1i = np.minimum(y0i + 1, n_ty - 1)
    x1i = np.minimum(x0i + 1, n_tx - 1)
    wy = (fy - y0i)[:, None]
    wx = (fx - x0i)[None, :]

    vals = img[:, :]
    g00 = luts[y0i[:, None], x0i[None, :], vals]
    g01 = luts[y0i[:, None], x1i[None, :], vals]
    g10 = luts[y1i[:, None], x0i[None, :], vals]
    g11 = luts[y1i[:, None], x1i[None, :], vals]
    out = (1 - wy) * ((1 - wx) * g00 + wx * g01) + wy * ((1 - wx) * g10 + wx * g11)
    return np.clip(out, 0.0, 255.0) / 255.0


def otsu_threshold(image01: np.ndarray) -> int:
    """Otsu threshold index over 256 bins of a [0, 1] image.

    Returns t in [0, 255] maximizing the between-class variance with classes
    {v <= t} and {v > t}; ties resolve to the lowest t. Foreground is the
    bright class (v > t).
    """
    img = to_uint8(image01)
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    if total == 0:
        raise EmptyImageError("cannot threshold an empty image")
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    w1 = total - w0
    m0 = np.cumsum(hist * levels)
    mean_total = m0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (mean_total - m0) / w1
        var_between = w0 * w1 * (mu0 - mu1) ** 2
    var_between = np.nan_to_num(var_between, nan=-1.0, posinf=-1.0, neginf=-1.0)
    return int(np.argmax(var_between))


def binary_open_cross(mask: np.ndarray) -> np.ndarray:
    return ndimage.binary_opening(mask, structure=CROSS_3)


def binary_dilate_disc(mask: np.ndarray) -> np.ndarray:
    return ndimage.binary_dilation(mask, structure=DISC_5)


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labeling; labels 1..n, background 0."""
    labels, count = ndimage.label(mask, structure=EIGHT_CONNECTED)
    return labels, int(count)

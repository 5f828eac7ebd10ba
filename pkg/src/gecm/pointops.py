"""Deterministic point-set primitives shared by both pipelines.

The quantile follows the linear-interpolation convention between order
statistics. NMS is greedy in a caller-supplied priority order and keeps a
point only if it is at least ``radius`` away from everything already kept,
so the highest-priority input always survives. DBSCAN uses index-ordered
cluster discovery: clusters are numbered by their smallest core index and a
border point joins the earliest-numbered cluster among its core neighbors.
"""

from __future__ import annotations

import numpy as np


def quantile(values: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile of a 1-D sample."""
    return float(np.quantile(np.asarray(values, dtype=np.float64), q))


def greedy_nms(points: np.ndarray, radius: float, order: np.ndarray) -> np.ndarray:
    """Greedy suppression over ``points`` (n, 2) visited in ``order``.

    Returns the indices of surviving points, in visit order. A candidate
    survives iff its Euclidean distance to every survivor is >= radius.
    """
    pts = np.asarray(points, dtype=np.float64)
    kept: list[int] = []
    r2 = float(radius) * float(radius)
    for idx in order:
        p = pts[idx]
        ok = True
        for j in kept:
            d = pts[j] - p
            if d[0] * d[0] + d[1] * d[1] < r2:
                ok = False
                break
        if ok:
            kept.append(int(idx))
    return np.asarray(kept, dtype=np.int64)


def nms_by_score(
    points: np.ndarray, scores: np.ndarray, radius: float, tiebreak: np.ndarray | None = None
) -> np.ndarray:
    """NMS visiting points by descending score; ties resolved by ``tiebreak``.

    ``tiebreak`` must be an array of sortable keys (defaults to the input
    index), compared ascending among equal scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if tiebreak is None:
        tiebreak = np.arange(n)
    order = np.lexsort((np.asarray(tiebreak), -scores))
    return greedy_nms(points, radius, order)


def dbscan(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Density clustering of 2-D points; returns labels, noise = -1.

    A point is core when its eps-neighborhood (self included) holds at least
    ``min_samples`` points. Expansion is breadth-first with neighbor indices
    visited in ascending order, which makes labels reproducible.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels

    diff = pts[:, None, :] - pts[None, :, :]
    within = (diff[..., 0] ** 2 + diff[..., 1] ** 2) <= float(eps) ** 2
    neighbor_count = within.sum(axis=1)
    core = neighbor_count >= int(min_samples)

    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != -1:
            continue
        labels[seed] = cluster
        queue = [seed]
        while queue:
            i = queue.pop(0)
            if not core[i]:
                continue
            for j in np.flatnonzero(within[i]):
                if labels[j] == -1:
                    labels[j] = cluster
                    queue.append(int(j))
        cluster += 1
    return labels

"""Colour segmentation of the approximate mask and iterative region scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from dofseg.colorspace import LabImage
from dofseg.morphology import dilate

# 8-neighbourhood offsets, each undirected pair visited once
_HALF_OFFSETS = ((0, 1), (1, -1), (1, 0), (1, 1))
_OFFSETS = tuple((dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0))


def _shift_pairs(shape, dy, dx):
    """Flat index arrays (a, b) for every in-bounds pixel a and its neighbour b = a + (dy, dx)."""
    h, w = shape
    ys = slice(max(0, -dy), h - max(0, dy))
    xs = slice(max(0, -dx), w - max(0, dx))
    idx = np.arange(h * w).reshape(h, w)
    a = idx[ys, xs]
    b = idx[ys.start + dy : ys.stop + dy, xs.start + dx : xs.stop + dx]
    return a.ravel(), b.ravel()


def color_segment(img: LabImage, mask: np.ndarray, theta_dist: float = 25.0) -> np.ndarray:
    """Partition mask pixels into 8-connected regions of chained similar colour.

    Two neighbouring mask pixels are linked when their CIE76 distance is
    below ``theta_dist``; regions are the connected components of that
    graph, which is what growing from row-major seeds produces. Returns a
    label raster: -1 outside the mask, region ids 0..n-1 numbered by their
    first pixel in row-major order.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != img.shape:
        raise ValueError(f"dimension mismatch: {img.shape} vs {mask.shape}")
    if not 0 <= theta_dist <= 100:
        raise ValueError("theta_dist must lie in [0, 100]")
    h, w = mask.shape
    lab = img.lab.reshape(-1, 3)
    on = mask.ravel()
    rows, cols = [], []
    for dy, dx in _HALF_OFFSETS:
        a, b = _shift_pairs((h, w), dy, dx)
        keep = on[a] & on[b]
        a, b = a[keep], b[keep]
        d = lab[a] - lab[b]
        close = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2) < theta_dist
        rows.append(a[close])
        cols.append(b[close])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(h * w, h * w))
    _, comp = connected_components(graph, directed=False)

    labels = np.full(h * w, -1, dtype=np.int64)
    flat_on = np.flatnonzero(on)
    if len(flat_on):
        # components are numbered by their lowest flat index already when
        # scanned in order, but renumber explicitly to not rely on that
        _, first_pos, inverse = np.unique(comp[flat_on], return_index=True, return_inverse=True)
        rank = np.empty(len(first_pos), dtype=np.int64)
        rank[np.argsort(first_pos, kind="stable")] = np.arange(len(first_pos))
        labels[flat_on] = rank[inverse]
    return labels.reshape(h, w)


def outer_boundary(region: np.ndarray) -> np.ndarray:
    """Pixels of the 3x3 dilation of ``region`` that are not in it."""
    region = np.asarray(region, dtype=bool)
    return dilate(region, 3) & ~region


def score_region(region: np.ndarray, alive: np.ndarray, cluster_pixels: np.ndarray) -> tuple[float, float, float]:
    """Return (MBO, SBO, MR) of one region against the alive mask and cluster pixels."""
    boundary = outer_boundary(region)
    n = int(boundary.sum())
    if n == 0:
        return 1.0, 1.0, 1.0
    mbo = int((boundary & alive & ~region).sum()) / n
    sbo = int((boundary & cluster_pixels).sum()) / n
    return mbo, sbo, sbo * mbo


@dataclass
class RegionScoring:
    mask: np.ndarray
    alive: np.ndarray  # (n_regions,) bool, survivors
    sweeps: int
    mbo: np.ndarray = field(repr=False)
    sbo: np.ndarray = field(repr=False)
    mr: np.ndarray = field(repr=False)
    deleted_per_sweep: list[int] = field(default_factory=list)


def boundary_pairs(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique (region id, boundary pixel flat index) pairs for every region."""
    h, w = labels.shape
    flat = labels.ravel()
    keys = []
    for dy, dx in _OFFSETS:
        a, b = _shift_pairs((h, w), dy, dx)
        keep = (flat[a] >= 0) & (flat[b] != flat[a])
        keys.append(flat[a][keep] * (h * w) + b[keep])
    keys = np.unique(np.concatenate(keys))
    return keys // (h * w), keys % (h * w)


def region_scoring(labels: np.ndarray, cluster_pixels: np.ndarray, theta_rel: float = 2 / 3) -> RegionScoring:
    """Delete low-relevance regions sweep by sweep until nothing changes.

    Each sweep scores every surviving region against the survivors of the
    previous sweep and removes all regions with MR <= theta_rel at once.
    """
    if not 0 <= theta_rel <= 1:
        raise ValueError("theta_rel must lie in [0, 1]")
    labels = np.asarray(labels)
    n_regions = int(labels.max(initial=-1)) + 1
    region_of, pix = boundary_pairs(labels)
    flat = labels.ravel()
    n_boundary = np.bincount(region_of, minlength=n_regions)
    in_cluster = np.asarray(cluster_pixels, dtype=bool).ravel()[pix]
    sbo_hits = np.bincount(region_of, weights=in_cluster, minlength=n_regions)
    safe = np.maximum(n_boundary, 1)
    sbo = np.where(n_boundary > 0, sbo_hits / safe, 1.0)

    alive = np.ones(n_regions, dtype=bool)
    mbo = np.ones(n_regions)
    mr = np.ones(n_regions)
    sweeps = 0
    deleted: list[int] = []
    neighbor_label = flat[pix]
    while alive.any():
        sweeps += 1
        hit = (neighbor_label >= 0) & alive[np.maximum(neighbor_label, 0)]
        mbo_hits = np.bincount(region_of, weights=hit, minlength=n_regions)
        mbo = np.where(n_boundary > 0, mbo_hits / safe, 1.0)
        mr = sbo * mbo
        doomed = alive & (mr <= theta_rel)
        deleted.append(int(doomed.sum()))
        if not doomed.any():
            break
        alive &= ~doomed

    mask = np.zeros(labels.shape, dtype=bool)
    if n_regions:
        mask = (labels >= 0) & alive[np.maximum(labels, 0)]
    return RegionScoring(mask=mask, alive=alive, sweeps=sweeps, mbo=mbo, sbo=sbo, mr=mr, deleted_per_sweep=deleted)

"""Binary morphology, convex hull linking and the approximate OOI mask.

Masks are 2-D boolean arrays. Structuring elements are centred h x h
squares given by their side length. Translations that leave the image are
dropped for both dilation and erosion, so erosion only constrains a pixel
by the in-bounds part of its window; that keeps the pair adjoint (erosion
is exactly the dual of dilation and closing is a true closing).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from dofseg.clustering import RelevantClusters


def _check_side(side: int) -> int:
    side = int(side)
    if side < 1 or side % 2 == 0:
        raise ValueError(f"structuring element side must be odd and >= 1, got {side}")
    return side


def se_side(n_pixels: int, theta_rec: float) -> int:
    """Side of the closing element: sqrt(n) * theta_rec, nearest odd, at least 3."""
    x = math.sqrt(n_pixels) * theta_rec
    side = 2 * math.floor(x / 2) + 1
    if abs(side + 2 - x) < abs(x - side):
        side += 2
    return max(3, side)


def _window_any(mask: np.ndarray, radius: int, axis: int) -> np.ndarray:
    """True where any pixel within +-radius along ``axis`` is on (zero padding)."""
    if radius == 0:
        return mask.copy()
    counts = np.cumsum(mask, axis=axis, dtype=np.int64)
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 0)
    counts = np.pad(counts, pad)
    n = mask.shape[axis]
    hi = np.minimum(np.arange(n) + radius + 1, n)
    lo = np.maximum(np.arange(n) - radius, 0)
    return (np.take(counts, hi, axis=axis) - np.take(counts, lo, axis=axis)) > 0


def dilate(mask: np.ndarray, side: int = 3) -> np.ndarray:
    r = _check_side(side) // 2
    m = np.asarray(mask, dtype=bool)
    return _window_any(_window_any(m, r, 1), r, 0)


def erode(mask: np.ndarray, side: int = 3) -> np.ndarray:
    return ~dilate(~np.asarray(mask, dtype=bool), side)


def close(mask: np.ndarray, side: int = 3) -> np.ndarray:
    return erode(dilate(mask, side), side)


def open_(mask: np.ndarray, side: int = 3) -> np.ndarray:
    return dilate(erode(mask, side), side)


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def geodesic_dilate_1(marker: np.ndarray, mask: np.ndarray, side: int = 3) -> np.ndarray:
    _same_shape(marker, mask)
    return dilate(marker, side) & np.asarray(mask, dtype=bool)


def geodesic_erode_1(marker: np.ndarray, mask: np.ndarray, side: int = 3) -> np.ndarray:
    _same_shape(marker, mask)
    return erode(marker, side) | np.asarray(mask, dtype=bool)


def reconstruct_by_dilation_iterative(marker, mask, side: int = 3) -> tuple[np.ndarray, int]:
    """Literal fixpoint iteration of the geodesic dilation; returns (result, steps)."""
    marker = np.asarray(marker, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    _same_shape(marker, mask)
    if np.any(marker & ~mask):
        raise ValueError("marker must lie inside mask")
    current, steps = marker, 0
    while True:
        nxt = geodesic_dilate_1(current, mask, side)
        steps += 1
        if np.array_equal(nxt, current):
            return current, steps
        current = nxt


def reconstruct_by_dilation(marker, mask, side: int = 3) -> np.ndarray:
    """Union of the mask components (side-connectivity) that touch the marker."""
    marker = np.asarray(marker, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    _same_shape(marker, mask)
    if np.any(marker & ~mask):
        raise ValueError("marker must lie inside mask")
    side = _check_side(side)
    if side == 1:
        return marker.copy()
    if side != 3:
        return reconstruct_by_dilation_iterative(marker, mask, side)[0]
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    hit = np.unique(labels[marker])
    return np.isin(labels, hit[hit > 0])


def reconstruct_by_erosion(marker, mask, side: int = 3) -> np.ndarray:
    """Dual reconstruction; requires marker >= mask."""
    marker = np.asarray(marker, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    _same_shape(marker, mask)
    if np.any(mask & ~marker):
        raise ValueError("marker must contain mask")
    return ~reconstruct_by_dilation(~marker, ~mask, side)


def fill_holes(mask: np.ndarray, side: int = 3) -> np.ndarray:
    """Turn on every background pixel that cannot reach the image border."""
    m = np.asarray(mask, dtype=bool)
    background = ~m
    frame = np.zeros_like(m)
    frame[0, :] = frame[-1, :] = frame[:, 0] = frame[:, -1] = True
    outside = reconstruct_by_dilation(background & frame, background, side)
    return ~outside


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Counterclockwise hull vertices (monotone chain), collinear points dropped.

    Counterclockwise is with respect to the (first, second) coordinate axes.
    """
    pts = sorted({(p[0], p[1]) for p in np.asarray(points).tolist()})
    if not pts:
        raise ValueError("convex hull of an empty point set")
    if len(pts) <= 2:
        return np.array(pts, dtype=np.float64)

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=np.float64)


def _polygon_patch(v: np.ndarray, shape: tuple[int, int]):
    r0 = max(0, math.ceil(v[:, 0].min()))
    r1 = min(shape[0] - 1, math.floor(v[:, 0].max()))
    c0 = max(0, math.ceil(v[:, 1].min()))
    c1 = min(shape[1] - 1, math.floor(v[:, 1].max()))
    if r0 > r1 or c0 > c1:
        return None
    rr, cc = np.mgrid[r0 : r1 + 1, c0 : c1 + 1]
    return (slice(r0, r1 + 1), slice(c0, c1 + 1)), _inside_convex(v, rr, cc)


def rasterize_polygon(vertices: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Pixels whose centre lies inside or on a convex polygon of (row, col) vertices.

    Pixel (i, j) has its centre at (i, j). One- and two-vertex polygons
    rasterize to the point or segment they describe.
    """
    out = np.zeros(shape, dtype=bool)
    patch = _polygon_patch(np.asarray(vertices, dtype=np.float64).reshape(-1, 2), shape)
    if patch is not None:
        out[patch[0]] = patch[1]
    return out


def _inside_convex(v: np.ndarray, rr: np.ndarray, cc: np.ndarray) -> np.ndarray:
    tol = 1e-9
    if len(v) == 1:
        return (np.abs(rr - v[0, 0]) <= tol) & (np.abs(cc - v[0, 1]) <= tol)
    if len(v) == 2:
        a, b = v
        cross = (b[0] - a[0]) * (cc - a[1]) - (b[1] - a[1]) * (rr - a[0])
        dot = (rr - a[0]) * (b[0] - a[0]) + (cc - a[1]) * (b[1] - a[1])
        length2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
        return (np.abs(cross) <= tol) & (dot >= -tol) & (dot <= length2 + tol)
    inside = np.ones(rr.shape, dtype=bool)
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        inside &= (b[0] - a[0]) * (cc - a[1]) - (b[1] - a[1]) * (rr - a[0]) >= -tol
    return inside


def _chain(points: list[tuple[int, int]], keep_sign: int) -> list[tuple[int, int]]:
    """Monotone chain over points sorted by row: lower (+1) or upper (-1) envelope."""
    out: list[tuple[int, int]] = []
    for p in points:
        while len(out) >= 2 and keep_sign * _cross(out[-2], out[-1], p) <= 0:
            out.pop()
        out.append(p)
    return out


def _chain_bounds(chain: list[tuple[int, int]], upper: bool) -> list[tuple[int, int]]:
    """(row, column bound) along a chain: ceil for the left side, floor for the right."""
    out = [chain[0]]
    for (r0, c0), (r1, c1) in zip(chain, chain[1:]):
        span = r1 - r0
        for r in range(r0 + 1, r1 + 1):
            num = c0 * span + (r - r0) * (c1 - c0)
            out.append((r, num // span if upper else -((-num) // span)))
    return out


def _integer_row_extremes(points: np.ndarray, centers: np.ndarray, eps: float):
    """Per core and row offset, the leftmost/rightmost point within eps (or -1)."""
    radius = math.floor(eps)
    e2 = eps * eps
    offsets = np.arange(-radius, radius + 1)
    half = np.floor(np.sqrt(np.maximum(e2 - offsets.astype(np.float64) ** 2, 0))).astype(np.int64)
    # settle float rounding with the exact integer rule dx^2 + dy^2 <= eps^2
    half += ((half + 1) ** 2 + offsets**2 <= e2).astype(np.int64)
    half -= (half**2 + offsets**2 > e2).astype(np.int64)
    stride = int(points[:, 1].max() - points[:, 1].min()) + 2 * radius + 4
    shift = radius + 1 - int(points[:, 1].min())
    keys = points[:, 0] * stride + points[:, 1] + shift
    rows = centers[:, :1] + offsets[None, :]
    lo = rows * stride + centers[:, 1:] - half[None, :] + shift
    hi = rows * stride + centers[:, 1:] + half[None, :] + shift
    li = np.searchsorted(keys, lo, side="left")
    ri = np.searchsorted(keys, hi, side="right") - 1
    valid = ri >= li
    left = np.where(valid, points[np.minimum(li, len(points) - 1), 1], -1)
    right = np.where(valid, points[np.maximum(ri, 0), 1], -1)
    return rows, left, right, valid


def hull_union(rel: RelevantClusters, shape: tuple[int, int]) -> np.ndarray:
    """Union of the filled hulls of every retained core point's eps-neighbourhood."""
    cs = rel.clusters
    pts = cs.points
    if not len(rel.core_indices):
        return np.zeros(shape, dtype=bool)
    if not np.array_equal(pts, np.round(pts)):
        out = np.zeros(shape, dtype=bool)
        for k in rel.core_indices:
            patch = _polygon_patch(convex_hull(pts[cs.neighborhood(k)]), shape)
            if patch is not None:
                out[patch[0]] |= patch[1]
        return out

    ipts = pts.astype(np.int64)
    rows, left, right, valid = _integer_row_extremes(ipts, ipts[rel.core_indices], cs.eps)
    span_r: list[int] = []
    span_a: list[int] = []
    span_b: list[int] = []
    for rr, ll, rt, ok in zip(rows.tolist(), left.tolist(), right.tolist(), valid.tolist()):
        lpts = [(r, c) for r, c, v in zip(rr, ll, ok) if v]
        rpts = [(r, c) for r, c, v in zip(rr, rt, ok) if v]
        lb = _chain_bounds(_chain(lpts, 1), upper=False)
        rb = _chain_bounds(_chain(rpts, -1), upper=True)
        for (r, a), (_, b) in zip(lb, rb):
            if a <= b:
                span_r.append(r)
                span_a.append(a)
                span_b.append(b)
    return paint_spans(shape, np.array(span_r), np.array(span_a), np.array(span_b))


def paint_spans(shape: tuple[int, int], rows: np.ndarray, start: np.ndarray, stop: np.ndarray) -> np.ndarray:
    """Union of inclusive horizontal pixel runs, clipped to the raster."""
    h, w = shape
    out = np.zeros(shape, dtype=bool)
    if not len(rows):
        return out
    start = np.maximum(start, 0)
    stop = np.minimum(stop, w - 1)
    keep = (rows >= 0) & (rows < h) & (start <= stop)
    rows, start, stop = rows[keep], start[keep], stop[keep]
    diff = np.zeros((h, w + 1), dtype=np.int64)
    np.add.at(diff, (rows, start), 1)
    np.add.at(diff, (rows, stop + 1), -1)
    return np.cumsum(diff, axis=1)[:, :w] > 0


def build_approximate_mask(
    rel: RelevantClusters, shape: tuple[int, int], theta_rec: float = 1 / 3
) -> tuple[np.ndarray, np.ndarray]:
    """Return (linked hull mask, smoothed approximate mask)."""
    linked = hull_union(rel, shape)
    side = se_side(shape[0] * shape[1], theta_rec)
    return linked, fill_holes(close(linked, side))

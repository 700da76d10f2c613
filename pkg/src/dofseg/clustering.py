"""Density clustering of score-map candidates.

DBSCAN is run on pixel coordinates. Points are processed in row-major
order, which makes cluster ids and border-point assignment reproducible:
cluster ids follow the order of each cluster's first core point, and a
border point reachable from several clusters joins the lowest id, exactly
as a sequential scan would assign it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

NOISE = -1
MIN_PTS_FLOOR = 4


class NoClustersError(RuntimeError):
    """No focus region found: clustering produced no cluster."""


@dataclass
class ClusterSet:
    points: np.ndarray  # (n, 2) float/int coordinates, row-major sorted
    labels: np.ndarray  # (n,) cluster id or NOISE
    core: np.ndarray  # (n,) bool
    eps: float
    min_pts: int
    neighbors: csr_matrix = field(repr=False)  # eps-graph incl. self loops

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max(initial=NOISE) + 1)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.n_clusters)

    def members(self, cluster_id: int) -> np.ndarray:
        return self.points[self.labels == cluster_id]

    def neighborhood(self, index: int) -> np.ndarray:
        """Indices of all points within eps of point ``index`` (itself included)."""
        start, stop = self.neighbors.indptr[index], self.neighbors.indptr[index + 1]
        return self.neighbors.indices[start:stop]


@dataclass
class RelevantClusters:
    cluster_ids: list[int]
    core_indices: np.ndarray  # indices into ClusterSet.points
    max_size: int
    clusters: ClusterSet = field(repr=False)

    def member_mask(self, shape: tuple[int, int]) -> np.ndarray:
        """Boolean raster of every pixel that belongs to a retained cluster."""
        out = np.zeros(shape, dtype=bool)
        keep = np.isin(self.clusters.labels, self.cluster_ids)
        pts = self.clusters.points[keep].astype(np.intp)
        out[pts[:, 0], pts[:, 1]] = True
        return out


def auto_params(
    score_map: np.ndarray, theta_eps: float = 1 / 40, theta_dbscan: float = 255.0
) -> tuple[float, int]:
    """Derive (eps, min_pts) from the image size and its score mass."""
    n_pixels = score_map.size
    if n_pixels == 0:
        raise ValueError("score map is empty")
    eps = math.sqrt(n_pixels) * theta_eps
    mass = float(np.minimum(score_map[score_map > 0] / theta_dbscan, 1.0).sum())
    min_pts = math.floor((eps + 1) ** 2 / n_pixels * mass)
    return eps, max(min_pts, MIN_PTS_FLOOR)


def eps_graph(points: np.ndarray, eps: float) -> csr_matrix:
    """Symmetric adjacency of all pairs with squared distance <= eps^2, self loops included."""
    n = len(points)
    pts = np.asarray(points, dtype=np.float64)
    if n == 0:
        return csr_matrix((0, 0), dtype=bool)
    # widen the tree query slightly, then decide membership with one exact rule
    pairs = cKDTree(pts).query_pairs(eps * (1 + 1e-9) + 1e-12, output_type="ndarray")
    if len(pairs):
        d = pts[pairs[:, 0]] - pts[pairs[:, 1]]
        pairs = pairs[d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] <= eps * eps]
    idx = np.arange(n)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1], idx])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0], idx])
    graph = csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(n, n))
    graph.sort_indices()
    return graph


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> ClusterSet:
    """Cluster 2-D points; returns them re-ordered row-major with labels."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = np.asarray(points).reshape(-1, 2)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    n = len(pts)

    graph = eps_graph(pts, eps)
    counts = np.diff(graph.indptr)
    core = counts >= min_pts
    labels = np.full(n, NOISE, dtype=np.int64)

    core_idx = np.flatnonzero(core)
    if len(core_idx):
        sub = graph[core_idx][:, core_idx]
        _, comp = connected_components(sub, directed=False)
        # number components by their first (row-major) core point
        first = np.full(comp.max() + 1, n, dtype=np.int64)
        np.minimum.at(first, comp, core_idx)
        rank = np.empty_like(first)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        labels[core_idx] = rank[comp]

        # border points: lowest cluster id among neighbouring core points
        coo = graph[~core][:, core_idx].tocoo()
        if coo.nnz:
            border_idx = np.flatnonzero(~core)
            best = np.full(len(border_idx), np.iinfo(np.int64).max)
            np.minimum.at(best, coo.row, labels[core_idx][coo.col])
            hit = best != np.iinfo(np.int64).max
            labels[border_idx[hit]] = best[hit]

    return ClusterSet(points=pts, labels=labels, core=core, eps=eps, min_pts=min_pts, neighbors=graph)


def relevant_clusters(cs: ClusterSet) -> RelevantClusters:
    """Keep clusters holding at least half as many points as the largest one."""
    sizes = cs.cluster_sizes()
    if len(sizes) == 0:
        raise NoClustersError("no focus region found")
    max_size = int(sizes.max())
    keep = [int(i) for i in np.flatnonzero(2 * sizes >= max_size)]
    core_idx = np.flatnonzero(cs.core & np.isin(cs.labels, keep))
    return RelevantClusters(cluster_ids=keep, core_indices=core_idx, max_size=max_size, clusters=cs)

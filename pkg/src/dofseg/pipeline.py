"""End-to-end segmentation: score, cluster, approximate, segment, refine."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from PIL import Image

from dofseg import clustering, morphology, regions, scoring
from dofseg.colorspace import LabImage

log = logging.getLogger(__name__)

NO_CANDIDATES = "no_candidates"
NO_CLUSTERS = "no_clusters"


@dataclass(frozen=True)
class PipelineParams:
    theta_score: float = 50.0
    theta_eps: float = 1 / 40
    sigma: float = 0.9
    theta_dist: float = 25.0
    theta_rec: float = 1 / 3
    theta_rel: float = 2 / 3
    theta_dbscan: float = 255.0
    working_size: int = 400
    r: int = 1
    # pixels that count as "score" support in region scoring: the filled
    # hulls of the retained clusters, or only their member pixels
    sbo_support: str = "hull"

    def __post_init__(self):
        checks = [
            (self.sbo_support in ("hull", "members"), "sbo_support must be 'hull' or 'members'"),
            (0 <= self.theta_score <= 255, "theta_score must lie in [0, 255]"),
            (0 < self.theta_eps <= 1, "theta_eps must lie in (0, 1]"),
            (self.sigma > 0, "sigma must be > 0"),
            (0 <= self.theta_dist <= 100, "theta_dist must lie in [0, 100]"),
            (0 <= self.theta_rec <= 1, "theta_rec must lie in [0, 1]"),
            (0 <= self.theta_rel <= 1, "theta_rel must lie in [0, 1]"),
            (self.theta_dbscan > 0, "theta_dbscan must be > 0"),
            (self.working_size >= 16, "working_size must be >= 16"),
            (self.r >= 1, "r must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    @property
    def scoring(self) -> scoring.ScoringParams:
        return scoring.ScoringParams(sigma=self.sigma, theta_score=self.theta_score, r=self.r)


@dataclass
class StageArtifacts:
    """Intermediate rasters kept for diagnostics (working resolution unless noted)."""

    score: np.ndarray | None = None  # input resolution
    score_working: np.ndarray | None = None
    cluster_labels: np.ndarray | None = None  # -2 no candidate, -1 noise, else cluster id
    linked: np.ndarray | None = None
    approx_mask: np.ndarray | None = None
    region_labels: np.ndarray | None = None
    final_working: np.ndarray | None = None


@dataclass
class SegmentationReport:
    mask: np.ndarray
    params: PipelineParams
    flag: str | None = None
    candidate_count: int = 0
    cluster_count: int = 0
    relevant_count: int = 0
    eps: float | None = None
    min_pts: int | None = None
    regions_before: int = 0
    regions_after: int = 0
    sweeps: int = 0
    working_shape: tuple[int, int] | None = None
    timings_ms: dict[str, float] = field(default_factory=dict)
    artifacts: StageArtifacts = field(default_factory=StageArtifacts, repr=False)

    @property
    def empty(self) -> bool:
        return self.flag is not None

    def to_dict(self, timings: bool = True) -> dict:
        out = {
            "width": int(self.mask.shape[1]),
            "height": int(self.mask.shape[0]),
            "flag": self.flag,
            "mask_pixels": int(self.mask.sum()),
            "candidate_count": self.candidate_count,
            "cluster_count": self.cluster_count,
            "relevant_count": self.relevant_count,
            "eps": self.eps,
            "min_pts": self.min_pts,
            "regions_before": self.regions_before,
            "regions_after": self.regions_after,
            "sweeps": self.sweeps,
            "working_shape": list(self.working_shape) if self.working_shape else None,
            "params": asdict(self.params),
        }
        if timings:
            out["timings_ms"] = {k: round(v, 3) for k, v in self.timings_ms.items()}
        return out


def working_shape(shape: tuple[int, int], max_side: int) -> tuple[int, int]:
    h, w = shape
    if max(h, w) <= max_side:
        return h, w
    scale = max_side / max(h, w)
    return max(1, round(h * scale)), max(1, round(w * scale))


def _area_resize(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    im = Image.fromarray(np.ascontiguousarray(arr, dtype=np.float32), mode="F")
    return np.asarray(im.resize((shape[1], shape[0]), Image.Resampling.BOX), dtype=np.float64)


def downscale_score_map(score: np.ndarray, max_side: int = 400, theta_score: float = 50.0) -> np.ndarray:
    """Area-average the score map to fit max_side, re-zeroing sub-threshold values."""
    if max_side < 16:
        raise ValueError("max_side must be >= 16")
    target = working_shape(score.shape, max_side)
    if target == score.shape:
        return score.copy()
    out = _area_resize(score, target)
    out[out < theta_score] = 0.0
    return out


def downscale_image(img: LabImage, max_side: int = 400) -> LabImage:
    target = working_shape(img.shape, max_side)
    if target == img.shape:
        return img
    lab = np.stack([_area_resize(img.lab[..., c], target) for c in range(3)], axis=-1)
    return LabImage(lab=lab)


def upscale_mask(mask: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour enlargement of a boolean mask."""
    h, w = mask.shape
    if shape[0] < h or shape[1] < w:
        raise ValueError("target must not be smaller than the mask")
    rows = (np.arange(shape[0]) * h) // shape[0]
    cols = (np.arange(shape[1]) * w) // shape[1]
    return np.asarray(mask, dtype=bool)[np.ix_(rows, cols)]


class _Timer:
    def __init__(self, sink: dict[str, float]):
        self.sink = sink
        self.t = time.perf_counter()

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.sink[name] = (now - self.t) * 1000.0
        self.t = now


def segment(img: LabImage, params: PipelineParams = PipelineParams()) -> SegmentationReport:
    """Extract the in-focus object of ``img`` as a boolean mask at input resolution."""
    report = SegmentationReport(mask=np.zeros(img.shape, dtype=bool), params=params)
    art = report.artifacts
    timer = _Timer(report.timings_ms)

    art.score = scoring.deviation_score_map(img, params.scoring)
    timer.lap("score")

    score = downscale_score_map(art.score, params.working_size, params.theta_score)
    work = downscale_image(img, params.working_size)
    shape = score.shape
    report.working_shape = shape
    art.score_working = score
    timer.lap("rescale")

    points = np.argwhere(score > 0)
    report.candidate_count = len(points)
    if not len(points):
        log.info("no candidates in score map")
        report.flag = NO_CANDIDATES
        return report

    eps, min_pts = clustering.auto_params(score, params.theta_eps, params.theta_dbscan)
    report.eps, report.min_pts = eps, min_pts
    cs = clustering.dbscan(points, eps, min_pts)
    report.cluster_count = cs.n_clusters
    labels = np.full(shape, -2, dtype=np.int64)
    labels[cs.points[:, 0], cs.points[:, 1]] = cs.labels
    art.cluster_labels = labels
    timer.lap("cluster")
    if cs.n_clusters == 0:
        log.info("no clusters among %d candidates", len(points))
        report.flag = NO_CLUSTERS
        return report
    rel = clustering.relevant_clusters(cs)
    report.relevant_count = len(rel.cluster_ids)

    art.linked, art.approx_mask = morphology.build_approximate_mask(rel, shape, params.theta_rec)
    timer.lap("approximate")

    region_labels = regions.color_segment(work, art.approx_mask, params.theta_dist)
    art.region_labels = region_labels
    report.regions_before = int(region_labels.max(initial=-1)) + 1
    timer.lap("color_segment")

    support = art.linked if params.sbo_support == "hull" else rel.member_mask(shape)
    refined = regions.region_scoring(region_labels, support, params.theta_rel)
    report.regions_after = int(refined.alive.sum())
    report.sweeps = refined.sweeps
    art.final_working = refined.mask
    report.mask = upscale_mask(refined.mask, img.shape)
    timer.lap("region_score")
    return report

"""Segmentation quality and retrieval-impact measures."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dofseg.colorspace import LabImage, lab_array_to_srgb


@dataclass(frozen=True)
class EvalRecord:
    d_prime: float
    d: float
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict:
        return {"d_prime": self.d_prime, "d": self.d, "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def spatial_distortion(pred: np.ndarray, truth: np.ndarray) -> EvalRecord:
    """Misclassified pixels over reference area; ``d`` is clipped to 1."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {truth.shape}")
    area = int(truth.sum())
    if area == 0:
        raise ValueError("reference mask empty")
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = area - tp
    tn = pred.size - tp - fp - fn
    d_prime = (fp + fn) / area
    return EvalRecord(d_prime=d_prime, d=min(1.0, d_prime), tp=tp, fp=fp, fn=fn, tn=tn)


def summarize(values) -> dict:
    """min / median / average / std-dev (population) / max of a sequence."""
    vals = [float(v) for v in values]
    if not vals:
        return {"count": 0, "min": None, "median": None, "average": None, "std": None, "max": None}
    return {
        "count": len(vals),
        "min": min(vals),
        "median": statistics.median(vals),
        "average": statistics.fmean(vals),
        "std": statistics.pstdev(vals),
        "max": max(vals),
    }


@dataclass(frozen=True)
class Histogram:
    counts: np.ndarray
    normalized: bool = False

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def as_frequencies(self) -> "Histogram":
        if self.normalized:
            return self
        total = self.total
        return Histogram(self.counts / total if total else self.counts.astype(np.float64), True)


def hue_saturation(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """HSV hue in degrees [0, 360) and saturation in [0, 1] of 0-255 RGB values."""
    rgb = np.asarray(rgb, dtype=np.float64) / 255.0
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    chroma = mx - mn
    sat = np.divide(chroma, mx, out=np.zeros_like(mx), where=mx > 0)
    r, g, b = np.moveaxis(rgb, -1, 0)
    safe = np.where(chroma > 0, chroma, 1.0)
    hue = np.select(
        [chroma == 0, mx == r, mx == g],
        [0.0, ((g - b) / safe) % 6.0, (b - r) / safe + 2.0],
        default=(r - g) / safe + 4.0,
    )
    return (hue * 60.0) % 360.0, sat


def color_histogram(img: LabImage, mask: np.ndarray | None = None, bins: int = 12) -> Histogram:
    """Hue histogram with ``bins`` equal arcs; near-gray pixels (S < 0.05) go to bin 0."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    rgb = img.rgb if img.rgb is not None else lab_array_to_srgb(img.lab)
    hue, sat = hue_saturation(rgb)
    idx = np.floor(hue / 360.0 * bins).astype(np.int64) % bins
    idx[sat < 0.05] = 0
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != img.shape:
            raise ValueError(f"dimension mismatch: {img.shape} vs {mask.shape}")
        idx = idx[mask]
    if idx.size == 0:
        raise ValueError("no pixels to histogram")
    return Histogram(np.bincount(idx.ravel(), minlength=bins).astype(np.float64))


def minkowski_distance(q: Histogram, t: Histogram, p: float = 2) -> float:
    qc, tc = np.asarray(q.counts, dtype=np.float64), np.asarray(t.counts, dtype=np.float64)
    if qc.shape != tc.shape:
        raise ValueError(f"histogram length mismatch: {qc.shape} vs {tc.shape}")
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(np.sum(np.abs(qc - tc) ** p) ** (1.0 / p))


@dataclass
class ClassManifest:
    """Image keys with class labels, in manifest order."""

    entries: list[tuple[str, str]]
    masks: dict[str, str] | None = None

    @property
    def classes(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for key, label in self.entries:
            out.setdefault(label, []).append(key)
        return out

    def label_of(self, key: str) -> str:
        for k, label in self.entries:
            if k == key:
                return label
        raise KeyError(key)

    def singleton_classes(self) -> list[str]:
        return [c for c, members in self.classes.items() if len(members) < 2]


def read_manifest(path: str | Path) -> list[dict[str, str]]:
    """Rows of a CSV manifest with relative paths resolved against its directory."""
    path = Path(path)
    base = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "path" not in reader.fieldnames:
            raise ValueError(f"{path}: manifest needs a 'path' column")
        rows = []
        for row in reader:
            for col in ("path", "mask_path"):
                if row.get(col):
                    p = Path(row[col])
                    row[col] = str(p if p.is_absolute() else base / p)
            rows.append(row)
    return rows


def load_class_manifest(path: str | Path) -> ClassManifest:
    rows = read_manifest(path)
    if rows and "class" not in rows[0]:
        raise ValueError(f"{path}: class manifest needs a 'class' column")
    masks = {r["path"]: r["mask_path"] for r in rows if r.get("mask_path")}
    return ClassManifest(entries=[(r["path"], r["class"]) for r in rows], masks=masks or None)


def inner_class_distance(m: ClassManifest, image: str, hists: dict[str, Histogram], p: float = 2) -> float:
    """Mean distance from ``image`` to the other members of its class."""
    members = m.classes[m.label_of(image)]
    others = [k for k in members if k != image]
    if not others:
        raise ValueError(f"{image}: class has a single member")
    return statistics.fmean(minkowski_distance(hists[image], hists[k], p) for k in others)


def inter_class_distance(m: ClassManifest, image: str, hists: dict[str, Histogram], p: float = 2) -> float:
    """Mean distance from ``image`` to every image of every other class."""
    label = m.label_of(image)
    foreign = [k for k, c in m.entries if c != label]
    if not foreign:
        raise ValueError(f"{image}: no images outside its class")
    return statistics.fmean(minkowski_distance(hists[image], hists[k], p) for k in foreign)


def _class_distances(m: ClassManifest, hists: dict[str, Histogram], p: float) -> dict:
    multi_class = len(m.classes) > 1
    per_class = {}
    for label, members in m.classes.items():
        inner = [inner_class_distance(m, k, hists, p) for k in members]
        inter = [inter_class_distance(m, k, hists, p) for k in members] if multi_class else None
        per_class[label] = (statistics.fmean(inner), statistics.fmean(inter) if inter else None)
    keys = [k for k, _ in m.entries]
    inner_all = statistics.fmean(inner_class_distance(m, k, hists, p) for k in keys)
    inter_all = statistics.fmean(inter_class_distance(m, k, hists, p) for k in keys) if multi_class else None
    return {"classes": per_class, "overall": (inner_all, inter_all)}


def _entry(inner, inter, masked=None) -> dict:
    out = {"inner": inner, "inter": inter, "gap": None if inter is None else inter - inner}
    if masked is not None:
        m_inner, m_inter = masked
        out["inner_masked"] = m_inner
        out["inter_masked"] = m_inter
        out["gap_masked"] = None if m_inter is None else m_inter - m_inner
        out["ratio_inner"] = m_inner / inner if inner else None
        out["ratio_outer"] = m_inter / inter if inter else None
        out["gap_delta"] = None if inter is None else out["gap_masked"] - out["gap"]
    return out


def similarity_report(
    m: ClassManifest,
    images: dict[str, LabImage],
    masks: dict[str, np.ndarray] | None = None,
    bins: int = 12,
    p: float = 2,
) -> dict:
    """Inner/inter-class histogram distances, optionally compared with masked histograms.

    Histograms are normalised to frequencies so masked and unmasked runs
    share one scale.
    """
    bad = m.singleton_classes()
    if bad:
        raise ValueError(f"classes with fewer than two images: {', '.join(bad)}")
    keys = [k for k, _ in m.entries]
    plain = {k: color_histogram(images[k], None, bins).as_frequencies() for k in keys}
    base = _class_distances(m, plain, p)
    masked = None
    if masks is not None:
        hists = {k: color_histogram(images[k], masks[k], bins).as_frequencies() for k in keys}
        masked = _class_distances(m, hists, p)

    report = {"bins": bins, "p": p, "masked": masks is not None, "classes": {}}
    for label, (inner, inter) in base["classes"].items():
        report["classes"][label] = _entry(inner, inter, masked["classes"][label] if masked else None)
    report["overall"] = _entry(*base["overall"], masked["overall"] if masked else None)
    return report

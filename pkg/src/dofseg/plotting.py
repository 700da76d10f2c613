"""Matplotlib figures written next to the JSON reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from dofseg.imagefiles import colorize_labels  # noqa: E402

# fixed metadata keeps figure files reproducible
_META = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def stage_figure(rgb: np.ndarray, report, path) -> None:
    """Original image plus the five stage panels of one segmentation."""
    art = report.artifacts
    blank = np.zeros(report.working_shape or rgb.shape[:2])
    panels = [
        ("input", rgb, None),
        ("scores", art.score_working if art.score_working is not None else blank, "gray"),
        ("clusters", colorize_labels(art.cluster_labels) if art.cluster_labels is not None else blank, "gray"),
        ("approximate mask", art.approx_mask if art.approx_mask is not None else blank, "gray"),
        ("colour regions", colorize_labels(art.region_labels) if art.region_labels is not None else blank, "gray"),
        ("final mask", report.mask, "gray"),
    ]
    fig, axes = plt.subplots(2, 3, figsize=(9, 6.4))
    for ax, (title, data, cmap) in zip(axes.ravel(), panels):
        ax.imshow(data, cmap=cmap, interpolation="nearest")
        ax.set_title(title, fontsize=10)
        ax.set_axis_off()
    fig.tight_layout()
    _save(fig, path)


def distortion_figure(names: list[str], values: list[float], summary: dict, path) -> None:
    """Per-image spatial distortion, sorted, with the suite average and median."""
    order = np.argsort(values, kind="stable")
    fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * len(values) + 2), 3.6))
    ax.bar(range(len(values)), np.asarray(values)[order], color="0.45")
    if summary.get("average") is not None:
        ax.axhline(summary["average"], color="tab:red", lw=1, label=f"average {summary['average']:.3f}")
        ax.axhline(summary["median"], color="tab:blue", lw=1, ls="--", label=f"median {summary['median']:.3f}")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels([names[i] for i in order], rotation=90, fontsize=7)
    ax.set_ylim(0, 1)
    ax.set_ylabel("spatial distortion d")
    fig.tight_layout()
    _save(fig, path)


def similarity_figure(report: dict, path) -> None:
    """Inner and inter class distances per class, plain vs masked when available."""
    labels = list(report["classes"])
    x = np.arange(len(labels))
    series = [("inner", "inner"), ("inter", "inter")]
    if report.get("masked"):
        series += [("inner masked", "inner_masked"), ("inter masked", "inter_masked")]
    width = 0.8 / len(series)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(labels) + 2), 3.6))
    for i, (name, key) in enumerate(series):
        vals = [report["classes"][c].get(key) or 0.0 for c in labels]
        ax.bar(x + (i - (len(series) - 1) / 2) * width, vals, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel(f"d{report['p']} histogram distance")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)

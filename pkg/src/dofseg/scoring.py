"""Deviation scoring: per-pixel sharpness candidates from Lab images.

A pixel is an *edge* when its colour deviates from the mean of its
(2r+1)^2 neighbourhood by more than ``theta_score`` (after scaling the CIE76
distance to 0-255). Edge pixels are scored by how much that deviation drops
between one and two passes of a small Gaussian blur: sharp detail loses a
lot of contrast on the first pass, already defocused detail hardly any.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dofseg.colorspace import LabImage, delta_e_max


@dataclass(frozen=True)
class ScoringParams:
    sigma: float = 0.9
    theta_score: float = 50.0
    r: int = 1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not 0 <= self.theta_score <= 255:
            raise ValueError("theta_score must lie in [0, 255]")
        if self.r < 1:
            raise ValueError("r must be >= 1")


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D sampled Gaussian truncated at +-ceil(3 sigma), summing to one."""
    radius = max(1, math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="edge")
    n = arr.shape[axis]
    out = np.zeros_like(arr, dtype=np.float64)
    for i, w in enumerate(kernel):
        out += w * np.take(padded, np.arange(i, i + n), axis=axis)
    return out


def blur_array(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur over the first two axes, edge-replicated."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    k = gaussian_kernel(sigma)
    return _convolve_axis(_convolve_axis(np.asarray(arr, dtype=np.float64), k, 1), k, 0)


def gaussian_blur(img: LabImage, sigma: float) -> LabImage:
    return LabImage(lab=blur_array(img.lab, sigma), rgb=None)


def neighbor_mean_array(lab: np.ndarray, r: int) -> np.ndarray:
    """Mean over the L-infinity r-ball, clipped to the image (in-bounds count)."""
    h, w = lab.shape[:2]
    padded = np.pad(lab, ((r, r), (r, r), (0, 0)))
    inside = np.pad(np.ones((h, w)), r)
    total = np.zeros_like(lab, dtype=np.float64)
    count = np.zeros((h, w))
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            total += padded[dy : dy + h, dx : dx + w]
            count += inside[dy : dy + h, dx : dx + w]
    return total / count[..., None]


def neighbor_mean(img: LabImage, x: int, y: int, r: int = 1) -> tuple[float, float, float]:
    if not (0 <= x < img.width and 0 <= y < img.height):
        raise IndexError(f"({x}, {y}) outside {img.width}x{img.height} image")
    window = img.lab[max(0, y - r) : y + r + 1, max(0, x - r) : x + r + 1]
    return tuple(float(v) for v in window.reshape(-1, 3).mean(axis=0))


def neighbor_difference_array(lab: np.ndarray, r: int) -> np.ndarray:
    diff = neighbor_mean_array(lab, r) - lab
    de = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2)
    return np.minimum(255.0 * de / delta_e_max(), 255.0)


def neighbor_difference(img: LabImage, x: int, y: int, r: int = 1) -> float:
    mean = np.array(neighbor_mean(img, x, y, r))
    de = float(np.sqrt(np.sum((mean - img.lab[y, x]) ** 2)))
    return min(255.0 * de / delta_e_max(), 255.0)


def deviation_score_map(img: LabImage, params: ScoringParams = ScoringParams()) -> np.ndarray:
    """Return the candidate score map (H x W floats, 0 for non-candidates)."""
    edges = neighbor_difference_array(img.lab, params.r) > params.theta_score
    once = blur_array(img.lab, params.sigma)
    twice = blur_array(once, params.sigma)
    drop = neighbor_difference_array(once, params.r) - neighbor_difference_array(twice, params.r)
    mu = np.minimum(255.0, drop**2)
    mu[~edges] = 0.0
    mu[mu < params.theta_score] = 0.0
    return mu


def hos_map(img: LabImage) -> np.ndarray:
    """Fourth central moment over 3x3 windows of the gray image, scaled by 1/100.

    Baseline sharpness map used for comparison only; it does not feed the
    segmentation pipeline.
    """
    gray = img.lab[..., 0] * 2.55
    h, w = gray.shape
    padded = np.pad(gray, 1, mode="edge")
    windows = [padded[dy : dy + h, dx : dx + w] for dy in range(3) for dx in range(3)]
    # offsets from the centre keep flat windows exactly zero
    mean = gray + sum(win - gray for win in windows) / 9.0
    m4 = sum((win - mean) ** 4 for win in windows) / 9.0
    return np.minimum(255.0, m4 / 100.0)

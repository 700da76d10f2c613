"""Seeded synthetic low depth-of-field scenes with exact ground truth.

A scene is a textured background defocused with a Gaussian of the given
sigma, with a sharp, high-contrast textured object composited on top.
"""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from dofseg.scoring import blur_array

SHAPES = ("disc", "ellipse", "blob")


@dataclass(frozen=True)
class SceneSpec:
    shape: str = "disc"
    hue: float | None = None  # foreground hue in degrees; random when None
    fg_grain: int = 2  # texture cell size in pixels
    fg_density: float = 0.5
    bg_hue: float | None = None
    bg_scale: int = 24  # background blob size in pixels (at 400 px)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; choose from {SHAPES}")


def _hsv(h: float, s: float, v: float) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb((h % 360) / 360.0, s, v)) * 255.0


def shape_mask(kind: str, dims: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    h, w = dims
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    m = min(h, w)
    cy = h / 2 + rng.uniform(-0.12, 0.12) * h
    cx = w / 2 + rng.uniform(-0.12, 0.12) * w
    if kind == "disc":
        r = rng.uniform(0.2, 0.3) * m
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if kind == "ellipse":
        a, b = rng.uniform(0.18, 0.33, size=2) * m
        t = rng.uniform(0, math.pi)
        u = (xx - cx) * math.cos(t) + (yy - cy) * math.sin(t)
        v = -(xx - cx) * math.sin(t) + (yy - cy) * math.cos(t)
        return (u / a) ** 2 + (v / b) ** 2 <= 1.0
    # smooth star-shaped blob: radius modulated by a few low harmonics
    base = rng.uniform(0.2, 0.28) * m
    harmonics = [(k, rng.uniform(0.03, 0.1), rng.uniform(0, 2 * math.pi)) for k in (2, 3, 5)]
    ang = np.arctan2(yy - cy, xx - cx)
    radius = base * (1 + sum(a * np.cos(k * ang + p) for k, a, p in harmonics))
    return np.hypot(yy - cy, xx - cx) <= radius


def disc_mask(dims: tuple[int, int], center: tuple[float, float], radius: float) -> np.ndarray:
    yy, xx = np.mgrid[0 : dims[0], 0 : dims[1]]
    return (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius * radius


def _upsample(grid: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    chans = [
        np.asarray(Image.fromarray(grid[..., c].astype(np.float32), mode="F").resize((dims[1], dims[0]), Image.Resampling.BICUBIC))
        for c in range(grid.shape[2])
    ]
    return np.stack(chans, axis=-1).astype(np.float64)


def background(dims: tuple[int, int], spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    h, w = dims
    scale = max(4, round(spec.bg_scale * max(h, w) / 400))
    gh, gw = max(2, h // scale + 2), max(2, w // scale + 2)
    base_hue = rng.uniform(0, 360) if spec.bg_hue is None else spec.bg_hue
    hues = base_hue + rng.uniform(-40, 40, size=(gh, gw))
    sats = rng.uniform(0.2, 0.7, size=(gh, gw))
    vals = rng.uniform(0.25, 0.95, size=(gh, gw))
    grid = np.stack(
        [_hsv(hh, ss, vv) for hh, ss, vv in zip(hues.ravel(), sats.ravel(), vals.ravel())]
    ).reshape(gh, gw, 3)
    field = _upsample(grid, dims)
    # fine detail that only defocus removes
    field += rng.normal(0, 40, size=(h, w, 1))
    return np.clip(field, 0, 255)


def random_fg_hue(rng: np.random.Generator) -> float:
    """Hues whose complementary pair is far apart in L*a*b* (about 235 units)."""
    return float(rng.uniform(60, 120) + 180 * rng.integers(0, 2))


def foreground(dims: tuple[int, int], spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    h, w = dims
    hue = random_fg_hue(rng) if spec.hue is None else spec.hue
    light = _hsv(hue, 1.0, 1.0)
    dark = _hsv(hue + 180, 1.0, 1.0)
    g = max(1, spec.fg_grain)
    cells = rng.random((h // g + 1, w // g + 1)) < spec.fg_density
    speck = np.repeat(np.repeat(cells, g, axis=0), g, axis=1)[:h, :w]
    return np.where(speck[..., None], dark, light)


def make_synthetic(
    spec: SceneSpec = SceneSpec(),
    blur_sigma: float = 8.0,
    dims: tuple[int, int] = (400, 400),
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Render a scene; returns (uint8 H x W x 3 sRGB image, boolean truth mask)."""
    if dims[0] < 64 or dims[1] < 64:
        raise ValueError("dims must be at least 64 x 64")
    if blur_sigma < 0:
        raise ValueError("blur_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    truth = shape_mask(spec.shape, dims, rng)
    bg = background(dims, spec, rng)
    if blur_sigma > 0:
        bg = blur_array(bg, blur_sigma)
    fg = foreground(dims, spec, rng)
    img = np.where(truth[..., None], fg, bg)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), truth


def downsample(image: np.ndarray, truth: np.ndarray, longest: int) -> tuple[np.ndarray, np.ndarray]:
    """The same scene at a lower resolution: box-filtered image, majority-vote truth."""
    h, w = truth.shape
    scale = longest / max(h, w)
    size = (max(1, round(w * scale)), max(1, round(h * scale)))
    small = np.asarray(Image.fromarray(image).resize(size, Image.Resampling.BOX))
    frac = np.asarray(Image.fromarray(truth.astype(np.float32), mode="F").resize(size, Image.Resampling.BOX))
    return small, frac >= 0.5


def suite(count: int = 20, seed: int = 0, blur_range=(6.0, 12.0), dims=(400, 400)):
    """Yield (spec, sigma, image, truth) for a seeded family of scenes."""
    rng = np.random.default_rng(seed)
    for i in range(count):
        spec = SceneSpec(shape=SHAPES[i % len(SHAPES)])
        sigma = float(rng.uniform(*blur_range))
        sub = int(rng.integers(0, 2**31 - 1))
        image, truth = make_synthetic(spec, sigma, dims, sub)
        yield spec, sigma, image, truth


# foreground hue per class; each hue's complement is the other speckle colour,
# so these three pairs occupy disjoint hue bins
CLASS_HUES = (60.0, 120.0, 90.0)


def class_suite(count: int, classes: int = 1, seed: int = 0, blur_range=(6.0, 12.0), dims=(400, 400)):
    """Yield (class label, image, truth); all scenes share one background hue family.

    With a single class the foreground hue is drawn per scene; otherwise
    class ``i`` uses ``CLASS_HUES[i % 3]``.
    """
    rng = np.random.default_rng(seed)
    bg_hue = float(rng.uniform(0, 360))
    for i in range(count):
        c = i % classes
        hue = None if classes == 1 else CLASS_HUES[c % len(CLASS_HUES)] + 180.0 * (c // len(CLASS_HUES) % 2)
        spec = SceneSpec(shape=SHAPES[i % len(SHAPES)], hue=hue, bg_hue=bg_hue)
        sigma = float(rng.uniform(*blur_range))
        sub = int(rng.integers(0, 2**31 - 1))
        image, truth = make_synthetic(spec, sigma, dims, sub)
        yield f"c{c}", image, truth

"""sRGB to CIELAB conversion and the CIE76 colour difference."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

# D65 white as the matrix maps it, so sRGB white lands exactly on L = 100
WHITE_D65 = _RGB_TO_XYZ.sum(axis=1)

# Nominal CIELAB box: L in [0, 100], a and b in [-128, 127].
_LAB_BOX_DIAMETER = math.sqrt(100.0**2 + 255.0**2 + 255.0**2)


class ImageDecodeError(ValueError):
    """Raised when an encoded raster cannot be decoded."""


@dataclass(frozen=True)
class LabImage:
    """An H x W x 3 CIELAB raster.

    ``rgb`` keeps the 8-bit sRGB source when the image was decoded from a
    file; colour histograms bin on its hue.
    """

    lab: np.ndarray
    rgb: np.ndarray | None = None

    def __post_init__(self):
        if self.lab.ndim != 3 or self.lab.shape[2] != 3:
            raise ValueError(f"expected H x W x 3 Lab array, got {self.lab.shape}")
        if self.lab.shape[0] < 1 or self.lab.shape[1] < 1:
            raise ValueError("image must have at least one pixel")

    @property
    def height(self) -> int:
        return self.lab.shape[0]

    @property
    def width(self) -> int:
        return self.lab.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.lab.shape[:2]

    @classmethod
    def from_rgb(cls, rgb: np.ndarray) -> "LabImage":
        rgb = np.asarray(rgb)
        if rgb.ndim == 2:
            rgb = np.repeat(rgb[..., None], 3, axis=2)
        rgb8 = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
        return cls(lab=srgb_array_to_lab(rgb8), rgb=rgb8)


def srgb_to_linear(values: np.ndarray) -> np.ndarray:
    c = np.asarray(values, dtype=np.float64) / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(values: np.ndarray) -> np.ndarray:
    c = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    out = np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1 / 2.4) - 0.055)
    return out * 255.0


def _f(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def _f_inv(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta, t**3, 3 * delta**2 * (t - 4.0 / 29.0))


def srgb_array_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) array of 0-255 sRGB values to CIELAB (D65)."""
    xyz = srgb_to_linear(rgb) @ _RGB_TO_XYZ.T
    fx, fy, fz = np.moveaxis(_f(xyz / WHITE_D65), -1, 0)
    lab = np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)
    # pure black/white land a hair off zero through the float path
    return np.where(np.abs(lab) < 1e-9, 0.0, lab)


def lab_array_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of :func:`srgb_array_to_lab`; returns float sRGB in [0, 255]."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = _f_inv(np.stack([fx, fy, fz], axis=-1)) * WHITE_D65
    return linear_to_srgb(xyz @ np.linalg.inv(_RGB_TO_XYZ).T)


def srgb_to_lab(r: float, g: float, b: float) -> tuple[float, float, float]:
    L, a, b_ = srgb_array_to_lab(np.array([r, g, b], dtype=np.float64))
    return float(L), float(a), float(b_)


def delta_e(u, v) -> float:
    """CIE76 colour difference: Euclidean distance in L*a*b*."""
    return math.dist(tuple(u), tuple(v))


def delta_e_array(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((np.asarray(u) - np.asarray(v)) ** 2, axis=-1))


def delta_e_max() -> float:
    """Largest distance inside the nominal L*a*b* box, sqrt(140050)."""
    return _LAB_BOX_DIAMETER


def decode_image(data: bytes) -> LabImage:
    """Decode PNG/JPEG bytes into a :class:`LabImage`.

    Gray images are expanded to r = g = b, alpha is dropped and 16-bit
    samples are rescaled to 0-255.
    """
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.format not in ("PNG", "JPEG"):
                raise ImageDecodeError(f"unsupported or corrupt image: format {im.format}")
            rgb = _to_rgb_array(im)
    except ImageDecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"unsupported or corrupt image: {exc}") from exc
    return LabImage.from_rgb(rgb)


def _to_rgb_array(im: Image.Image) -> np.ndarray:
    if im.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(im, dtype=np.float64)
        if im.mode == "I" and arr.max(initial=0) <= 255:
            return arr
        return arr / 257.0
    if im.mode in ("L", "1"):
        return np.asarray(im.convert("L"), dtype=np.float64)
    if im.mode == "LA":
        return np.asarray(im.convert("L"), dtype=np.float64)
    return np.asarray(im.convert("RGB"), dtype=np.float64)

"""Reading and writing images, masks and diagnostic rasters."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from dofseg.colorspace import ImageDecodeError, LabImage, decode_image


def read_image(path: str | Path) -> LabImage:
    return decode_image(Path(path).read_bytes())


def read_mask(path: str | Path) -> np.ndarray:
    """Any non-zero sample is foreground."""
    try:
        with Image.open(path) as im:
            im.load()
            arr = np.asarray(im.convert("L") if im.mode not in ("L", "1", "I", "I;16") else im)
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"unsupported or corrupt image: {exc}") from exc
    return arr > 0


def write_png(path: str | Path, arr: np.ndarray) -> None:
    # PNG writes carry no timestamps, so repeated runs stay byte-identical
    Image.fromarray(arr).save(path, format="PNG")


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    write_png(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def write_gray(path: str | Path, values: np.ndarray) -> None:
    """0-255 float raster as 8-bit gray, rounded to nearest."""
    write_png(path, np.clip(np.rint(values), 0, 255).astype(np.uint8))


def label_colors(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(40, 256, size=(n, 3), dtype=np.uint8)


def colorize_labels(labels: np.ndarray, seed: int = 0) -> np.ndarray:
    """Seeded random colour per non-negative label; negatives stay black."""
    labels = np.asarray(labels)
    n = int(labels.max(initial=-1)) + 1
    out = np.zeros(labels.shape + (3,), dtype=np.uint8)
    if n:
        on = labels >= 0
        out[on] = label_colors(n, seed)[labels[on]]
    return out


def write_labels(path: str | Path, labels: np.ndarray, seed: int = 0) -> None:
    write_png(path, colorize_labels(labels, seed))


def write_rgb(path: str | Path, rgb: np.ndarray) -> None:
    write_png(path, np.asarray(rgb, dtype=np.uint8))

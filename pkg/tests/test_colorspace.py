import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image
from skimage.color import rgb2lab

from dofseg.colorspace import (
    ImageDecodeError,
    decode_image,
    delta_e,
    delta_e_max,
    lab_array_to_srgb,
    srgb_array_to_lab,
    srgb_to_lab,
)


def reference_lab(rgb):
    """Independent sRGB/D65 conversion (scikit-image)."""
    arr = np.asarray(rgb, dtype=np.float64).reshape(1, -1, 3) / 255.0
    return rgb2lab(arr, illuminant="D65", observer="2").reshape(-1, 3)


@pytest.mark.parametrize(
    "rgb, expected, tol",
    [
        ((255, 255, 255), (100.0, 0.0, 0.0), 0.01),
        ((0, 0, 0), (0.0, 0.0, 0.0), 1e-12),
        ((255, 0, 0), (53.24, 80.09, 67.20), 0.05),
    ],
)
def test_anchor_colors(rgb, expected, tol):
    got = srgb_to_lab(*rgb)
    assert got == pytest.approx(expected, abs=tol)
    assert got == pytest.approx(tuple(reference_lab(rgb)[0]), abs=0.05)


def test_random_bytes_match_reference(rng):
    rgb = rng.integers(0, 256, size=(1000, 3))
    np.testing.assert_allclose(srgb_array_to_lab(rgb), reference_lab(rgb), atol=0.05)


def test_lab_box_invariant_on_srgb_lattice():
    levels = np.linspace(0, 255, 18)
    lattice = np.array(list(itertools.product(levels, repeat=3)))
    lab = srgb_array_to_lab(lattice)
    assert lab[:, 0].min() >= 0 and lab[:, 0].max() <= 100 + 1e-9
    assert lab[:, 1:].min() >= -128 and lab[:, 1:].max() <= 127
    # every pair stays within the box diameter: compare the extreme spread
    spread = np.sqrt(((lab.max(axis=0) - lab.min(axis=0)) ** 2).sum())
    assert spread <= delta_e_max()


def test_inverse_roundtrip(rng):
    rgb = rng.integers(0, 256, size=(200, 3)).astype(np.float64)
    np.testing.assert_allclose(lab_array_to_srgb(srgb_array_to_lab(rgb)), rgb, atol=1e-6)


def test_delta_e_examples():
    assert delta_e((10, 20, 30), (10, 20, 30)) == 0
    assert delta_e((100, 0, 0), (0, 0, 0)) == 100
    assert delta_e((50, 10, -10), (50, -10, 10)) == pytest.approx(math.sqrt(800))


def test_delta_e_max():
    assert delta_e_max() == pytest.approx(374.2326, abs=1e-4)
    assert delta_e((0, -128, -128), (100, 127, 127)) == pytest.approx(delta_e_max(), abs=1e-12)


lab_color = st.tuples(
    st.floats(0, 100), st.floats(-128, 127), st.floats(-128, 127)
)


@settings(max_examples=300)
@given(lab_color, lab_color, lab_color)
def test_delta_e_is_a_metric(u, v, w):
    assert delta_e(u, v) == delta_e(v, u)
    assert delta_e(u, u) == 0
    assert delta_e(u, w) <= delta_e(u, v) + delta_e(v, w) + 1e-9


def _png(arr, mode=None, **kw):
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG", **kw)
    return buf.getvalue()


def test_decode_white_png():
    img = decode_image(_png(np.full((1, 1, 3), 255, dtype=np.uint8)))
    assert (img.width, img.height) == (1, 1)
    np.testing.assert_allclose(img.lab[0, 0], (100, 0, 0), atol=0.01)


def test_decode_gray_png_black():
    img = decode_image(_png(np.zeros((3, 4), dtype=np.uint8)))
    assert img.shape == (3, 4)
    assert np.all(img.lab == 0)


def test_decode_gray_expands_to_equal_channels():
    img = decode_image(_png(np.full((2, 2), 128, dtype=np.uint8)))
    np.testing.assert_allclose(img.lab, srgb_array_to_lab(np.full((2, 2, 3), 128)))


def test_decode_16bit_gray_is_rescaled():
    arr = np.full((2, 2), 65535, dtype=np.uint16)
    img = decode_image(_png(arr))
    np.testing.assert_allclose(img.lab[..., 0], 100, atol=0.01)


def test_decode_drops_alpha():
    rgba = np.zeros((2, 2, 4), dtype=np.uint8)
    rgba[..., 0] = 255
    img = decode_image(_png(rgba))
    np.testing.assert_allclose(img.lab[0, 0], srgb_array_to_lab(np.array([255, 0, 0])), atol=1e-9)


def test_decode_jpeg():
    buf = io.BytesIO()
    Image.fromarray(np.full((8, 8, 3), 200, dtype=np.uint8)).save(buf, format="JPEG", quality=95)
    img = decode_image(buf.getvalue())
    assert img.shape == (8, 8)


def test_truncated_file_is_an_error():
    data = _png(np.zeros((64, 64, 3), dtype=np.uint8) + 7)
    with pytest.raises(ImageDecodeError, match="unsupported or corrupt"):
        decode_image(data[: len(data) // 2])


def test_garbage_is_an_error():
    with pytest.raises(ImageDecodeError):
        decode_image(b"not an image at all")

import numpy as np
import pytest

from dofseg.colorspace import LabImage


def lab_image(lab) -> LabImage:
    return LabImage(lab=np.asarray(lab, dtype=np.float64))


def gray_lab(values) -> LabImage:
    """Lab image whose L channel holds ``values`` and a = b = 0."""
    v = np.asarray(values, dtype=np.float64)
    return lab_image(np.stack([v, np.zeros_like(v), np.zeros_like(v)], axis=-1))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def step_image():
    """32 x 32 blue | yellow vertical step at column 16."""
    rgb = np.zeros((32, 32, 3), dtype=np.uint8)
    rgb[:, :16] = (0, 0, 255)
    rgb[:, 16:] = (255, 255, 0)
    return LabImage.from_rgb(rgb)


def pytest_terminal_summary(terminalreporter):
    from tests.acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, seconds, note in RESULTS:
        line = f"{'PASS' if ok else 'FAIL'}  {name}  ({seconds:.1f} s)"
        terminalreporter.write_line(f"{line}  {note}" if note else line)

import numpy as np
import pytest

from inr_denoise.image import Image


def textured_image(size=128):
    """Smooth ramp plus a low-frequency pattern, values well inside [0, 1]."""
    y, x = np.mgrid[0:size, 0:size] / size
    return Image(0.35 + 0.15 * x + 0.15 * np.sin(2 * np.pi * 3 * y) * np.cos(2 * np.pi * 2 * x))


@pytest.fixture
def textured():
    return textured_image()


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def report_criterion(number, passed, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])

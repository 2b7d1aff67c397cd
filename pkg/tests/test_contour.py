import math
import numpy as np
import pytest
from telicstates.contour import iso_lines


@pytest.fixture
def grid():
    x = np.linspace(-2.0, 2.0, 81)
    y = np.linspace(-2.0, 2.0, 61)
    X, Y = np.meshgrid(x, y)
    return x, y, X ** 2 + Y ** 2


def test_circle(grid):
    x, y, field = grid
    lines = iso_lines(x, y, field, 1.0)
    assert len(lines) == 1

    line = lines[0]
    assert line[0] == pytest.approx(line[-1])
    for px, py in line:
        assert math.hypot(px, py) == pytest.approx(1.0, abs=5e-3)


def test_level_outside_field(grid):
    x, y, field = grid
    assert iso_lines(x, y, field, 100.0) == []


def test_open_line():
    x = np.linspace(0.0, 1.0, 11)
    y = np.linspace(0.0, 2.0, 21)
    X, _ = np.meshgrid(x, y)
    lines = iso_lines(x, y, X, 0.55)
    assert len(lines) == 1
    assert all(px == pytest.approx(0.55) for px, _ in lines[0])
    assert {round(py, 9) for _, py in lines[0]} >= {0.0, 2.0}


def test_shape_mismatch(grid):
    x, y, field = grid
    with pytest.raises(ValueError):
        iso_lines(y, x, field, 1.0)

import numpy as np
import pytest

from convexcip.grid import Grid3
from convexcip.shapes import GLYPHS, Box, Cylinder, Letter, ShapeError, build_medium, check_inside, coverage, shape_from_dict

GRID = Grid3(1.0, 1.0, 11, 11, 11)


def test_box_coverage_integrates_to_volume():
    box = Box((0.0, 0.0, 0.0), (0.4, 0.6, 0.2), 3.0)
    assert coverage(box, GRID).sum() * GRID.h**3 == pytest.approx(0.4 * 0.6 * 0.2, rel=1e-12)


def test_cylinder_volume_close_to_exact():
    cyl = Cylinder((0.0, 0.0, 0.0), 0.5, 0.6, 2.0)
    vol = coverage(cyl, GRID, subsamples=8).sum() * GRID.h**3
    assert vol == pytest.approx(np.pi * 0.25 * 0.6, rel=0.02)


@pytest.mark.parametrize("letter", sorted(GLYPHS))
def test_letter_area_counts_glyph_pixels(letter):
    # glyph pixels line up with the 0.2 cells, so coverage is exact
    shape = Letter(letter, (0.0, 0.0, 0.0), (1.0, 1.0, 0.4), 4.0)
    pixels = sum(row.count("X") for row in GLYPHS[letter])
    assert coverage(shape, GRID).sum() * GRID.h**3 == pytest.approx(pixels * 0.04 * 0.4, rel=1e-12)


def test_letter_u_opens_toward_positive_y():
    shape = Letter("U", (0.0, 0.0, 0.0), (1.0, 1.0, 0.4), 4.0)
    assert not shape.contains(np.array([0.0, 0.4, 0.0]))
    assert shape.contains(np.array([0.0, -0.4, 0.0]))
    assert shape.contains(np.array([-0.4, 0.4, 0.0]))


def test_letter_a_has_crossbar_and_open_bottom():
    shape = Letter("A", (0.0, 0.0, 0.0), (1.0, 1.0, 0.4), 4.0)
    assert shape.contains(np.array([0.0, 0.0, 0.0]))
    assert not shape.contains(np.array([0.0, -0.4, 0.0]))
    assert not shape.contains(np.array([-0.4, 0.4, 0.0]))


def test_shape_from_dict_round_trip():
    s = shape_from_dict({"type": "letter", "letter": "o", "center": [0, 0, -0.2], "size": [0.5, 0.5, 0.2], "c": 9})
    assert s == Letter("O", (0.0, 0.0, -0.2), (0.5, 0.5, 0.2), 9.0)
    s = shape_from_dict({"type": "cylinder", "center": [0, 0, 0], "radius": 0.2, "height": 0.4, "c": 2})
    assert isinstance(s, Cylinder) and s.radius == 0.2


@pytest.mark.parametrize("d", [
    {"type": "sphere", "c": 2},
    {"type": "box", "center": [0, 0, 0], "c": 2},
    {"type": "box", "center": [0, 0, 0], "size": [1, 1, 1], "c": 2, "colour": "red"},
    {"type": "box", "center": [0, 0, 0], "size": [1, 1, 1], "c": 0.5},
    {"type": "box", "center": [0, 0, 0], "size": [1, 0, 1], "c": 2},
    {"type": "box", "center": [0, 0], "size": [1, 1, 1], "c": 2},
    {"type": "letter", "letter": "Q", "center": [0, 0, 0], "size": [1, 1, 1], "c": 2},
])
def test_invalid_shapes(d):
    with pytest.raises(ShapeError):
        shape_from_dict(d)


def test_shape_must_keep_margin():
    box = Box((0.0, 0.0, 0.75), (0.4, 0.4, 0.2), 2.0)
    check_inside(box, GRID, 0.1)
    with pytest.raises(ShapeError):
        check_inside(box, GRID, 0.2)


def test_build_medium_overlays_shapes():
    m = build_medium(GRID, [Box((0.0, 0.0, 0.0), (0.4, 0.4, 0.4), 3.0), Box((0.0, 0.0, 0.0), (0.2, 0.2, 0.2), 2.0)])
    assert m.c.min() == 1.0
    assert m.c[5, 5, 5] == pytest.approx(1 + 2 + 1)
    assert np.all(m.c[0] == 1) and np.all(m.c[:, :, -1] == 1)


def test_empty_medium_is_vacuum():
    assert np.all(build_medium(GRID, []).c == 1.0)

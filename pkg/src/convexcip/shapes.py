"""Primitive inclusions (box, vertical cylinder, extruded letters) and their
rasterization onto a grid with fractional cell coverage."""
from dataclasses import dataclass

import numpy as np

from .forward import MediumModel

# 5 x 5 glyphs, first row is +y, first column is -x
GLYPHS = {
    "U": ["X...X", "X...X", "X...X", "X...X", "XXXXX"],
    "A": [".XXX.", "X...X", "XXXXX", "X...X", "X...X"],
    "O": ["XXXXX", "X...X", "X...X", "X...X", "XXXXX"],
}


class ShapeError(ValueError):
    pass


def _vec3(v, name):
    v = tuple(float(x) for x in v)
    if len(v) != 3:
        raise ShapeError("%s needs three components" % name)
    return v


@dataclass(frozen=True)
class Box:
    center: tuple
    size: tuple
    c: float

    def contains(self, p):
        half = np.asarray(self.size) / 2
        return np.all(np.abs(p - np.asarray(self.center)) <= half, axis=-1)

    def bounds(self):
        ctr, half = np.asarray(self.center), np.asarray(self.size) / 2
        return ctr - half, ctr + half


@dataclass(frozen=True)
class Cylinder:
    """Circular cylinder with its axis along z."""

    center: tuple
    radius: float
    height: float
    c: float

    def contains(self, p):
        d = p - np.asarray(self.center)
        return (d[..., 0] ** 2 + d[..., 1] ** 2 <= self.radius**2) & (np.abs(d[..., 2]) <= self.height / 2)

    def bounds(self):
        ctr = np.asarray(self.center)
        half = np.array([self.radius, self.radius, self.height / 2])
        return ctr - half, ctr + half


@dataclass(frozen=True)
class Letter:
    """A glyph drawn in the x-y plane (width along x, height along y) and
    extruded over ``size[2]`` in z."""

    letter: str
    center: tuple
    size: tuple
    c: float

    def contains(self, p):
        glyph = np.array([[ch == "X" for ch in row] for row in GLYPHS[self.letter]])
        rows, cols = glyph.shape
        w, h, depth = self.size
        d = p - np.asarray(self.center)
        u = (d[..., 0] + w / 2) / w  # 0..1 along x
        t = (h / 2 - d[..., 1]) / h  # 0..1 from the top row
        inside = (u >= 0) & (u <= 1) & (t >= 0) & (t <= 1) & (np.abs(d[..., 2]) <= depth / 2)
        col = np.clip((u * cols).astype(int), 0, cols - 1)
        row = np.clip((t * rows).astype(int), 0, rows - 1)
        return inside & glyph[row, col]

    def bounds(self):
        ctr, half = np.asarray(self.center), np.asarray(self.size) / 2
        return ctr - half, ctr + half


def shape_from_dict(d):
    d = dict(d)
    kind = d.pop("type", None)
    try:
        c = float(d.pop("c"))
        if kind == "box":
            shape = Box(_vec3(d.pop("center"), "center"), _vec3(d.pop("size"), "size"), c)
        elif kind == "cylinder":
            shape = Cylinder(_vec3(d.pop("center"), "center"), float(d.pop("radius")), float(d.pop("height")), c)
        elif kind == "letter":
            letter = str(d.pop("letter")).upper()
            if letter not in GLYPHS:
                raise ShapeError("unknown letter %r (have %s)" % (letter, ", ".join(sorted(GLYPHS))))
            shape = Letter(letter, _vec3(d.pop("center"), "center"), _vec3(d.pop("size"), "size"), c)
        else:
            raise ShapeError("unknown shape type %r" % kind)
    except KeyError as exc:
        raise ShapeError("shape %r is missing field %s" % (kind, exc)) from None
    if d:
        raise ShapeError("unexpected fields for %s: %s" % (kind, ", ".join(sorted(d))))
    if shape.c < 1:
        raise ShapeError("dielectric constant must be >= 1, got %g" % shape.c)
    lo, hi = shape.bounds()
    if np.any(hi <= lo):
        raise ShapeError("shape %r has non-positive extent" % kind)
    return shape


def check_inside(shape, grid, margin):
    """Require the shape to stay ``margin`` away from every face of the domain."""
    lo, hi = shape.bounds()
    limit = np.array([grid.R, grid.R, grid.b]) - margin
    if np.any(lo < -limit - 1e-12) or np.any(hi > limit + 1e-12):
        raise ShapeError("shape %s leaves the domain interior (margin %g)" % (shape, margin))


def coverage(shape, grid, subsamples=4):
    """Fraction of every grid cell (side h, centred on the node) inside the shape."""
    h = grid.h
    out = np.zeros(grid.shape)
    lo, hi = shape.bounds()
    axes = (grid.x, grid.y, grid.z)
    sl = []
    for a, l, u in zip(axes, lo, hi):
        i0 = max(int(np.searchsorted(a, l - h)), 0)
        i1 = min(int(np.searchsorted(a, u + h, side="right")), a.size)
        sl.append(slice(i0, i1))
    X, Y, Z = np.meshgrid(grid.x[sl[0]], grid.y[sl[1]], grid.z[sl[2]], indexing="ij")
    offs = ((np.arange(subsamples) + 0.5) / subsamples - 0.5) * h
    acc = np.zeros(X.shape)
    for dx in offs:
        for dy in offs:
            for dz in offs:
                acc += shape.contains(np.stack([X + dx, Y + dy, Z + dz], axis=-1))
    out[tuple(sl)] = acc / subsamples**3
    return out


def build_medium(grid, shapes, margin=None, subsamples=4):
    """c = 1 + sum over shapes of (c_shape - 1) * coverage."""
    margin = grid.h if margin is None else margin
    c = np.ones(grid.shape)
    for s in shapes:
        check_inside(s, grid, margin)
        c += (s.c - 1.0) * coverage(s, grid, subsamples)
    return MediumModel(grid, c)

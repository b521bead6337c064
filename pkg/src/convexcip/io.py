"""On-disk formats.

Arrays are stored as raw little-endian binary (``<c16`` for complex, ``<f8``
for real, C order) next to a JSON sidecar with the same stem that records
dtype, shape and any metadata. Volumes for viewing are written as legacy
ASCII VTK structured points; slices go to CSV.
"""
import json
from pathlib import Path

import numpy as np

DTYPES = {"complex128": "<c16", "float64": "<f8"}


class MissingInputError(FileNotFoundError):
    pass


def _stem(path):
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".json", ".bin") else p


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path):
    path = Path(path)
    if not path.exists():
        raise MissingInputError("missing input file %s" % path)
    return json.loads(path.read_text())


def write_array(path, values, meta=None):
    stem = _stem(path)
    values = np.asarray(values)
    kind = "complex128" if np.iscomplexobj(values) else "float64"
    data = np.ascontiguousarray(values, dtype=DTYPES[kind])
    stem.with_suffix(".bin").write_bytes(data.tobytes())
    side = dict(meta or {})
    side.update({"dtype": kind, "byte_order": "little", "shape": list(data.shape)})
    dump_json(stem.with_suffix(".json"), side)


def read_array(path):
    stem = _stem(path)
    meta = load_json(stem.with_suffix(".json"))
    bin_path = stem.with_suffix(".bin")
    if not bin_path.exists():
        raise MissingInputError("missing input file %s" % bin_path)
    values = np.frombuffer(bin_path.read_bytes(), dtype=DTYPES[meta["dtype"]]).reshape(meta["shape"])
    return values.astype(meta["dtype"]), meta


def write_vtk(path, values, grid, name="c"):
    """Legacy ASCII structured-points file; x varies fastest."""
    values = np.asarray(values, dtype=float)
    lines = [
        "# vtk DataFile Version 3.0",
        "reconstructed dielectric constant",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS %d %d %d" % grid.shape,
        "ORIGIN %r %r %r" % (-grid.R, -grid.R, -grid.b),
        "SPACING %r %r %r" % ((grid.h,) * 3),
        "POINT_DATA %d" % values.size,
        "SCALARS %s double 1" % name,
        "LOOKUP_TABLE default",
    ]
    flat = values.transpose(2, 1, 0).ravel()
    for s in range(0, flat.size, 8):
        lines.append(" ".join("%.10g" % v for v in flat[s : s + 8]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path):
    """Values of a file written by ``write_vtk`` as an (Nx, Ny, Nz) array."""
    text = Path(path).read_text().splitlines()
    dims = next(tuple(int(t) for t in line.split()[1:]) for line in text if line.startswith("DIMENSIONS"))
    start = next(i for i, line in enumerate(text) if line.startswith("LOOKUP_TABLE")) + 1
    vals = np.array(" ".join(text[start:]).split(), dtype=float)
    return vals.reshape(dims[::-1]).transpose(2, 1, 0)


def write_slices_csv(path, values, grid):
    """Mid-plane slices normal to x, y and z in one long-format table."""
    i, j, k = grid.Nx // 2, grid.Ny // 2, grid.Nz // 2
    x, y, z = grid.x, grid.y, grid.z
    rows = ["plane,x,y,z,c"]
    for b in range(grid.Ny):
        for c in range(grid.Nz):
            rows.append("x=%.6g,%.6g,%.6g,%.6g,%.10g" % (x[i], x[i], y[b], z[c], values[i, b, c]))
    for a in range(grid.Nx):
        for c in range(grid.Nz):
            rows.append("y=%.6g,%.6g,%.6g,%.6g,%.10g" % (y[j], x[a], y[j], z[c], values[a, j, c]))
    for a in range(grid.Nx):
        for b in range(grid.Ny):
            rows.append("z=%.6g,%.6g,%.6g,%.6g,%.10g" % (z[k], x[a], y[b], z[k], values[a, b, k]))
    Path(path).write_text("\n".join(rows) + "\n")

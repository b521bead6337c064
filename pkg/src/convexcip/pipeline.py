"""Pipeline stages. Each stage reads its predecessor's files from the run
directory, writes its own and appends a record to ``manifest.json``.

Files in the run directory:
    far_field        total field on z = -D, one plane per wavenumber
    medium_true      ground-truth c on the forward grid
    near_scattered   scattered field propagated to z = -b
    near_total       processed total field F0 on z = -b
    near_dz          its z-derivative F1
    window.json      per-k maxima curve and the chosen window
    boundary         g0 and g1 coefficients (stacked)
    c_recon          reconstructed c on the inversion grid
    descent.csv      descent trace
    c_recon.vtk, slices.csv, summary.json   report products
"""
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import io
from .assembly import boundary_coeffs, compute_Q, dz_log_ratio, log_ratio_continuous
from .basis import build_basis
from .forward import incident_log_gradient, incident_wave, sample_far_plane
from .grid import FrequencyGrid, Grid3
from .inversion import CarlemanFunctional, minimize, qr_initialize, reconstruct_c
from .preprocess import WindowReport, plane_maxima, select_window, truncate_smooth
from .probes import DeskProblem, probe_theorems
from .propagation import ComplexPlane, crop, dz_spectral, propagate_to_near
from .shapes import build_medium

log = logging.getLogger(__name__)

STAGES = ("simulate", "propagate", "preprocess", "invert", "report")


def _append_manifest(out, cfg, record):
    path = Path(out) / "manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {"stages": []}
    manifest["config"] = cfg.snapshot()
    manifest["stages"].append(record)
    io.dump_json(path, manifest)


def _run(name, fn, cfg, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    info = fn(cfg, out)
    record = {"stage": name, "wall_time_s": round(time.perf_counter() - t0, 3), "seed": cfg["seed"]}
    record.update(info)
    _append_manifest(out, cfg, record)
    log.info("%s done in %.1f s", name, record["wall_time_s"])
    return record


def _plane_points(half_width, n, z):
    return ComplexPlane(np.zeros((n, n), dtype=complex), half_width, z).points()


def _kgrid_from(meta):
    return FrequencyGrid(np.array(meta["k"]), np.array(meta["weights"]))


# stages ---------------------------------------------------------------------
def simulate(cfg, out):
    grid = cfg.grid()
    fgrid = cfg.forward_grid()
    medium = build_medium(fgrid, cfg.shapes(), margin=grid.h)
    kgrid = cfg.data_kgrid()
    src = cfg.source()
    sim = cfg["simulate"]
    hw = grid.R if sim["far_half_width"] is None else float(sim["far_half_width"])
    n = int(round(2 * hw / grid.h)) + 1
    hw = (n - 1) * grid.h / 2
    D = float(cfg["geometry"]["D"])
    ds = sample_far_plane(medium, kgrid, src, D, float(sim["noise_pct"]), int(cfg["seed"]), hw, n, int(sim["workers"]))
    meta = {"kind": "far_field", "k": kgrid.nodes.tolist(), "weights": kgrid.weights.tolist(), "z": -D, "D": D,
            "half_width": hw, "source": list(src.position)}
    io.write_array(out / "far_field", ds.planes, meta)
    io.write_array(out / "medium_true", medium.c, {"kind": "medium", "grid": fgrid.to_dict()})
    ui = np.array([incident_wave(_plane_points(hw, n, -D), k, src) for k in kgrid.nodes])
    return {"Nk": kgrid.Nk, "plane_n": n, "max_abs_scattered": float(np.abs(ds.planes - ui).max()),
            "max_c": float(medium.c.max())}


def propagate(cfg, out):
    planes, meta = io.read_array(out / "far_field")
    grid = cfg.grid()
    src = cfg.source()
    hw, D, b = meta["half_width"], meta["D"], grid.b
    n = planes.shape[1]
    if abs(2 * hw / (n - 1) - grid.h) > 1e-9:
        raise ValueError("far-plane pitch %.6g differs from grid spacing %.6g" % (2 * hw / (n - 1), grid.h))
    pts = _plane_points(hw, n, -D)
    near = []
    for k, u in zip(meta["k"], planes):
        us = u - incident_wave(pts, k, src)
        p = propagate_to_near(ComplexPlane(us, hw, -D), k, D, b, pad=float(cfg["propagation"]["pad"]))
        near.append(crop(p, grid.R).values)
    near = np.array(near)
    io.write_array(out / "near_scattered", near, dict(meta, kind="near_scattered", z=-b, half_width=grid.R))
    return {"max_abs_near": float(np.abs(near).max())}


def preprocess(cfg, out):
    near, meta = io.read_array(out / "near_scattered")
    grid = cfg.grid()
    src = cfg.source()
    pre = cfg["preprocess"]
    freq = cfg["frequency"]
    k = np.array(meta["k"])
    processed = np.array([truncate_smooth(p, float(pre["fraction"]), float(pre["sigma"])) for p in near])

    if freq["auto"]:
        rep = select_window(k, processed, float(freq["window_len"]), tuple(freq["weights"]))
        start, stop = rep.start, rep.stop
        if (stop - start) % 2 == 0:
            stop -= 1
        kgrid = FrequencyGrid.simpson(k[start], k[stop - 1], stop - start)
        if not np.allclose(kgrid.nodes, k[start:stop], rtol=0, atol=1e-9):
            raise ValueError("data wavenumbers are not uniformly spaced; cannot form the quadrature")
        rep.k_hi = float(k[stop - 1])
        rep.stop = stop
    else:
        kgrid = _kgrid_from(meta)
        maxima, argmax = plane_maxima(processed)
        rep = WindowReport(float(k[0]), float(k[-1]), 0, k.size, k.tolist(), maxima.tolist(), argmax.tolist())
        start, stop = 0, k.size
    io.dump_json(out / "window.json", rep.to_dict())

    pts = _plane_points(grid.R, grid.Nx, -grid.b)
    F0, F1 = [], []
    for kk, us in zip(kgrid.nodes, processed[start:stop]):
        ui = incident_wave(pts, kk, src)
        dz_ui = ui * incident_log_gradient(pts, kk, src)[..., 2]
        F0.append(ui + us)
        F1.append(dz_ui + dz_spectral(ComplexPlane(us, grid.R, -grid.b), kk).values)
    side = dict(meta, kind="near_total", k=kgrid.nodes.tolist(), weights=kgrid.weights.tolist())
    io.write_array(out / "near_total", np.array(F0), side)
    io.write_array(out / "near_dz", np.array(F1), dict(side, kind="near_dz"))
    return {"k_lo": kgrid.k_lo, "k_hi": kgrid.k_hi, "Nk": kgrid.Nk}


def invert(cfg, out):
    F0, meta = io.read_array(out / "near_total")
    F1, _ = io.read_array(out / "near_dz")
    grid = cfg.grid()
    src = cfg.source()
    kgrid = _kgrid_from(meta)
    basis = build_basis(int(cfg["basis"]["N"]), kgrid)
    pts = _plane_points(grid.R, grid.Nx, -grid.b)
    ui = np.array([incident_wave(pts, k, src) for k in kgrid.nodes])
    dz_ui = np.array([u * incident_log_gradient(pts, k, src)[..., 2] for u, k in zip(ui, kgrid.nodes)])
    v = log_ratio_continuous(F0, ui, kgrid.nodes)
    dzv = dz_log_ratio(F0, F1, ui, dz_ui, kgrid.nodes)
    bd = boundary_coeffs(v, dzv, basis, kgrid)
    io.write_array(out / "boundary", np.stack([bd.g0, bd.g1]), {"kind": "boundary", "layout": "g0/g1, n, x, y"})

    Q = compute_Q(basis, src, grid)
    icfg = cfg.inverse()
    F = CarlemanFunctional.from_boundary(grid, basis, Q, bd, cfg.carleman(), icfg.eps)
    V0 = qr_initialize(F, icfg)
    Vc, trace = minimize(V0, F, icfg)
    c = reconstruct_c(Vc, basis, src, grid)
    io.write_array(out / "c_recon", c, {"kind": "c_recon", "grid": grid.to_dict()})
    (out / "descent.csv").write_text(trace.to_csv())
    Js = trace.accepted_J()
    return {"J_initial": Js[0], "J_final": Js[-1], "iterations": len(trace.records) - 1,
            "termination": trace.reason, "max_c": float(c.max())}


def isovalue(c):
    cmax = float(np.max(c))
    return (cmax - 1.0) * (0.2 if cmax >= 10 else 0.1) + 1.0


def summarize(c, grid):
    """Max, argmax and the isosurface's bounding box, centroid and front face."""
    cmax = float(c.max())
    idx = np.unravel_index(int(np.argmax(c)), c.shape)
    summary = {"max_c": cmax, "argmax": [float(v) for v in grid.point_of(idx)], "threshold": isovalue(c)}
    inside = c > summary["threshold"]
    if cmax <= 1.0 or not inside.any():
        summary.update({"isosurface_nodes": 0, "bbox": None, "centroid": None, "front_face_z": None})
        return summary
    pts = grid.coords()[inside]
    summary.update({
        "isosurface_nodes": int(inside.sum()),
        "bbox": [pts.min(0).tolist(), pts.max(0).tolist()],
        "centroid": pts.mean(0).tolist(),
        "front_face_z": float(pts[:, 2].min()),
    })
    return summary


def truth_summary(c, grid):
    """Centroid and extent of the true inclusion (cells at least half covered)."""
    if c.max() <= 1.0:
        return None
    inside = c - 1 >= 0.5 * (c.max() - 1)
    pts = grid.coords()[inside]
    return {"max_c": float(c.max()), "bbox": [pts.min(0).tolist(), pts.max(0).tolist()],
            "centroid": pts.mean(0).tolist(), "front_face_z": float(pts[:, 2].min())}


def report(cfg, out):
    c, meta = io.read_array(out / "c_recon")
    grid = Grid3(**meta["grid"])
    io.write_vtk(out / "c_recon.vtk", c, grid)
    io.write_slices_csv(out / "slices.csv", c, grid)
    summary = summarize(c, grid)
    truth = out / "medium_true.json"
    if truth.exists():
        ct, tm = io.read_array(out / "medium_true")
        summary["truth"] = truth_summary(ct, Grid3(**tm["grid"]))
    io.dump_json(out / "summary.json", summary)
    return {"max_c": summary["max_c"], "isosurface_nodes": summary["isosurface_nodes"]}


STAGE_FUNCS = {"simulate": simulate, "propagate": propagate, "preprocess": preprocess, "invert": invert, "report": report}


def run_stage(name, cfg, out):
    return _run(name, STAGE_FUNCS[name], cfg, out)


def run_pipeline(cfg, out):
    return [run_stage(s, cfg, out) for s in STAGES]


def subtract(a, b, out):
    """Difference of two far-field datasets recorded on the same plane and wavenumbers."""
    va, ma = io.read_array(a)
    vb, mb = io.read_array(b)
    if va.shape != vb.shape or not np.allclose(ma.get("k", []), mb.get("k", []), rtol=0, atol=1e-12):
        raise ValueError("datasets differ in shape or wavenumbers")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_array(out / "far_field", va - vb, dict(ma, kind="difference"))


def run_probes(cfg, out):
    p = cfg["probes"]
    problem = DeskProblem.build(R=float(p["R"]), b=float(p["b"]), n=int(p["n"]), N=int(p["N"]), Nk=int(p["Nk"]),
                                window=tuple(cfg["frequency"]["window"]), src=cfg.source(),
                                r=float(cfg["inversion"]["r"]), eps=float(cfg["inversion"]["eps"]),
                                shapes=cfg.probe_shapes())
    rep = probe_theorems(problem, tuple(p["lams"]), int(p["pairs"]), float(p["radius"]), int(cfg["seed"]))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    io.dump_json(out / "probes.json", rep)
    return rep

"""Acceptance criteria. Every test prints one PASS/FAIL line with the measured
numbers before asserting, so ``pytest -s`` or the tee'd log reads as a report."""
import json
import shutil
import time

import numpy as np
import pytest

from convexcip.assembly import compute_Q
from convexcip.basis import build_basis
from convexcip.config import RunConfig
from convexcip.forward import SourceSpec
from convexcip.grid import FrequencyGrid, Grid3
from convexcip.inversion import CarlemanFunctional, CarlemanParams, carleman_weights, h2_norm, pinned_mask, qr_initialize
from convexcip.pipeline import STAGES, run_pipeline, run_stage
from convexcip.probes import DeskProblem, convexity_probe, probe_theorems
from convexcip.propagation import ComplexPlane, PlaneSpectrum, crop, inverse_dft, plane_dft, propagate, propagate_to_near

SRC = SourceSpec((0.1, 0.0, -9.0))


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print("\n[criterion %d] %s  %s: %s" % (number, "PASS" if ok else "FAIL", title, detail))
        return ok
    return emit


def test_criterion_1_basis(verdict):
    t0 = time.perf_counter()
    kg = FrequencyGrid.simpson(6.72, 9.45, 31)
    basis = build_basis(6, kg)
    gram = (basis.psi * kg.weights) @ basis.psi.T
    orth = float(np.abs(gram - np.eye(6)).max())
    diag = float(np.abs(np.diag(basis.S) - 1).max())
    lower = float(np.abs(np.tril(basis.S, -1)).max())
    dt = time.perf_counter() - t0
    ok = orth < 1e-8 and diag < 1e-8 and lower < 1e-8 and dt < 1.0
    detail = "orthonormality %.1e, S diagonal %.1e, S below diagonal %.1e (tol 1e-8), %.2f s (< 1 s)" % (orth, diag, lower, dt)
    assert verdict(1, "basis", ok, detail)


def test_criterion_2_gradient(verdict):
    t0 = time.perf_counter()
    grid = Grid3(1.0, 1.0, 11, 11, 11)
    basis = build_basis(3, FrequencyGrid.simpson(6.72, 9.45, 11))
    Q = compute_Q(basis, SRC, grid)
    mask = pinned_mask(grid)
    F = CarlemanFunctional(grid, basis.S, basis.P, Q, carleman_weights(grid, CarlemanParams(1.1, 5.5)), 1e-9,
                           mask=mask, pinned=np.zeros((3,) + grid.shape, dtype=complex))
    rng = np.random.default_rng(2024)
    V = F.with_pins(rng.standard_normal((3,) + grid.shape) + 1j * rng.standard_normal((3,) + grid.shape))
    G = F.gradient(V)
    t = 1e-6
    errs = []
    for _ in range(20):
        d = rng.standard_normal(V.shape) + 1j * rng.standard_normal(V.shape)
        d[:, mask] = 0
        analytic = np.vdot(G, d).real
        fd = (F.value(V + t * d) - F.value(V - t * d)) / (2 * t)
        errs.append(abs(analytic - fd) / abs(analytic))
    dt = time.perf_counter() - t0
    worst = max(errs)
    ok = worst < 1e-5 and dt < 30
    assert verdict(2, "gradient", ok, "worst relative error over 20 directions %.1e (tol 1e-5), %.1f s (< 30 s)" % (worst, dt))


def test_criterion_3_quasi_reversibility(verdict):
    t0 = time.perf_counter()
    grid = Grid3(1.0, 1.0, 21, 21, 21)
    basis = build_basis(3, FrequencyGrid.simpson(6.72, 9.45, 11))
    Q = compute_Q(basis, SRC, grid)
    # r = 1.5 keeps the weight on this unit box within e^-13 of its peak
    w = carleman_weights(grid, CarlemanParams(1.1, 1.5))
    X = grid.coords()
    x, y, z = X[..., 0], X[..., 1], X[..., 2]
    Vt = np.array([(1 + 1j * l) * np.sin(np.pi * (x + 1) / 2) * np.cos(y + 0.3 * l) * np.exp(0.5 * z) for l in range(3)])
    f = CarlemanFunctional(grid, basis.S, basis.P, Q, w, 1e-9, include_P=False).linear_op(Vt)
    F = CarlemanFunctional(grid, basis.S, basis.P, Q, w, 1e-9, mask=pinned_mask(grid), pinned=Vt.copy(), rhs=f,
                           include_P=False)
    V0 = qr_initialize(F)
    err = h2_norm(V0 - Vt, grid.h) / h2_norm(Vt, grid.h)
    dt = time.perf_counter() - t0
    ok = err < 0.05 and dt < 120
    assert verdict(3, "quasi-reversibility", ok, "discrete H2 relative error %.4f (< 0.05), %.1f s (< 120 s)" % (err, dt))


def _emitter_plane(k, z, half_width=40.0, n=401):
    # emitter mirrored above the domain so the field travels toward -z like the scattered wave
    xs = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    r = np.sqrt((X - 0.1) ** 2 + Y**2 + (z - 5.0) ** 2)
    return ComplexPlane(np.exp(1j * k * r) / (4 * np.pi * r), half_width, z)


def _lowpass(p, k):
    s = plane_dft(p, k)
    keep = s.rho1**2 + s.rho2**2 < (0.8 * k) ** 2
    return inverse_dft(PlaneSpectrum(np.where(keep, s.coeffs, 0), s.rho1, s.rho2, s.half_width, s.z, k))


def test_criterion_4_propagation(verdict):
    t0 = time.perf_counter()
    errs = []
    for k in (6.72, 9.45):
        near = propagate_to_near(_emitter_plane(k, -14.0), k, 14.0, 2.0)
        got = crop(_lowpass(near, k), 5.0).values
        want = crop(_lowpass(_emitter_plane(k, -2.0), k), 5.0).values
        errs.append(np.linalg.norm(got - want) / np.linalg.norm(want))
    rng = np.random.default_rng(0)
    p = ComplexPlane(rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64)), 5.0, -14.0)
    semi = np.abs(propagate(propagate(p, 8.0, 4.0), 8.0, 8.0).values - propagate(p, 8.0, 12.0).values).max()
    band = propagate(p, 8.0, 0.0)
    ident = np.abs(propagate(band, 8.0, 0.0).values - band.values).max()
    dt = time.perf_counter() - t0
    ok = max(errs) < 0.05 and semi < 1e-10 and ident < 1e-10 and dt < 10
    detail = "band L2 error %.4f / %.4f at k = 6.72 / 9.45 (< 0.05), semigroup %.1e, zero distance %.1e (< 1e-10), %.1f s (< 10 s)" % (
        errs[0], errs[1], semi, ident, dt)
    assert verdict(4, "propagation", ok, detail)


def test_criterion_5_theorem_probes(verdict):
    t0 = time.perf_counter()
    problem = DeskProblem.build(shapes=RunConfig().probe_shapes())
    rep = probe_theorems(problem, lams=(0.1, 1.1, 3.0), pairs=200, seed=0)
    dt = time.perf_counter() - t0
    quad = rep["convexity_quadratic"]["fraction"]
    fr = [c["fraction"] for c in rep["convexity"]]
    s = rep["contraction"]["varsigma"]
    # context only: where the trend goes beyond the tested range
    beyond = convexity_probe(problem, 10.0, pairs=200, seed=0)["fraction"]
    ok = quad == 1.0 and rep["convexity_monotone"] and s is not None and 0 < s < 1 and dt < 300
    detail = ("quadratic-only convex on %.0f%% of 200 pairs; convex fractions %s at lambda 0.1/1.1/3, monotone %s "
              "(lambda 10 gives %.3f); varsigma %.5f; %.0f s (< 300 s)") % (
        100 * quad, fr, rep["convexity_monotone"], beyond, s if s is not None else float("nan"), dt)
    assert verdict(5, "theorem probes", ok, detail)


def test_criterion_6_cube_end_to_end(cube_run, verdict):
    cfg, out, records = cube_run
    summary = json.loads((out / "summary.json").read_text())
    h = cfg.grid().h
    true_centroid = np.array([0.0, 0.0, -1.0])
    true_front = -1.5
    wall = sum(r["wall_time_s"] for r in records)
    centroid = summary["centroid"]
    front = summary["front_face_z"]
    ok = centroid is not None
    if ok:
        dxy = np.abs(np.array(centroid[:2]) - true_centroid[:2])
        dz = abs(front - true_front)
        ok = bool(np.all(dxy <= h + 1e-12) and dz <= 2 * h + 1e-12 and wall < 1200)
        detail = "centroid (%.3f, %.3f, %.3f), |dx|, |dy| = %.3f, %.3f (<= %.1f); front face %.2f vs %.2f (<= %.1f); max c %.2f; %.0f s (< 1200 s)" % (
            *centroid, dxy[0], dxy[1], h, front, true_front, 2 * h, summary["max_c"], wall)
    else:
        detail = "empty isosurface"
    assert verdict(6, "cube end to end", ok, detail)


def test_criterion_7_null_case(tmp_path, verdict):
    t0 = time.perf_counter()
    out = tmp_path / "null"
    run_pipeline(RunConfig(), out)
    from convexcip import io

    c, _ = io.read_array(out / "c_recon")
    dev = float(np.abs(c - 1).max())
    dt = time.perf_counter() - t0
    ok = dev <= 1e-6 and dt < 300
    assert verdict(7, "null case", ok, "max |c - 1| = %.1e (<= 1e-6), %.0f s (< 300 s)" % (dev, dt))


def _strip_wall_times(text):
    manifest = json.loads(text)
    for r in manifest["stages"]:
        r.pop("wall_time_s")
    return manifest


def test_criterion_8_determinism(cube_run, tmp_path, verdict):
    cfg, out, _ = cube_run
    again = tmp_path / "again"
    for stage in STAGES:
        run_stage(stage, cfg, again)
    names = sorted(p.name for p in out.iterdir())
    differing = [n for n in names if n != "manifest.json" and (out / n).read_bytes() != (again / n).read_bytes()]
    same_manifest = _strip_wall_times((out / "manifest.json").read_text()) == _strip_wall_times(
        (again / "manifest.json").read_text())
    # a single stage rerun in place overwrites with identical bytes
    inplace = tmp_path / "inplace"
    shutil.copytree(again, inplace)
    run_stage("invert", cfg, inplace)
    inplace_same = all((inplace / n).read_bytes() == (again / n).read_bytes()
                       for n in ("c_recon.bin", "c_recon.json", "descent.csv", "boundary.bin"))
    ok = not differing and same_manifest and inplace_same and names == sorted(p.name for p in again.iterdir())
    detail = "%d files compared, differing %s; manifest equal apart from wall times: %s; in-place rerun identical: %s" % (
        len(names), differing or "none", same_manifest, inplace_same)
    assert verdict(8, "determinism", ok, detail)

"""Synthetic data from the Lippmann-Schwinger equation.

The volume integral is discretized by the midpoint rule on the grid cells
(volume h^3); the weakly singular self-cell term is replaced by the integral of
the Green kernel over the ball of equal volume. Only the cells where c != 1
carry unknowns, and the discrete operator is applied by FFT convolution.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .grid import FrequencyGrid, Grid3

SOLVER_TOL = 1e-8


class GeometryError(ValueError):
    pass


class SingularityError(ValueError):
    pass


class ForwardSolverError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__("%s (relative residual %.3e)" % (message, residual))
        self.residual = residual


@dataclass(frozen=True, eq=False)
class MediumModel:
    grid: Grid3
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != self.grid.shape:
            raise ValueError("medium shape %s does not match grid %s" % (c.shape, self.grid.shape))
        if np.any(c < 1.0):
            raise ValueError("dielectric constant must be >= 1")
        faces = np.concatenate(
            [c[0].ravel(), c[-1].ravel(), c[:, 0].ravel(), c[:, -1].ravel(), c[..., 0].ravel(), c[..., -1].ravel()]
        )
        if np.any(faces != 1.0):
            raise ValueError("c - 1 must vanish on the boundary faces")
        object.__setattr__(self, "c", c)

    @classmethod
    def vacuum(cls, grid):
        return cls(grid, np.ones(grid.shape))


@dataclass(frozen=True)
class SourceSpec:
    position: tuple = (0.1, 0.0, -9.0)

    def check_outside(self, grid):
        x, y, z = self.position
        if abs(x) <= grid.R and abs(y) <= grid.R and abs(z) <= grid.b:
            raise GeometryError("source %s lies inside the closed domain" % (self.position,))


@dataclass(frozen=True, eq=False)
class ScatterDataset:
    """Total field on the plane z = -D, one plane per wavenumber node."""

    source: SourceSpec
    kgrid: FrequencyGrid
    D: float
    half_width: float
    planes: np.ndarray

    def __post_init__(self):
        if self.planes.shape[0] != self.kgrid.Nk:
            raise ValueError("one plane per wavenumber expected")

    @property
    def plane_z(self):
        return -self.D

    def plane_coords(self):
        n = self.planes.shape[1]
        return np.linspace(-self.half_width, self.half_width, n)


def green(k, r):
    return np.exp(1j * k * r) / (4 * np.pi * r)


def ball_self_integral(k, h):
    """Integral of the Green kernel over the ball with the volume of one cell."""
    a = h * (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)
    return (np.exp(1j * k * a) * (1 - 1j * k * a) - 1) / k**2


def incident_wave(x, k, src):
    """Point-source field exp(ik|x - x_a|) / (4 pi |x - x_a|); x has shape (..., 3)."""
    d = np.asarray(x, dtype=float) - np.asarray(src.position, dtype=float)
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r < 1e-12):
        raise SingularityError("incident wave evaluated at the source position")
    return green(k, r)


def incident_log_gradient(x, k, src):
    """grad(u_i)/u_i = (ik - 1/rho) rho_hat, shape (..., 3)."""
    d = np.asarray(x, dtype=float) - np.asarray(src.position, dtype=float)
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r < 1e-12):
        raise SingularityError("incident wave evaluated at the source position")
    return np.asarray(1j * k - 1.0 / r)[..., None] * (d / r[..., None])


def _fft_shape(shape):
    from scipy.fft import next_fast_len

    return tuple(next_fast_len(n) for n in shape)


class _ContrastSystem:
    """Discrete LS operator restricted to the bounding box of supp(c - 1)."""

    def __init__(self, medium, k):
        grid = medium.grid
        contrast = medium.c - 1.0
        idx = np.nonzero(contrast)
        self.grid = grid
        self.k = k
        self.empty = idx[0].size == 0
        if self.empty:
            return
        lo = [int(i.min()) for i in idx]
        hi = [int(i.max()) + 1 for i in idx]
        self.box = tuple(slice(a, b) for a, b in zip(lo, hi))
        self.offset = np.array(lo)
        self.q = contrast[self.box]
        self.bshape = self.q.shape
        self.coords = grid.coords()[self.box]
        h = grid.h
        # kernel on all offsets -(n-1)..(n-1) per axis
        axes = [np.arange(-(n - 1), n) * h for n in self.bshape]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        r = np.sqrt(X**2 + Y**2 + Z**2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ker = green(k, r) * h**3
        centre = tuple(n - 1 for n in self.bshape)
        ker[centre] = ball_self_integral(k, h)
        ker *= k**2
        self.fshape = _fft_shape([2 * n - 1 for n in self.bshape])
        self.kernel_hat = np.fft.fftn(ker, self.fshape, axes=(0, 1, 2))

    def apply_K(self, w):
        """k^2 * sum over box cells of G (x - x') w(x') h^3, evaluated on the box."""
        full = np.fft.ifftn(self.kernel_hat * np.fft.fftn(w, self.fshape, axes=(0, 1, 2)))
        sl = tuple(slice(n - 1, 2 * n - 1) for n in self.bshape)
        return full[sl]

    def matvec(self, u):
        u = u.reshape(self.bshape)
        return (u - self.apply_K(self.q * u)).ravel()


def _solve_box(system, src, tol=SOLVER_TOL, maxiter=200, restart=300):
    ui = incident_wave(system.coords, system.k, src)
    n = ui.size
    A = LinearOperator((n, n), matvec=system.matvec, dtype=complex)
    u, _ = gmres(A, ui.ravel(), x0=ui.ravel(), rtol=tol * 1e-2, atol=0.0, restart=min(n, restart), maxiter=maxiter)
    res = np.linalg.norm(system.matvec(u) - ui.ravel()) / np.linalg.norm(ui)
    if not np.isfinite(res) or res > tol:
        raise ForwardSolverError("Lippmann-Schwinger iteration did not converge", res)
    return u.reshape(system.bshape)


def _field_from_box(system, u_box, points):
    """Scattered field k^2 sum G (x - x') (c - 1) u h^3 at off-grid points (M, 3)."""
    k, h = system.k, system.grid.h
    sources = system.coords.reshape(-1, 3)
    dens = (system.q * u_box).ravel() * (k**2 * h**3)
    out = np.empty(points.shape[0], dtype=complex)
    chunk = max(1, 2_000_000 // max(1, sources.shape[0]))
    for s in range(0, points.shape[0], chunk):
        p = points[s : s + chunk]
        r = np.sqrt(((p[:, None, :] - sources[None, :, :]) ** 2).sum(-1))
        out[s : s + chunk] = green(k, r) @ dens
    return out


def apply_volume_operator(system, w):
    """Discrete LS integral of density w (on the box) evaluated at every grid node."""
    grid, h, k = system.grid, system.grid.h, system.k
    shape = grid.shape
    bs = system.bshape
    off = system.offset
    # offsets d = i - off - j range over [-(off + b - 1), N - 1 - off]
    axes = [np.arange(-(o + b - 1), n - o) * h for o, b, n in zip(off, bs, shape)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    r = np.sqrt(X**2 + Y**2 + Z**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ker = green(k, r) * h**3
    zero = tuple(o + b - 1 for o, b in zip(off, bs))
    ker[zero] = ball_self_integral(k, h)
    ker *= k**2
    fshape = _fft_shape([a.size + b - 1 for a, b in zip(axes, bs)])
    full = np.fft.ifftn(np.fft.fftn(ker, fshape, axes=(0, 1, 2)) * np.fft.fftn(w, fshape, axes=(0, 1, 2)))
    sl = tuple(slice(b - 1, b - 1 + n) for b, n in zip(bs, shape))
    return full[sl]


def solve_total_wave(medium, k, src, tol=SOLVER_TOL):
    """Total field u on every node of the medium's grid."""
    src.check_outside(medium.grid)
    ui = incident_wave(medium.grid.coords(), k, src)
    system = _ContrastSystem(medium, k)
    if system.empty:
        return ui
    u_box = _solve_box(system, src, tol)
    return ui + apply_volume_operator(system, system.q * u_box)


def scattered_at(medium, k, src, points, tol=SOLVER_TOL):
    """Scattered field at arbitrary points of shape (..., 3), e.g. outside the domain."""
    src.check_outside(medium.grid)
    points = np.asarray(points, dtype=float)
    system = _ContrastSystem(medium, k)
    if system.empty:
        return np.zeros(points.shape[:-1], dtype=complex)
    u_box = _solve_box(system, src, tol)
    return _field_from_box(system, u_box, points.reshape(-1, 3)).reshape(points.shape[:-1])


def sample_plane(medium, k, src, z, half_width, n, tol=SOLVER_TOL):
    """Incident and scattered fields on the n x n plane at height z."""
    xs = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X, Y, np.full_like(X, z)], axis=-1)
    return incident_wave(pts, k, src), scattered_at(medium, k, src, pts, tol)


def add_noise(planes, noise_pct, seed):
    """Multiplicative complex Gaussian noise with RMS relative size noise_pct %."""
    if noise_pct == 0:
        return planes.copy()
    rng = np.random.default_rng(seed)
    xi = (rng.standard_normal(planes.shape) + 1j * rng.standard_normal(planes.shape)) / math.sqrt(2.0)
    return planes * (1.0 + 0.01 * noise_pct * xi)


def sample_far_plane(medium, kgrid, src, D, noise_pct=0.0, seed=0, half_width=None, n=None, workers=1):
    """Noisy total field on z = -D for every node of ``kgrid``.

    The plane defaults to the x-y extent and node count of the medium grid.
    """
    grid = medium.grid
    if D <= grid.b:
        raise GeometryError("far plane must lie below the domain (D > b)")
    half_width = grid.R if half_width is None else half_width
    n = grid.Nx if n is None else n

    def one(k):
        ui, us = sample_plane(medium, k, src, -D, half_width, n)
        return ui + us

    ks = list(kgrid.nodes)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            planes = list(pool.map(one, ks))
    else:
        planes = [one(k) for k in ks]
    planes = add_noise(np.array(planes), noise_pct, seed)
    return ScatterDataset(src, kgrid, float(D), float(half_width), planes)

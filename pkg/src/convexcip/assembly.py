"""Inputs of the coupled elliptic system: the log-ratio data v on the
measurement plane, its Fourier coefficients in the frequency basis, and the
coefficient field Q built from the incident wave."""
from dataclasses import dataclass

import numpy as np

from .basis import BasisMismatchError
from .forward import incident_log_gradient

MIN_FIELD = 1e-12


class DegenerateFieldError(ValueError):
    pass


def log_ratio_continuous(u, ui, k):
    """v = log(u / u_i) / k^2 with the phase unwrapped along k for every pixel.

    ``u`` and ``ui`` have the wavenumber on axis 0 and ``k`` is increasing.
    The lowest k keeps the principal branch.
    """
    u = np.asarray(u, dtype=complex)
    ui = np.asarray(ui, dtype=complex)
    k = np.asarray(k, dtype=float)
    for name, arr in (("u", u), ("u_i", ui)):
        bad = np.abs(arr) <= MIN_FIELD
        if np.any(bad):
            pos = np.argwhere(bad)[0]
            raise DegenerateFieldError("|%s| below %.0e at k=%.6g, pixel %s" % (name, MIN_FIELD, k[pos[0]], tuple(int(i) for i in pos[1:])))
    # phase of u * conj(u_i) written out so that u == u_i gives exactly zero
    cross = u.imag * ui.real - u.real * ui.imag
    dot = u.real * ui.real + u.imag * ui.imag
    phase = np.unwrap(np.arctan2(cross, dot), axis=0)
    shape = (-1,) + (1,) * (u.ndim - 1)
    return (np.log(np.abs(u)) - np.log(np.abs(ui)) + 1j * phase) / k.reshape(shape) ** 2


def dz_log_ratio(F0, F1, ui, dz_ui, k):
    """z-derivative of v on the plane: (F1/F0 - dz u_i / u_i) / k^2."""
    k = np.asarray(k, dtype=float).reshape((-1,) + (1,) * (np.ndim(F0) - 1))
    return (F1 / F0 - dz_ui / ui) / k**2


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Dirichlet coefficients g0[n] on the measurement plane (zero on the rest
    of the boundary) and Neumann-type coefficients g1[n] on the same plane."""

    g0: np.ndarray
    g1: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.g0)) and np.all(np.isfinite(self.g1))):
            raise ValueError("boundary data contain non-finite values")

    @property
    def N(self):
        return self.g0.shape[0]

    def dirichlet_volume(self, grid):
        """g0 spread onto the boundary nodes of the grid (zero off the plane)."""
        out = np.zeros((self.N,) + grid.shape, dtype=complex)
        out[:, 1:-1, 1:-1, 0] = self.g0[:, 1:-1, 1:-1]
        return out


def boundary_coeffs(v, dzv, basis, kgrid=None):
    """Project the plane data v and dz v onto each psi_n.

    Samples on the plane's edge belong to the side faces of the prism, where
    the completed data are zero, so they are cleared.
    """
    if kgrid is not None and not basis.kgrid.same_as(kgrid):
        raise BasisMismatchError("data and basis use different frequency grids")
    if np.shape(v)[0] != basis.kgrid.Nk or np.shape(dzv)[0] != basis.kgrid.Nk:
        raise ValueError("need one plane per quadrature node")
    g0 = basis.project(v)
    g1 = basis.project(dzv)
    for g in (g0, g1):
        g[:, 0, :] = 0
        g[:, -1, :] = 0
        g[:, :, 0] = 0
        g[:, :, -1] = 0
    return BoundaryData(g0, g1)


@dataclass(frozen=True, eq=False)
class QField:
    """Q[l, n](x) = rho_hat(x) * (A[l, n] + B[l, n] / rho(x)).

    With grad(u_i)/u_i = (ik - 1/rho) rho_hat and d/dk of it = i rho_hat, every
    Q[l, n] is parallel to rho_hat, so only the two N x N matrices and the
    geometry are stored.
    """

    A: np.ndarray
    B: np.ndarray
    rho_hat: np.ndarray  # (3, Nx, Ny, Nz)
    inv_rho: np.ndarray  # (Nx, Ny, Nz)

    @property
    def N(self):
        return self.A.shape[0]

    def full(self):
        """Materialized Q with shape (N, N, 3, Nx, Ny, Nz)."""
        scal = self.A[:, :, None, None, None] + self.B[:, :, None, None, None] * self.inv_rho
        return scal[:, :, None] * self.rho_hat[None, None]

    def apply(self, grads):
        """sum_n Q[l, n] . grads[n] for grads of shape (N, 3, Nx, Ny, Nz)."""
        d = np.einsum("cxyz,ncxyz->nxyz", self.rho_hat, grads)
        return np.einsum("ln,nxyz->lxyz", self.A, d) + self.inv_rho * np.einsum("ln,nxyz->lxyz", self.B, d)

    def apply_adjoint(self, r):
        """Adjoint of ``apply``: maps (N, Nx, Ny, Nz) residuals to (N, 3, ...)."""
        s = np.einsum("ln,lxyz->nxyz", self.A.conj(), r) + self.inv_rho * np.einsum("ln,lxyz->nxyz", self.B.conj(), r)
        return s[:, None] * self.rho_hat[None]


def compute_Q(basis, src, grid):
    """Coefficient field of the first-order term, evaluated in closed form."""
    src.check_outside(grid)
    k = basis.kgrid.nodes
    w = basis.kgrid.weights
    psi, dpsi = basis.psi, basis.dpsi
    # Q = 2 rho_hat [ i int k psi_n' psi_l - (1/rho) int psi_n' psi_l + i int psi_n psi_l ]
    K1 = (psi * w * k) @ dpsi.T
    M0 = (psi * w) @ psi.T
    A = 2j * (K1 + M0)
    B = -2.0 * basis.S.astype(complex)
    d = grid.coords() - np.asarray(src.position, dtype=float)
    rho = np.sqrt((d**2).sum(-1))
    rho_hat = np.moveaxis(d / rho[..., None], -1, 0)
    return QField(A, B, rho_hat, 1.0 / rho)


def incident_log_gradients(grid, k, src):
    """grad(u_i)/u_i on the grid for every k; shape (Nk, 3, Nx, Ny, Nz)."""
    pts = grid.coords()
    return np.array([np.moveaxis(incident_log_gradient(pts, kk, src), -1, 0) for kk in np.atleast_1d(k)])


"""Orthonormal basis of L^2(k_lo, k_hi) built from exponentially weighted
monomials, together with the integral tensors S and P of the coupled system.
"""
from dataclasses import dataclass

import numpy as np

from .grid import FrequencyGrid

CONDITION_LIMIT = 1e12


class IllConditionedBasisError(ValueError):
    def __init__(self, m, cond):
        super().__init__(
            "starting functions are numerically dependent at m=%d (condition %.3e)" % (m, cond)
        )
        self.m = m
        self.cond = cond


class BasisMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Basis:
    """Values ``psi[n, q]`` and derivatives ``dpsi[n, q]`` at the quadrature nodes.

    ``coeffs`` is the lower-triangular map from the starting functions to the
    orthonormal ones (``psi = coeffs @ phi``); derivatives reuse it.
    """

    N: int
    kgrid: FrequencyGrid
    psi: np.ndarray
    dpsi: np.ndarray
    coeffs: np.ndarray
    S: np.ndarray
    P: np.ndarray

    def project(self, values, axis=0):
        """Fourier coefficients of ``values`` (k along ``axis``) against each psi_n."""
        values = np.moveaxis(np.asarray(values), axis, -1)
        return np.moveaxis(values @ (self.psi * self.kgrid.weights).T, -1, 0)

    def synthesize(self, coeffs):
        """Evaluate sum_n coeffs[n] * psi_n(k) at every node; k becomes axis 0."""
        coeffs = np.asarray(coeffs)
        return np.tensordot(self.psi.T, coeffs, axes=(1, 0))


def starting_functions(N, kgrid, k=None):
    """Raw starting set k^(m-1) exp(k - (k_hi + k_lo)/2) and its k-derivative."""
    k = kgrid.nodes if k is None else np.asarray(k, dtype=float)
    e = np.exp(k - (kgrid.k_hi + kgrid.k_lo) / 2)
    phi = np.array([k**m * e for m in range(N)])
    dphi = np.array([(m / k + 1.0) * phi[m] for m in range(N)])
    return phi, dphi


def _centred_functions(N, kgrid, k=None):
    # same nested spans as the raw set but far better conditioned
    k = kgrid.nodes if k is None else np.asarray(k, dtype=float)
    mid = (kgrid.k_hi + kgrid.k_lo) / 2
    half = (kgrid.k_hi - kgrid.k_lo) / 2
    t = (k - mid) / half
    e = np.exp(k - mid)
    phi = np.array([t**m * e for m in range(N)])
    dphi = np.empty_like(phi)
    for m in range(N):
        lower = (m / half) * t ** (m - 1) * e if m > 0 else 0.0
        dphi[m] = lower + phi[m]
    return phi, dphi


def monomial_gram(N, kgrid):
    """Gram matrix of the raw starting functions under the quadrature."""
    phi, _ = starting_functions(N, kgrid)
    return (phi * kgrid.weights) @ phi.T


def build_basis(N, kgrid):
    """Orthonormalize the starting functions with modified Gram-Schmidt.

    Each vector is orthogonalized twice against the previous ones, which keeps
    the discrete orthonormality at rounding level. Raises
    ``IllConditionedBasisError`` when the (centred) starting set is numerically
    dependent.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    w = kgrid.weights
    phi, dphi = _centred_functions(N, kgrid)
    sw = np.sqrt(np.abs(w))
    for m in range(2, N + 1):
        # fewer nodes than functions leaves the set rank deficient
        cond = np.linalg.cond((phi[:m] * sw).T) if m <= kgrid.Nk else np.inf
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise IllConditionedBasisError(m, cond)

    vals = phi.copy()
    coeffs = np.eye(N)
    for n in range(N):
        for _ in range(2):
            for j in range(n):
                r = np.dot(vals[n] * w, vals[j])
                vals[n] -= r * vals[j]
                coeffs[n] -= r * coeffs[j]
        nrm = np.sqrt(np.dot(vals[n] * w, vals[n]))
        vals[n] /= nrm
        coeffs[n] /= nrm

    psi = coeffs @ phi
    dpsi = coeffs @ dphi
    basis = Basis(N, kgrid, psi, dpsi, coeffs, None, None)
    S = compute_S(basis, kgrid)
    P = compute_P(basis, kgrid)
    object.__setattr__(basis, "S", S)
    object.__setattr__(basis, "P", P)
    return basis


def evaluate(basis, k):
    """Psi_n and Psi_n' at arbitrary wavenumbers ``k`` (analytic, not quadrature)."""
    phi, dphi = _centred_functions(basis.N, basis.kgrid, k)
    return basis.coeffs @ phi, basis.coeffs @ dphi


def _check_grid(basis, kgrid):
    if kgrid is not None and not basis.kgrid.same_as(kgrid):
        raise BasisMismatchError("basis was built on a different frequency grid")


def compute_S(basis, kgrid=None):
    """S[l, n] = integral of psi_n' psi_l."""
    _check_grid(basis, kgrid)
    w = basis.kgrid.weights
    return (basis.psi * w) @ basis.dpsi.T


def compute_P(basis, kgrid=None):
    """P[l, n, m] = 2 * integral of (k^2 psi_n psi_m' + k psi_n psi_m) psi_l."""
    _check_grid(basis, kgrid)
    k = basis.kgrid.nodes
    w = basis.kgrid.weights
    psi, dpsi = basis.psi, basis.dpsi
    inner = k**2 * psi[:, None, :] * dpsi[None, :, :] + k * psi[:, None, :] * psi[None, :, :]
    return 2.0 * np.einsum("lq,nmq,q->lnm", psi, inner, w)

"""Angular-spectrum transport of scattered-field data between planes z = const.

Below the domain the scattered field travels toward -z, so each propagating
plane-wave mode behaves like exp(-i kz (z + b)) with kz = sqrt(k^2 - |rho|^2).
Evanescent modes (|rho| >= k) are discarded.
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ComplexPlane:
    """Samples on the square [-half_width, half_width]^2 at height z."""

    values: np.ndarray
    half_width: float
    z: float = 0.0

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def spacing(self):
        return 2 * self.half_width / (self.n - 1)

    def coords(self):
        return np.linspace(-self.half_width, self.half_width, self.n)

    def points(self):
        xs = self.coords()
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        return np.stack([X, Y, np.full_like(X, self.z)], axis=-1)


@dataclass(frozen=True, eq=False)
class PlaneSpectrum:
    coeffs: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    half_width: float
    z: float
    k: float = None

    def band(self, k=None):
        """Boolean mask of propagating modes rho1^2 + rho2^2 < k^2."""
        k = self.k if k is None else k
        return self.rho1**2 + self.rho2**2 < k**2

    def kz(self, k=None):
        k = self.k if k is None else k
        return np.sqrt(np.maximum(k**2 - self.rho1**2 - self.rho2**2, 0.0))


def spatial_frequencies(n, spacing):
    rho = 2 * np.pi * np.fft.fftfreq(n, d=spacing)
    return np.meshgrid(rho, rho, indexing="ij")


def plane_dft(p, k=None):
    """Unitary 2-D DFT of a plane."""
    r1, r2 = spatial_frequencies(p.n, p.spacing)
    coeffs = np.fft.fft2(p.values, norm="ortho")
    return PlaneSpectrum(coeffs, r1, r2, p.half_width, p.z, k)


def inverse_dft(s):
    values = np.fft.ifft2(s.coeffs, norm="ortho")
    return ComplexPlane(values, s.half_width, s.z)


def band_limit(p, k):
    s = plane_dft(p, k)
    return inverse_dft(PlaneSpectrum(np.where(s.band(), s.coeffs, 0.0), s.rho1, s.rho2, s.half_width, s.z, k))


def _padded(p, pad):
    if pad <= 1:
        return p, 0
    n = p.n
    m = int(pad * n) | 1  # odd keeps the centre node centred
    extra = (m - n) // 2
    vals = np.zeros((m, m), dtype=complex)
    vals[extra : extra + n, extra : extra + n] = p.values
    return ComplexPlane(vals, p.half_width + extra * p.spacing, p.z), extra


def propagate(p, k, distance, pad=1):
    """Move a downward-travelling scattered field up by ``distance`` (toward +z).

    Propagating modes pick up exp(-i kz distance); evanescent modes are zeroed.
    ``pad`` > 1 zero-pads the plane before the transform to reduce wrap-around.
    """
    extra = 0
    q = p
    if pad > 1:
        q, extra = _padded(p, pad)
    s = plane_dft(q, k)
    band = s.band()
    phase = np.exp(-1j * s.kz() * distance)
    out = inverse_dft(PlaneSpectrum(np.where(band, s.coeffs * phase, 0.0), s.rho1, s.rho2, q.half_width, q.z, k))
    vals = out.values[extra : extra + p.n, extra : extra + p.n] if extra else out.values
    return ComplexPlane(vals, p.half_width, p.z + distance)


def propagate_to_near(far, k, D, b, pad=1):
    """Scattered field on z = -b from scattered-field samples on z = -D."""
    if D <= b:
        raise ValueError("far plane must lie below the near plane (D > b)")
    near = propagate(ComplexPlane(far.values, far.half_width, -D), k, D - b, pad=pad)
    return ComplexPlane(near.values, far.half_width, -b)


def dz_spectral(near, k):
    """z-derivative of a downward-travelling field: multiply each mode by -i kz."""
    s = plane_dft(near, k)
    d = np.where(s.band(), -1j * s.kz() * s.coeffs, 0.0)
    out = inverse_dft(PlaneSpectrum(d, s.rho1, s.rho2, s.half_width, s.z, k))
    return ComplexPlane(out.values, near.half_width, near.z)


def crop(p, half_width):
    """Central sub-plane with the given half width (same spacing)."""
    h = p.spacing
    m = int(round(half_width / h))
    c = p.n // 2
    return ComplexPlane(p.values[c - m : c + m + 1, c - m : c + m + 1], m * h, p.z)

"""Uniform grids on the prism (-R,R)^2 x (-b,b), finite-difference stencils,
discrete Sobolev norms and the frequency/wavenumber conversion.

All lengths are dimensionless (multiples of 10 cm). Volumes are numpy arrays
whose last three axes are (x, y, z); leading axes are treated as a batch.
"""
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_DIMLESS = 2997924580.0


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid3:
    """Uniform isotropic grid on (-R,R) x (-R,R) x (-b,b), endpoints included."""

    R: float
    b: float
    Nx: int
    Ny: int
    Nz: int

    def __post_init__(self):
        if min(self.Nx, self.Ny, self.Nz) < 3:
            raise GridError("need at least 3 points per axis, got %s" % (self.shape,))
        hx = 2 * self.R / (self.Nx - 1)
        hy = 2 * self.R / (self.Ny - 1)
        hz = 2 * self.b / (self.Nz - 1)
        if abs(hx - hy) > 1e-12 or abs(hx - hz) > 1e-12:
            raise GridError("spacing is not isotropic: %g %g %g" % (hx, hy, hz))

    @classmethod
    def from_spacing(cls, R, b, h):
        nx = int(round(2 * R / h)) + 1
        nz = int(round(2 * b / h)) + 1
        return cls(float(R), float(b), nx, nx, nz)

    @property
    def h(self):
        return 2 * self.R / (self.Nx - 1)

    @property
    def shape(self):
        return (self.Nx, self.Ny, self.Nz)

    @property
    def x(self):
        return np.linspace(-self.R, self.R, self.Nx)

    @property
    def y(self):
        return np.linspace(-self.R, self.R, self.Ny)

    @property
    def z(self):
        return np.linspace(-self.b, self.b, self.Nz)

    def coords(self):
        """Array of shape (Nx, Ny, Nz, 3) with the node coordinates."""
        X, Y, Z = np.meshgrid(self.x, self.y, self.z, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    def index_of(self, point):
        """Nearest node index for a point (x, y, z)."""
        p = np.asarray(point, dtype=float)
        lo = np.array([-self.R, -self.R, -self.b])
        idx = np.rint((p - lo) / self.h).astype(int)
        return tuple(int(np.clip(i, 0, n - 1)) for i, n in zip(idx, self.shape))

    def point_of(self, index):
        i, j, l = index
        return np.array([self.x[i], self.y[j], self.z[l]])

    def refined(self, factor):
        return Grid3.from_spacing(self.R, self.b, self.h / factor)

    def interior_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1, 1:-1] = True
        return m

    def to_dict(self):
        return {"R": self.R, "b": self.b, "Nx": self.Nx, "Ny": self.Ny, "Nz": self.Nz}


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Wavenumber samples on [k_lo, k_hi] with quadrature weights.

    ``simpson`` builds the composite Simpson rule (exact for cubics); arbitrary
    node/weight pairs are accepted so the rule can be permuted or replaced.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if nodes.min() <= 0:
            raise ValueError("wavenumbers must be positive")
        if nodes.max() <= nodes.min():
            raise ValueError("need k_lo < k_hi")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def simpson(cls, k_lo, k_hi, Nk=31):
        if Nk < 3 or Nk % 2 == 0:
            raise ValueError("composite Simpson needs an odd sample count >= 3, got %d" % Nk)
        if not 0 < k_lo < k_hi:
            raise ValueError("need 0 < k_lo < k_hi")
        k = np.linspace(k_lo, k_hi, Nk)
        w = np.ones(Nk)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= (k[1] - k[0]) / 3.0
        return cls(k, w)

    @property
    def k_lo(self):
        return float(self.nodes.min())

    @property
    def k_hi(self):
        return float(self.nodes.max())

    @property
    def Nk(self):
        return self.nodes.size

    def integrate(self, values, axis=-1):
        values = np.moveaxis(np.asarray(values), axis, -1)
        return values @ self.weights

    def same_as(self, other):
        return (
            self.Nk == other.Nk
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )


def _check(f):
    if f.ndim < 3 or min(f.shape[-3:]) < 3:
        raise GridError("finite differences need a volume with >= 3 points per axis")


def _shift(f, axis, step):
    """f evaluated at index +step along ``axis`` for the interior block."""
    sl = [slice(None)] * f.ndim
    for ax in (-3, -2, -1):
        sl[ax] = slice(1, -1)
    sl[axis] = slice(1 + step, f.shape[axis] - 1 + step)
    return f[tuple(sl)]


def _interior(ndim):
    sl = [slice(None)] * ndim
    for ax in (-3, -2, -1):
        sl[ax] = slice(1, -1)
    return tuple(sl)


def laplacian_fd(f, h):
    """7-point Laplacian at interior nodes, zero on the boundary."""
    f = np.asarray(f)
    _check(f)
    out = np.zeros_like(f)
    c = f[_interior(f.ndim)]
    acc = -6.0 * c
    for ax in (-3, -2, -1):
        acc = acc + _shift(f, ax, 1) + _shift(f, ax, -1)
    out[_interior(f.ndim)] = acc / h**2
    return out


def gradient_fd(f, h):
    """Central differences at interior nodes; returns shape (3, *f.shape)."""
    f = np.asarray(f)
    _check(f)
    out = np.zeros((3,) + f.shape, dtype=f.dtype if np.iscomplexobj(f) else float)
    for n, ax in enumerate((-3, -2, -1)):
        out[n][_interior(f.ndim)] = (_shift(f, ax, 1) - _shift(f, ax, -1)) / (2 * h)
    return out


def _zero_boundary(y):
    m = np.zeros_like(y)
    m[_interior(y.ndim)] = y[_interior(y.ndim)]
    return m


def _padded_shift(y, axis, step):
    """y[i + step] along axis with zero extension, same shape as y."""
    out = np.zeros_like(y)
    n = y.shape[axis]
    src = [slice(None)] * y.ndim
    dst = [slice(None)] * y.ndim
    if step > 0:
        src[axis] = slice(step, n)
        dst[axis] = slice(0, n - step)
    else:
        src[axis] = slice(0, n + step)
        dst[axis] = slice(-step, n)
    out[tuple(dst)] = y[tuple(src)]
    return out


def laplacian_fd_adjoint(y, h):
    """Transpose of ``laplacian_fd`` as a linear map on node values."""
    y = _zero_boundary(np.asarray(y))
    acc = -6.0 * y
    for ax in (-3, -2, -1):
        acc = acc + _padded_shift(y, ax, 1) + _padded_shift(y, ax, -1)
    return acc / h**2


def gradient_fd_adjoint(g, h):
    """Transpose of ``gradient_fd``: maps a (3, ...) field back to node values."""
    g = np.asarray(g)
    out = None
    for n, ax in enumerate((-3, -2, -1)):
        y = _zero_boundary(g[n])
        term = (_padded_shift(y, ax, -1) - _padded_shift(y, ax, 1)) / (2 * h)
        out = term if out is None else out + term
    return out


def h2_norm_sq(f, h):
    """Discrete H^2 norm squared: h^3 * sum(|f|^2 + |grad f|^2 + |lap f|^2)."""
    f = np.asarray(f)
    g = gradient_fd(f, h)
    lap = laplacian_fd(f, h)
    return float(h**3 * (np.sum(np.abs(f) ** 2) + np.sum(np.abs(g) ** 2) + np.sum(np.abs(lap) ** 2)))


def wavenumber_from_frequency(f_hz):
    """Dimensionless wavenumber for a frequency in Hz (lengths in units of 10 cm)."""
    f_hz = np.asarray(f_hz, dtype=float)
    if np.any(f_hz <= 0):
        raise ValueError("frequency must be positive")
    k = 2 * np.pi * f_hz / SPEED_OF_LIGHT_DIMLESS
    return float(k) if k.ndim == 0 else k

"""Carleman-weighted least-squares functional for the coupled system

    sum_n S[l,n] lap v_n + sum_{n,m} P[l,n,m] grad v_n . grad v_m + sum_n Q[l,n] . grad v_n = 0,

its gradient, the quasi-reversibility start, gradient descent and the
recovery of the dielectric constant.

Unknowns V have shape (N, Nx, Ny, Nz). All boundary nodes carry the Dirichlet
data and the first layer above the measurement plane carries g0 + h g1; those
nodes are fixed and receive zero gradient.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dstn, idstn
from scipy.sparse.linalg import LinearOperator, cg

from .forward import incident_log_gradient
from .grid import gradient_fd, gradient_fd_adjoint, h2_norm_sq, laplacian_fd, laplacian_fd_adjoint

log = logging.getLogger(__name__)


class InitializationError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__("%s (relative residual %.3e)" % (message, residual))
        self.residual = residual


class DivergenceError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class CarlemanParams:
    lam: float = 1.1
    r: float = 5.5

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class InverseConfig:
    eps: float = 1e-9
    eta0: float = 1e-1
    eta_min: float = 1e-9
    step_tol: float = 1e-10
    max_iters: int = 2000
    M: float = None
    cg_tol: float = 1e-8
    cg_maxiter: int = 20000

    def __post_init__(self):
        if not 0 < self.eta_min < self.eta0 < 1:
            raise ValueError("need 0 < eta_min < eta0 < 1")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")


def carleman_weight(z, p, R):
    """mu(z) = exp(-lam (R + r)^2) exp(lam (z - r)^2), R the domain half-width."""
    z = np.asarray(z, dtype=float)
    return np.exp(p.lam * ((z - p.r) ** 2 - (R + p.r) ** 2))


def carleman_weights(grid, p):
    """Squared weight mu^2 at each z-level of the grid."""
    if p.r <= grid.b:
        raise ValueError("Carleman parameter r must exceed b")
    return carleman_weight(grid.z, p, grid.R) ** 2


def pinned_mask(grid):
    mask = np.ones(grid.shape, dtype=bool)
    mask[1:-1, 1:-1, 2:-1] = False
    return mask


def pinned_values(boundary, grid):
    """Boundary values g0 plus the layer z = -b + h set to g0 + h g1."""
    vals = boundary.dirichlet_volume(grid)
    vals[:, 1:-1, 1:-1, 1] = boundary.g0[:, 1:-1, 1:-1] + grid.h * boundary.g1[:, 1:-1, 1:-1]
    return vals


def h2_norm(V, h):
    return math.sqrt(sum(h2_norm_sq(v, h) for v in V))


class CarlemanFunctional:
    """Discrete functional

        J(V) = h^3 sum_nodes mu^2(z) sum_l |r_l(V) - f_l|^2 + eps sum_l ||v_l||_{H^2_h}^2

    with r_l the system residual (interior nodes only). ``include_P=False``
    drops the quadratic term, giving the quasi-reversibility functional.
    """

    def __init__(self, grid, S, P, Q, weights, eps, mask=None, pinned=None, rhs=None, include_P=True):
        self.grid = grid
        self.h = grid.h
        self.S = np.asarray(S, dtype=float)
        self.P = np.asarray(P, dtype=float)
        self.Psym = self.P + self.P.transpose(0, 2, 1)
        self.Q = Q
        self.N = self.S.shape[0]
        self.w = np.asarray(weights, dtype=float)
        if self.w.shape != (grid.Nz,):
            raise ValueError("weights must hold one value per z-level")
        self.eps = float(eps)
        self.mask = np.zeros(grid.shape, dtype=bool) if mask is None else mask
        self.pinned = np.zeros((self.N,) + grid.shape, dtype=complex) if pinned is None else pinned
        self.rhs = rhs
        self.include_P = include_P

    @classmethod
    def from_boundary(cls, grid, basis, Q, boundary, params, eps, **kw):
        return cls(grid, basis.S, basis.P, Q, carleman_weights(grid, params), eps,
                   mask=pinned_mask(grid), pinned=pinned_values(boundary, grid), **kw)

    def _check(self, V):
        if V.shape != (self.N,) + self.grid.shape:
            raise ValueError("V has shape %s, expected %s" % (V.shape, (self.N,) + self.grid.shape))

    def with_pins(self, V):
        """Copy of V whose fixed nodes carry the pinned values."""
        V = np.array(V, dtype=complex)
        V[:, self.mask] = self.pinned[:, self.mask]
        return V

    # residual pieces ------------------------------------------------------
    def _parts(self, V):
        lap = laplacian_fd(V, self.h)
        g = np.moveaxis(gradient_fd(V, self.h), 0, 1)  # (N, 3, ...)
        return lap, g

    def residual(self, V):
        self._check(V)
        lap, g = self._parts(V)
        r = np.einsum("ln,n...->l...", self.S, lap) + self.Q.apply(g)
        if self.include_P:
            dots = np.einsum("nc...,mc...->nm...", g, g)
            r = r + np.einsum("lnm,nm...->l...", self.P, dots)
        if self.rhs is not None:
            r = r - self.rhs
        r[:, ~self.grid.interior_mask()] = 0
        return r

    def value(self, V):
        r = self.residual(V)
        h3 = self.h**3
        data = h3 * float(np.sum(self.w * np.abs(r) ** 2))
        reg = self.eps * sum(h2_norm_sq(v, self.h) for v in V) if self.eps else 0.0
        return data + reg

    def _reg_normal(self, V):
        """(I + grad^T grad + lap^T lap) V."""
        h = self.h
        return V + gradient_fd_adjoint(gradient_fd(V, h), h) + laplacian_fd_adjoint(laplacian_fd(V, h), h)

    def gradient(self, V):
        """dJ/dRe + i dJ/dIm at every node; zero on pinned nodes."""
        r = self.residual(V)
        _, g = self._parts(V)
        wr = self.w * r
        lap_coef = np.einsum("ln,l...->n...", self.S, wr)
        vec = self.Q.apply_adjoint(wr)
        if self.include_P:
            T = np.einsum("lnm,l...->nm...", self.Psym, wr)
            vec = vec + np.einsum("nm...,mc...->nc...", T, g.conj())
        G = laplacian_fd_adjoint(lap_coef, self.h) + gradient_fd_adjoint(np.moveaxis(vec, 1, 0), self.h)
        G = 2 * self.h**3 * G
        if self.eps:
            G = G + 2 * self.eps * self.h**3 * self._reg_normal(V)
        G[:, self.mask] = 0
        return G

    # linear part, used by the quasi-reversibility solve --------------------
    def linear_op(self, V):
        lap, g = self._parts(V)
        r = np.einsum("ln,n...->l...", self.S, lap) + self.Q.apply(g)
        r[:, ~self.grid.interior_mask()] = 0
        return r

    def linear_adjoint(self, y):
        lap_coef = np.einsum("ln,l...->n...", self.S, y)
        vec = self.Q.apply_adjoint(y)
        return laplacian_fd_adjoint(lap_coef, self.h) + gradient_fd_adjoint(np.moveaxis(vec, 1, 0), self.h)


def residual(V, basis, Q, grid):
    """System residual at interior nodes (zero on the boundary)."""
    return CarlemanFunctional(grid, basis.S, basis.P, Q, np.ones(grid.Nz), 0.0).residual(V)


def evaluate_J(V, basis, Q, weights, config, grid):
    return CarlemanFunctional(grid, basis.S, basis.P, Q, weights, config.eps).value(V)


def gradient_J(V, basis, Q, weights, config, grid, mask=None):
    return CarlemanFunctional(grid, basis.S, basis.P, Q, weights, config.eps, mask=mask).gradient(V)


class _SpectralPreconditioner:
    """Approximate inverse of the normal operator on the free-node box.

    The Dirichlet Laplacian of the box is diagonal under the type-I sine
    transform. In that basis the operator is modelled per mode by the N x N
    block w (a^2 S^T S + q^2 a) + eps (1 + a + a^2), with a the mode's
    Laplacian eigenvalue and q the typical size of Q; the depth variation of
    the weight is handled by a symmetric diagonal scaling.
    """

    def __init__(self, F):
        grid, h = F.grid, F.h
        self.shape = (grid.Nx - 2, grid.Ny - 2, grid.Nz - 3)
        eig = [(4 / h**2) * np.sin(np.pi * np.arange(1, m + 1) / (2 * (m + 1))) ** 2 for m in self.shape]
        a = eig[0][:, None, None] + eig[1][None, :, None] + eig[2][None, None, :]
        wz = F.w[2:-1]
        wbar = float(np.exp(np.mean(np.log(np.maximum(wz, 1e-300)))))
        self.scale = np.sqrt((wz + F.eps) / (wbar + F.eps))[None, None, None, :]
        evals, self.U = np.linalg.eigh(F.S.T @ F.S)
        q2 = float(np.linalg.norm(F.Q.A + F.Q.B * np.mean(F.Q.inv_rho), 2) ** 2)
        reg = F.eps * (1 + a + a**2)
        self.inv = 1.0 / (wbar * (evals[:, None, None, None] * a**2 + q2 * a) + reg)

    def apply(self, r):
        r = r.reshape((-1,) + self.shape) / self.scale
        t = dstn(np.tensordot(self.U.T, r, axes=(1, 0)), type=1, axes=(1, 2, 3), norm="ortho")
        t = idstn(t * self.inv, type=1, axes=(1, 2, 3), norm="ortho")
        return (np.tensordot(self.U, t, axes=(1, 0)) / self.scale).ravel()


def qr_initialize(functional, config=None):
    """Minimize the functional without its quadratic term over the free nodes.

    Preconditioned conjugate gradients on the normal equations
    (L^H W L + eps R) x = -(L^H W (L V_p - f) + eps R V_p), restricted to free nodes.
    """
    config = config or InverseConfig()
    F = functional
    free = ~F.mask
    if not np.array_equal(free, ~pinned_mask(F.grid)):
        raise ValueError("quasi-reversibility start needs the standard pinned set")
    N = F.N
    box = (slice(None), slice(1, -1), slice(1, -1), slice(2, -1))
    Vp = F.with_pins(np.zeros((N,) + F.grid.shape, dtype=complex))

    def normal(V):
        out = F.linear_adjoint(F.w * F.linear_op(V))
        if F.eps:
            out = out + F.eps * F._reg_normal(V)
        return out

    def embed(x):
        V = np.zeros((N,) + F.grid.shape, dtype=complex)
        V[box] = x.reshape(V[box].shape)
        return V

    base = F.linear_op(Vp)
    if F.rhs is not None:
        base = base - F.rhs
        base[:, ~F.grid.interior_mask()] = 0
    b = F.linear_adjoint(F.w * base)
    if F.eps:
        b = b + F.eps * F._reg_normal(Vp)
    b = -b[box].ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return Vp
    A = LinearOperator((b.size, b.size), matvec=lambda x: normal(embed(x))[box].ravel(), dtype=complex)
    pre = _SpectralPreconditioner(F)
    M = LinearOperator((b.size, b.size), matvec=pre.apply, dtype=complex)
    x, _ = cg(A, b, rtol=config.cg_tol, atol=0.0, maxiter=config.cg_maxiter, M=M)
    res = np.linalg.norm(A.matvec(x) - b) / bnorm
    if not np.isfinite(res) or res > 1.01 * config.cg_tol:
        raise InitializationError("conjugate gradients stagnated", res)
    return Vp + embed(x)


@dataclass
class DescentTrace:
    records: list = field(default_factory=list)
    reason: str = ""

    def add(self, iteration, J, eta, step_norm, accepted):
        self.records.append({"iteration": iteration, "J": J, "eta": eta, "step_norm": step_norm, "accepted": accepted})

    def accepted_J(self):
        return [r["J"] for r in self.records if r["accepted"]]

    def to_csv(self):
        lines = ["iteration,J,eta,step_norm,accepted"]
        for r in self.records:
            lines.append("%d,%.17e,%.17e,%.17e,%d" % (r["iteration"], r["J"], r["eta"], r["step_norm"], r["accepted"]))
        return "\n".join(lines) + "\n"


def minimize(V0, functional, config=None, callback=None):
    """Gradient descent with step halving on increase.

    A step that raises J is rolled back and eta is halved. Stops when eta drops
    below ``eta_min``, when an accepted step is shorter than ``step_tol`` in
    the discrete H^2 norm, or after ``max_iters`` iterations.
    """
    config = config or InverseConfig()
    F = functional
    h = F.grid.h
    V = F.with_pins(V0)
    J = F.value(V)
    trace = DescentTrace()
    trace.add(0, J, config.eta0, 0.0, True)
    if not math.isfinite(J):
        raise DivergenceError("initial functional value is not finite", trace)
    if callback:
        callback(V)
    G = F.gradient(V)
    eta = config.eta0
    trace.reason = "max_iters"
    for it in range(1, config.max_iters + 1):
        if eta < config.eta_min:
            trace.reason = "eta_min"
            break
        Vn = V - eta * G
        Jn = F.value(Vn)
        if not math.isfinite(Jn):
            trace.add(it, Jn, eta, float("nan"), False)
            raise DivergenceError("functional became non-finite at iteration %d" % it, trace)
        if Jn > J:
            trace.add(it, Jn, eta, 0.0, False)
            eta /= 2
            continue
        step = h2_norm(Vn - V, h)
        V, J = Vn, Jn
        trace.add(it, J, eta, step, True)
        if callback:
            callback(V)
        if config.M is not None and h2_norm(V, h) > config.M:
            log.warning("iterate left the ball of radius M=%g", config.M)
        if step < config.step_tol:
            trace.reason = "step_tol"
            break
        G = F.gradient(V)
    return V, trace


def reconstruct_c(V, basis, src, grid):
    """c = mean over k of |Re(lap v + k^2 grad v . grad v + 2 grad v . grad u_i / u_i)| + 1.

    v(x, k) is synthesized from the coefficients at every quadrature node;
    grad u_i / u_i is taken in closed form.
    """
    h = grid.h
    pts = grid.coords()
    acc = np.zeros(grid.shape)
    for q, k in enumerate(basis.kgrid.nodes):
        v = np.tensordot(basis.psi[:, q], V, axes=(0, 0))
        lap = laplacian_fd(v, h)
        g = gradient_fd(v, h)
        lg = np.moveaxis(incident_log_gradient(pts, k, src), -1, 0)
        expr = lap + k**2 * np.sum(g * g, axis=0) + 2 * np.sum(g * lg, axis=0)
        acc += np.abs(-expr.real)
    return acc / basis.kgrid.Nk + 1.0

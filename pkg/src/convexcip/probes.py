"""Numerical probes of the convexification theory on small grids.

These are diagnostics only: they sample fields at random and report what they
see, never raising on an unfavourable outcome.
"""
from dataclasses import dataclass

import numpy as np

from .assembly import BoundaryData, boundary_coeffs, compute_Q, dz_log_ratio, log_ratio_continuous
from .basis import build_basis
from .forward import SourceSpec, incident_log_gradient, incident_wave, scattered_at
from .grid import FrequencyGrid, Grid3, gradient_fd, laplacian_fd
from .inversion import (
    CarlemanFunctional,
    CarlemanParams,
    InverseConfig,
    carleman_weight,
    h2_norm,
    minimize,
    pinned_mask,
)

ROUNDOFF = 1e-12
DZ_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class DeskProblem:
    """A small instance of the coupled system: grid, basis, Q and boundary data."""

    grid: Grid3
    basis: object
    Q: object
    boundary: BoundaryData
    r: float = 5.5
    eps: float = 1e-9

    @classmethod
    def build(cls, R=1.0, b=1.0, n=11, N=3, window=(6.72, 9.45), Nk=11, src=None, r=5.5, eps=1e-9, shapes=()):
        """Desk-scale instance. Without shapes the boundary data are zero;
        with shapes they are simulated on the measurement plane z = -b."""
        from .shapes import build_medium

        src = src or SourceSpec()
        grid = Grid3.from_spacing(R, b, 2 * R / (n - 1))
        basis = build_basis(N, FrequencyGrid.simpson(window[0], window[1], Nk))
        Q = compute_Q(basis, src, grid)
        if not shapes:
            zero = np.zeros((N, grid.Nx, grid.Ny), dtype=complex)
            return cls(grid, basis, Q, BoundaryData(zero, zero.copy()), r, eps)
        medium = build_medium(grid.refined(2), shapes, margin=grid.h)
        boundary = _plane_boundary_data(medium, basis, src, grid)
        return cls(grid, basis, Q, boundary, r, eps)

    def functional(self, lam, include_P=True, eps=None):
        return CarlemanFunctional.from_boundary(
            self.grid, self.basis, self.Q, self.boundary, CarlemanParams(lam, self.r),
            self.eps if eps is None else eps, include_P=include_P,
        )


def _plane_boundary_data(medium, basis, src, grid):
    """g0, g1 from the exact field on z = -b; dz by a centred difference."""
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    planes = [np.stack([X, Y, np.full_like(X, -grid.b + dz)], axis=-1) for dz in (0.0, DZ_STEP, -DZ_STEP)]
    pts = planes[0]
    F0, F1, ui, dz_ui = [], [], [], []
    for k in basis.kgrid.nodes:
        us = scattered_at(medium, k, src, np.concatenate([p.reshape(-1, 3) for p in planes])).reshape(3, *X.shape)
        u0 = incident_wave(pts, k, src)
        du0 = u0 * incident_log_gradient(pts, k, src)[..., 2]
        F0.append(u0 + us[0])
        F1.append(du0 + (us[1] - us[2]) / (2 * DZ_STEP))
        ui.append(u0)
        dz_ui.append(du0)
    k = basis.kgrid.nodes
    v = log_ratio_continuous(np.array(F0), np.array(ui), k)
    dzv = dz_log_ratio(np.array(F0), np.array(F1), np.array(ui), np.array(dz_ui), k)
    return boundary_coeffs(v, dzv, basis)


def smooth_field(grid, rng, modes=3, vanish_gradient=False):
    """Random complex combination of low sine modes, zero on the boundary.

    With ``vanish_gradient`` every mode is squared, so the first derivatives
    also vanish on the boundary.
    """
    x, y, z = grid.x, grid.y, grid.z
    out = np.zeros(grid.shape, dtype=complex)
    for p in range(1, modes + 1):
        for q in range(1, modes + 1):
            for s in range(1, modes + 1):
                sx = np.sin(p * np.pi * (x - x[0]) / (x[-1] - x[0]))
                sy = np.sin(q * np.pi * (y - y[0]) / (y[-1] - y[0]))
                sz = np.sin(s * np.pi * (z - z[0]) / (z[-1] - z[0]))
                if vanish_gradient:
                    sx, sy, sz = sx**2, sy**2, sz**2
                a = (rng.standard_normal() + 1j * rng.standard_normal()) / (p * q * s) ** 2
                out += a * sx[:, None, None] * sy[None, :, None] * sz[None, None, :]
    return out


def _second_derivatives(f, h):
    d = np.gradient(f, h)
    return [np.gradient(d[i], h, axis=j) for i in range(3) for j in range(i, 3)]


def carleman_probe(grid, lams, r=5.5, samples=20, seed=0):
    """Compare both sides of the weighted Laplacian estimate for random fields.

    For each field and lambda the ratio
        int mu |lap V|^2 / ( (1/lam) int mu |D^2 V|^2 + lam int mu (|grad V|^2 + lam^2 |V|^2) )
    is computed. C is fitted as half the smallest ratio at the largest lambda;
    the report gives the smallest lambda from which the estimate holds with
    that C for every sample and every larger lambda in the range.
    """
    rng = np.random.default_rng(seed)
    lams = np.sort(np.asarray(lams, dtype=float))
    h = grid.h
    inner = (slice(1, -1),) * 3
    ratios = np.zeros((samples, lams.size))
    for j in range(samples):
        V = smooth_field(grid, rng, vanish_gradient=True)
        lap = np.abs(laplacian_fd(V, h)[inner]) ** 2
        hess = sum(np.abs(d[inner]) ** 2 for d in _second_derivatives(V, h))
        grad = np.sum(np.abs(gradient_fd(V, h)[(slice(None),) + inner]) ** 2, axis=0)
        val = np.abs(V[inner]) ** 2
        for i, lam in enumerate(lams):
            mu = carleman_weight(grid.z[1:-1], CarlemanParams(lam, r), grid.R)[None, None, :]
            lhs = np.sum(mu * lap)
            rhs = np.sum(mu * hess) / lam + lam * np.sum(mu * (grad + lam**2 * val))
            ratios[j, i] = lhs / rhs
    C = 0.5 * float(ratios[:, -1].min())
    holds = (ratios >= C).all(axis=0)
    smallest = None
    for i in range(lams.size - 1, -1, -1):
        if not holds[i]:
            break
        smallest = float(lams[i])
    return {"lambdas": lams.tolist(), "C": C, "smallest_lambda": smallest,
            "min_ratio": ratios.min(axis=0).tolist(), "holds": holds.tolist()}


def convexity_gap(F, V1, V2):
    J1, J2 = F.value(V1), F.value(V2)
    G = F.gradient(V1)
    d = V2 - V1
    return J2 - J1 - float(np.sum(G.real * d.real + G.imag * d.imag)), J1, J2


def convexity_probe(problem, lam, pairs=200, radius=1.0, seed=0, include_P=True):
    """Fraction of random pairs with a non-negative first-order convexity gap
    (up to roundoff). Pairs respect the boundary data; their free parts lie
    in the H^2 ball of the given radius."""
    rng = np.random.default_rng(seed)
    F = problem.functional(lam, include_P=include_P)
    mask = pinned_mask(problem.grid)
    h = problem.grid.h
    N = problem.basis.N

    def draw():
        # free part scaled into the ball, fixed nodes carry the boundary data
        V = np.array([smooth_field(problem.grid, rng) for _ in range(N)])
        V[:, mask] = 0
        return F.with_pins(V * (radius * rng.uniform() / h2_norm(V, h)))

    good = 0
    worst = np.inf
    for _ in range(pairs):
        V1, V2 = draw(), draw()
        gap, J1, J2 = convexity_gap(F, V1, V2)
        rel = gap / max(abs(J1) + abs(J2), np.finfo(float).tiny)
        worst = min(worst, rel)
        if gap >= -ROUNDOFF * (abs(J1) + abs(J2)):
            good += 1
    return {"lambda": lam, "pairs": pairs, "fraction": good / pairs, "worst_relative_gap": float(worst)}


def fit_contraction(distances):
    """Smallest s with e_n <= s^n e_0 for every recorded n >= 1 (e_n > 0)."""
    e = np.asarray(distances, dtype=float)
    if e.size < 2 or e[0] <= 0:
        return None
    n = np.arange(e.size)
    ok = (n >= 1) & (e > 0)
    if not ok.any():
        return 0.0
    return float(np.max((e[ok] / e[0]) ** (1.0 / n[ok])))


def hessian_norm(F, V, iters=30, t=1e-6, seed=0):
    """Largest Hessian eigenvalue of F at V by power iteration on gradient differences."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(V.shape) + 1j * rng.standard_normal(V.shape)
    d[:, F.mask] = 0
    d /= np.linalg.norm(d)
    est = 0.0
    for _ in range(iters):
        Hd = (F.gradient(V + t * d) - F.gradient(V - t * d)) / (2 * t)
        est = np.linalg.norm(Hd)
        if est == 0:
            return 0.0
        d = Hd / est
    return float(est)


def contraction_probe(problem, lam, eps=1e-2, max_iters=3000, seed=0, radius=1.0):
    """Run gradient descent from a random start and fit the contraction factor
    of the iterates toward the final iterate.

    The regularization weight is raised to ``eps`` so that plain descent
    converges within the budget, and the step is 1 / (largest Hessian
    eigenvalue at the start) so stiff modes are damped rather than flipped.
    """
    rng = np.random.default_rng(seed)
    F = problem.functional(lam, eps=eps)
    N = problem.basis.N
    V0 = np.array([smooth_field(problem.grid, rng) for _ in range(N)])
    V0 = F.with_pins(V0 * radius / h2_norm(V0, problem.grid.h))
    eta = min(0.1, 1.0 / hessian_norm(F, V0, seed=seed))
    iterates = []
    config = InverseConfig(eps=eps, eta0=eta, eta_min=min(1e-9, eta / 2), max_iters=max_iters, step_tol=1e-8)
    Vc, trace = minimize(V0, F, config, callback=lambda V: iterates.append(V.copy()))
    dist = [h2_norm(V - Vc, problem.grid.h) for V in iterates[:-1]]
    return {"lambda": lam, "eps": eps, "eta": eta, "iterations": len(iterates) - 1, "reason": trace.reason,
            "J_first": trace.accepted_J()[0], "J_last": trace.accepted_J()[-1],
            "distance_first": dist[0] if dist else 0.0, "distance_last": dist[-1] if dist else 0.0,
            "varsigma": fit_contraction(dist)}


def probe_theorems(problem, lams=(0.1, 1.1, 3.0), pairs=200, radius=1.0, seed=0, contraction_lambda=1.1):
    report = {
        "carleman": carleman_probe(problem.grid, list(lams) + [5.0, 10.0], r=problem.r, seed=seed),
        "convexity": [convexity_probe(problem, lam, pairs, radius, seed) for lam in lams],
        "convexity_quadratic": convexity_probe(problem, lams[0], pairs, radius, seed, include_P=False),
        "contraction": contraction_probe(problem, contraction_lambda, seed=seed, radius=radius),
    }
    fr = [c["fraction"] for c in report["convexity"]]
    report["convexity_monotone"] = all(a <= b for a, b in zip(fr, fr[1:]))
    return report

"""P1 finite-element solvers for the anisotropic torsion and eigenvalue problems.

Both problems are attacked through the convex energy

    J(u) = sum_T |T| H_K(grad u|_T) - f . u,   H_K = h_K^2 / 2,

minimised over fields vanishing on the boundary with a damped Newton method.
Polytopal bodies are replaced by their log-sum-exp smoothings along a
decreasing schedule of ``tau``; the last stage (``tau = 0``) evaluates the
exact body and rescales the field along its ray, which is the exact minimiser
of ``J`` on that ray and makes the Euler identity hold to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.spatial import ConvexHull

from .anisogeom import Polygon, aniso_distance
from .convex_body import ConvexBody, Polytope, Smoothed
from .errors import ConvergenceError, DomainError

__all__ = [
    "SolveOptions",
    "SolveReport",
    "FEContext",
    "torsion_quotient",
    "rayleigh_quotient",
    "solve_torsion",
    "solve_eigen",
]


@dataclass(frozen=True)
class SolveOptions:
    tau_schedule: tuple = (1e-1, 1e-2, 1e-3, 0.0)
    max_iters: int = 200  # Newton steps per stage
    tol: float = 1e-13  # Newton decrement relative to |J|, last stage
    stage_tol: float = 1e-8  # same, intermediate smoothing stages
    eig_tol: float = 1e-8
    eig_max_iters: int = 300


@dataclass
class SolveReport:
    value: float
    field: np.ndarray
    iterations: int
    tau_final: float
    energy_history: list = field(default_factory=list)
    residual: float = np.nan  # |int h^2(grad u) - int u| / int u  (torsion)
    grad_residual: float = np.nan  # |grad J| / |f| at the last smoothed stage
    value_history: list = field(default_factory=list)  # lambda iterates (eigen)

    def to_dict(self):
        return {
            "value": self.value,
            "iterations": self.iterations,
            "residual": self.residual,
            "grad_residual": self.grad_residual,
            "tau_final": self.tau_final,
        }


class FEContext:
    """Per-mesh P1 operators: gradient matrices, lumped load, consistent mass."""

    def __init__(self, mesh):
        self.mesh = mesh
        p = mesh.points
        tri = mesh.triangles
        self.tri = tri
        x, y = p[tri, 0], p[tri, 1]
        area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
        if np.any(area <= 0):
            raise DomainError("mesh has non-positive triangles")
        self.area = area
        # grad u_T = G_T @ u[tri_T]
        G = np.empty((len(tri), 2, 3))
        G[:, 0] = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        G[:, 1] = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        self.G = G / (2 * area)[:, None, None]
        n = len(p)
        self.n = n
        self.free = np.flatnonzero(~mesh.boundary)
        self.load = np.bincount(tri.ravel(), weights=np.repeat(area / 3, 3), minlength=n)
        self._rows = np.repeat(tri, 3, axis=1).ravel()
        self._cols = np.tile(tri, (1, 3)).ravel()
        local = (np.ones((3, 3)) + np.eye(3)) / 12
        self.mass = self._assemble(area[:, None, None] * local)
        self.stiff = self._assemble(area[:, None, None] * np.einsum("mki,mkj->mij", self.G, self.G))

    def _assemble(self, local):
        A = sp.csr_matrix((local.ravel(), (self._rows, self._cols)), shape=(self.n, self.n))
        A.sum_duplicates()
        return A

    def grad(self, u):
        return np.einsum("mij,mj->mi", self.G, u[self.tri])

    def apply_t(self, v):
        """Assemble sum_T |T| G_T^T v_T into a nodal vector."""
        loc = np.einsum("mij,mi->mj", self.G, v) * self.area[:, None]
        return np.bincount(self.tri.ravel(), weights=loc.ravel(), minlength=self.n)

    def hessian(self, D):
        return self._assemble(self.area[:, None, None] * np.einsum("mki,mkl,mlj->mij", self.G, D, self.G))

    def dirichlet(self, K, u):
        g = self.grad(u)
        nz = np.linalg.norm(g, axis=1) > 0
        h = np.zeros(len(g))
        if np.any(nz):
            h[nz] = K.support(g[nz])
        return float(np.sum(self.area * h**2))

    def l1(self, u):
        return float(self.load @ u)

    def l2sq(self, u):
        return float(u @ (self.mass @ u))


def _context(m):
    return m if isinstance(m, FEContext) else FEContext(m)


def _check_field(ctx, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (ctx.n,):
        raise DomainError("field must have one value per mesh vertex")
    scale = np.max(np.abs(u))
    if scale == 0:
        raise DomainError("field is identically zero")
    if np.max(np.abs(u[ctx.mesh.boundary])) > 1e-12 * scale:
        raise DomainError("field must vanish on the boundary")
    return u


def torsion_quotient(K: ConvexBody, m, u) -> float:
    """``(int u)^2 / int h_K^2(grad u)``; a lower bound for the torsional rigidity."""
    ctx = _context(m)
    u = _check_field(ctx, u)
    den = ctx.dirichlet(K, u)
    if not den > 0:
        raise RuntimeError("zero Dirichlet energy for a nonzero field")
    return ctx.l1(u) ** 2 / den


def rayleigh_quotient(K: ConvexBody, m, u) -> float:
    """``int h_K^2(grad u) / int u^2`` with the consistent P1 mass matrix."""
    ctx = _context(m)
    u = _check_field(ctx, u)
    den = ctx.dirichlet(K, u)
    if not den > 0:
        raise RuntimeError("zero Dirichlet energy for a nonzero field")
    return den / ctx.l2sq(u)


def _stages(K, schedule):
    """Bodies used for the Newton stages, and whether a final exact rescale follows."""
    if isinstance(K, (Polytope, Smoothed)):
        base = K.base if isinstance(K, Smoothed) else K
        taus = [float(t) for t in schedule if t > 0]
        if isinstance(K, Smoothed):
            taus = [t for t in taus if t >= K.tau] or [K.tau]
        if not taus:
            raise DomainError("a polytopal body needs at least one positive smoothing level")
        return [(Smoothed(base, t), t) for t in taus]
    return [(K, 0.0)]


def _safe_hess(K, g):
    n = np.linalg.norm(g, axis=1)
    zero = n == 0
    if np.any(zero):
        g = g.copy()
        g[zero] = max(float(n.max()), 1.0) * 1e-8 * np.array([1.0, 0.0])
    return K.quad_hess(g)


def _energy(ctx, K, u, f):
    g = ctx.grad(u)
    nz = np.linalg.norm(g, axis=1) > 0
    h = np.zeros(len(g))
    if np.any(nz):
        h[nz] = K.support(g[nz])
    return 0.5 * float(np.sum(ctx.area * h**2)) - float(f @ u)


def _line_search(ctx, K, g, gd, fd, slope, iters=8):
    """Approximate minimiser on [0, 1] of the convex restriction of J to a line.

    Illinois regula falsi on the directional derivative; ``slope`` is its value at 0.
    """
    def dphi(t):
        return float(np.sum(ctx.area * np.einsum("ij,ij->i", K.quad_grad(g + t * gd), gd))) - fd

    a, fa, b = 0.0, slope, 1.0
    fb = dphi(b)
    if fb <= 0:
        return 1.0
    side = 0
    t = 1.0
    for _ in range(iters):
        t = (a * fb - b * fa) / (fb - fa)
        ft = dphi(t)
        if abs(ft) <= 0.1 * abs(slope):
            break
        if ft < 0:
            a, fa = t, ft
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = t, ft
            if side == 1:
                fa *= 0.5
            side = 1
    return t


def _newton(ctx, K, f, u, opts, history, tol=None):
    """Minimise ``sum |T| H_K(grad u) - f.u`` over boundary-zero fields by damped Newton."""
    tol = opts.tol if tol is None else tol
    free = ctx.free
    fnorm = float(np.linalg.norm(f[free]))
    reg = 1e-12 * ctx.stiff[free][:, free]
    u = u.copy()
    g = ctx.grad(u)
    J = _energy(ctx, K, u, f)
    for it in range(1, opts.max_iters + 1):
        r = (ctx.apply_t(K.quad_grad(g)) - f)[free]
        A = ctx.hessian(_safe_hess(K, g))[free][:, free]
        d = splu((A + reg).tocsc(), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True}).solve(-r)
        slope = float(r @ d)
        if not slope < 0:
            d = -r
            slope = -float(r @ r)
        if -slope <= tol * max(abs(J), 1e-300):
            return u, J, it - 1, float(np.linalg.norm(r)) / fnorm
        step = np.zeros(ctx.n)
        step[free] = d
        gd = ctx.grad(step)
        t = _line_search(ctx, K, g, gd, float(f @ step), slope)
        Jt = _energy(ctx, K, u + t * step, f)
        if not Jt < J:
            # no further decrease representable
            return u, J, it, float(np.linalg.norm(r)) / fnorm
        u += t * step
        g = g + t * gd
        J = Jt
        history.append(J)
    raise ConvergenceError(f"Newton did not converge in {opts.max_iters} iterations", history=list(history))


def _initial_torsion(K, ctx):
    mesh = ctx.mesh
    b = mesh.points[mesh.boundary]
    poly = Polygon(b[ConvexHull(b).vertices])
    base = K.base if isinstance(K, Smoothed) else K
    u = np.zeros(ctx.n)
    u[ctx.free] = aniso_distance(base, mesh.points[ctx.free], poly)
    return u


def _solve_torsion(K, ctx, opts):
    history = []
    u = _initial_torsion(K, ctx)
    f = ctx.load
    iters = 0
    gres = np.nan
    stages = _stages(K, opts.tau_schedule)
    for i, (body, _tau) in enumerate(stages):
        tol = opts.tol if i == len(stages) - 1 else opts.stage_tol
        u, _, k, gres = _newton(ctx, body, f, u, opts, history, tol)
        iters += k
    # exact body: optimal scaling along the ray through u
    Q = ctx.dirichlet(K, u)
    F = ctx.l1(u)
    u = u * (F / Q)
    history.append(-0.5 * F * F / Q)
    return u, iters, history, gres, stages


def solve_torsion(K: ConvexBody, m, opts: SolveOptions | None = None) -> SolveReport:
    """Torsion function and rigidity ``T = int u`` on a mesh."""
    opts = opts or SolveOptions()
    ctx = _context(m)
    u, iters, history, gres, stages = _solve_torsion(K, ctx, opts)
    T = ctx.l1(u)
    res = abs(ctx.dirichlet(K, u) - T) / T
    return SolveReport(T, u, iters, stages[-1][1], history, res, gres)


def _rq_newton_direction(ctx, body, u):
    """Newton direction for the Rayleigh quotient of ``body`` on the M-sphere.

    Solves the bordered system ``[[H - mu M, M u], [(M u)^T, 0]]`` so the step is
    M-orthogonal to ``u``. Returns ``(mu, direction, slope)`` where ``slope`` is
    the derivative of ``mu`` along the direction up to a positive factor;
    the Hessian of the energy on the free nodes is returned as well.
    """
    free = ctx.free
    g = ctx.grad(u)
    Mu = (ctx.mass @ u)[free]
    mu = ctx.dirichlet(body, u) / ctx.l2sq(u)
    r = ctx.apply_t(body.quad_grad(g))[free] - mu * Mu
    H = ctx.hessian(_safe_hess(body, g))[free][:, free]
    B = sp.bmat([[H - mu * ctx.mass[free][:, free], sp.csc_matrix(Mu[:, None])],
                 [sp.csr_matrix(Mu[None, :]), None]]).tocsc()
    sol = splu(B, permc_spec="MMD_AT_PLUS_A").solve(np.concatenate([-r, [0.0]]))
    d = np.zeros(ctx.n)
    d[free] = sol[:-1]
    return mu, d, float(r @ sol[:-1]), H


def _rq(ctx, body, u):
    return ctx.dirichlet(body, u) / ctx.l2sq(u)


def solve_eigen(K: ConvexBody, m, opts: SolveOptions | None = None, init=None) -> SolveReport:
    """First Dirichlet eigenpair.

    Starts from ``init`` (e.g. a torsion function) or solves the torsion
    problem first. Every step takes a nonlinear inverse-iteration step and a
    Newton direction for the Rayleigh quotient, then a Rayleigh-Ritz step on
    the span of ``u`` and the two directions with the Hessian at ``u`` as the
    quadratic model. The lowest Ritz vector is kept when it lowers the true
    quotient of the (smoothed) body, otherwise the inverse-iteration iterate.
    Taking the lowest Ritz pair steers away from the saddles at higher
    eigenvalues, which plain Newton is attracted to on elongated domains.
    The reported value is the Rayleigh quotient with the exact body.
    """
    opts = opts or SolveOptions()
    ctx = _context(m)
    stages = _stages(K, opts.tau_schedule)
    if init is None:
        u, iters, history, _, stages = _solve_torsion(K, ctx, opts)
    else:
        u, iters, history = _check_field(ctx, init).copy(), 0, []
    body = stages[-1][0]
    free = ctx.free
    Mf = ctx.mass[free][:, free]
    u = u / np.sqrt(ctx.l2sq(u))
    lam = rayleigh_quotient(K, ctx, u)
    lams = [lam]
    for _ in range(opts.eig_max_iters):
        mu, d, _slope, H = _rq_newton_direction(ctx, body, u)
        w, _, k, _ = _newton(ctx, body, ctx.mass @ u, u / mu, opts, history)
        iters += k + 1
        w = w / np.sqrt(ctx.l2sq(w))
        u = _ritz(ctx, body, u, [w, d], H, Mf, fallback=w)
        new = rayleigh_quotient(K, ctx, u)
        lams.append(new)
        if abs(new - lam) < opts.eig_tol * new:
            lam = new
            break
        if _oscillating(lams, opts.eig_tol):
            raise ConvergenceError("possible eigenvalue multiplicity", history=lams)
        lam = new
    else:
        raise ConvergenceError(f"eigen iteration did not converge in {opts.eig_max_iters} steps", history=lams)
    if ctx.l1(u) < 0:
        u = -u
    g = ctx.grad(u)
    mu = _rq(ctx, body, u)
    Mu = (ctx.mass @ u)[free]
    r = ctx.apply_t(body.quad_grad(g))[free] - mu * Mu
    gres = float(np.linalg.norm(r)) / (mu * float(np.linalg.norm(Mu)))
    return SolveReport(lam, u, iters, stages[-1][1], history, np.nan, gres, lams)


def _ritz(ctx, body, u, dirs, H, Mf, fallback):
    free = ctx.free
    V = np.column_stack([u[free]] + [v[free] for v in dirs])
    # M-orthonormalise, dropping dependent columns
    G = V.T @ (Mf @ V)
    ev, Q = np.linalg.eigh(G)
    keep = ev > 1e-12 * ev.max()
    W = V @ (Q[:, keep] / np.sqrt(ev[keep]))
    A = W.T @ (H @ W)
    vals, Y = np.linalg.eigh(0.5 * (A + A.T))
    c = np.zeros(ctx.n)
    c[free] = W @ Y[:, 0]
    c = c / np.sqrt(ctx.l2sq(c))
    if ctx.l1(c) * ctx.l1(u) < 0:
        c = -c
    mu_c, mu_f = _rq(ctx, body, c), _rq(ctx, body, fallback)
    return c if mu_c <= mu_f else fallback


def _oscillating(lams, tol, window=6):
    if len(lams) < window + 1:
        return False
    d = np.diff(lams[-(window + 1):])
    big = np.abs(d) > 10 * tol * abs(lams[-1])
    return bool(np.all(big) and np.all(d[1:] * d[:-1] < 0))

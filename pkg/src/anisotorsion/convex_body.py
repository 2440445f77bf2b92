"""Symmetric convex bodies and the calculus of their support functions.

A body ``K`` is described by its support function ``h_K(x) = max{x.y : y in K}``
and its gauge (Minkowski functional) ``h_{K*}(x) = min{t >= 0 : x in tK}``.
Every method is vectorised over leading axes: ``x`` may have shape ``(N,)``
or ``(..., N)``.

Variants
--------
Polytope   finite vertex set, exact evaluation, subgradient selection on ties.
PBall      ``{x : ||x / s||_p <= 1}`` for ``1 < p < inf``.
Ellipsoid  ``{x : x^T M x <= 1}`` for a symmetric positive-definite ``M``.
Smoothed   1-homogeneous log-sum-exp smoothing of a polytope.
PolarBody  wrapper for polars that have no closed form (polar of Smoothed).

``pball`` routes ``p in {1, inf}`` to :class:`Polytope` in two dimensions.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial import ConvexHull

from .errors import DomainError

__all__ = [
    "ConvexBody",
    "Polytope",
    "PBall",
    "Ellipsoid",
    "Smoothed",
    "PolarBody",
    "pball",
    "polytope",
    "ellipsoid",
    "disk",
    "square",
    "diamond",
    "support",
    "gauge",
    "polar",
    "support_gradient",
    "quadratic_gradient",
    "smooth_approx",
    "linear_image",
]

# Relative tolerance for treating two vertex scores as tied.
TIE_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_direction(x):
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x, axis=-1)
    if np.any(n == 0) or not np.all(np.isfinite(n)):
        raise DomainError("direction must be a nonzero finite vector")
    return x


class ConvexBody:
    """Base class; subclasses implement the vectorised primitives."""

    dim: int
    # Hausdorff distance to the body this one approximates (0 when exact).
    hausdorff_bound: float = 0.0

    def support(self, x):
        raise NotImplementedError

    def gauge(self, x):
        raise NotImplementedError

    def support_grad(self, x):
        raise NotImplementedError

    def polar(self):
        return PolarBody(self)

    def quad_grad(self, x):
        """``DH_K(x) = h_K(x) Dh_K(x)``, with ``DH_K(0) = 0``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        nz = np.linalg.norm(x, axis=-1) > 0
        if np.any(nz):
            xs = x[nz]
            out[nz] = self.support(xs)[..., None] * self.support_grad(xs)
        return out

    def quad_hess(self, x):
        """Hessian of ``H_K = h_K^2 / 2``; falls back to central differences."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        step = 1e-6 * np.maximum(np.linalg.norm(x, axis=-1), 1e-300)
        out = np.empty(x.shape + (n,))
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            d = step[..., None] * e
            out[..., :, k] = (self.quad_grad(x + d) - self.quad_grad(x - d)) / (2 * step[..., None])
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


# ---------------------------------------------------------------------------
# Polytope


class Polytope(ConvexBody):
    """Convex hull of a centrally symmetric vertex set."""

    def __init__(self, vertices, *, symmetric_tol=1e-9):
        pts = np.atleast_2d(np.asarray(vertices, dtype=float))
        if pts.size == 0:
            raise DomainError("polytope needs at least one vertex")
        self.dim = pts.shape[1]
        if self.dim == 1:
            r = np.max(np.abs(pts))
            verts = np.array([[-r], [r]])
            normals, offsets = np.array([[-1.0], [1.0]]), np.array([r, r])
        else:
            try:
                hull = ConvexHull(pts)
            except Exception as exc:  # qhull raises its own error type
                raise DomainError(f"polytope is not full-dimensional: {exc}") from exc
            verts = pts[hull.vertices]  # counterclockwise in 2-D
            eq = hull.equations
            normals, offsets = eq[:, :-1], -eq[:, -1]
            # qhull triangulates facets in N >= 3; merge coplanar copies
            key = np.round(np.hstack([normals, offsets[:, None]]), 12)
            _, keep = np.unique(key, axis=0, return_index=True)
            keep.sort()
            normals, offsets = normals[keep], offsets[keep]
        if np.any(offsets <= 0):
            raise DomainError("origin must lie strictly inside the polytope")
        scale = np.max(np.abs(verts))
        anti = np.empty(len(verts), dtype=int)
        for i, v in enumerate(verts):
            d = np.linalg.norm(verts + v, axis=1)
            anti[i] = np.argmin(d)
            if d[anti[i]] > symmetric_tol * scale:
                raise DomainError("polytope is not symmetric about the origin")
        # make h_K(-x) = h_K(x) hold bit for bit
        verts = 0.5 * (verts - verts[anti])
        self.vertices = _frozen(verts)
        self.normals = _frozen(normals)
        self.offsets = _frozen(offsets)
        # vertices sorted lexicographically, for deterministic tie-breaking
        self._lex = np.lexsort(self.vertices.T[::-1])
        self._vscale = float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def support(self, x):
        x = np.asarray(x, dtype=float)
        return np.max(x @ self.vertices.T, axis=-1)

    def gauge(self, x):
        x = np.asarray(x, dtype=float)
        return np.maximum(np.max((x @ self.normals.T) / self.offsets, axis=-1), 0.0)

    def support_grad(self, x):
        """Maximising vertex; on ties, the lexicographically smallest one.

        At directions normal to an edge the support function is not
        differentiable and this is a subgradient selection.
        """
        x = _check_direction(x)
        scores = x @ self.vertices[self._lex].T
        best = np.max(scores, axis=-1, keepdims=True)
        tol = TIE_TOL * np.linalg.norm(x, axis=-1, keepdims=True) * self._vscale
        first = np.argmax(scores >= best - tol, axis=-1)
        return self.vertices[self._lex][first]

    def quad_hess(self, x):
        v = self.support_grad(np.where(np.linalg.norm(x, axis=-1, keepdims=True) > 0, x, 1.0))
        return v[..., :, None] * v[..., None, :]

    def polar(self):
        return Polytope(self.normals / self.offsets[:, None])

    @property
    def facets(self):
        """(unit outward normals, offsets) of the facet halfspaces."""
        return self.normals, self.offsets

    def to_dict(self):
        return {"type": "polytope", "vertices": self.vertices.tolist()}


# ---------------------------------------------------------------------------
# p-balls and ellipsoids


class PBall(ConvexBody):
    """``{x : ||x / s||_p <= 1}``; its support function is ``||s * x||_q``."""

    def __init__(self, p, scales):
        p = float(p)
        if not 1.0 < p < math.inf:
            raise DomainError("PBall needs 1 < p < inf; use pball() for the polytopal cases")
        s = np.asarray(scales, dtype=float)
        if s.ndim != 1 or np.any(s <= 0):
            raise DomainError("scales must be a positive vector")
        self.p = p
        self.q = p / (p - 1.0)
        self.scales = _frozen(s)
        self.dim = len(s)

    @staticmethod
    def _norm(y, r):
        m = np.max(np.abs(y), axis=-1)
        safe = np.where(m > 0, m, 1.0)
        return m * np.sum(np.abs(y / safe[..., None]) ** r, axis=-1) ** (1.0 / r)

    def support(self, x):
        return self._norm(np.asarray(x, dtype=float) * self.scales, self.q)

    def gauge(self, x):
        return self._norm(np.asarray(x, dtype=float) / self.scales, self.p)

    def support_grad(self, x):
        x = _check_direction(x)
        y = x * self.scales
        h = self._norm(y, self.q)[..., None]
        return self.scales * np.sign(y) * np.abs(y / h) ** (self.q - 1.0)

    def quad_hess(self, x):
        x = np.asarray(x, dtype=float)
        q = self.q
        y = x * self.scales
        h = self._norm(y, q)[..., None]
        h = np.where(h > 0, h, 1.0)
        dh = self.scales * np.sign(y) * np.abs(y / h) ** (q - 1.0)
        ay = np.maximum(np.abs(y / h), 1e-12)
        diag = (q - 1.0) * self.scales**2 * ay ** (q - 2.0)
        hess = (2.0 - q) * dh[..., :, None] * dh[..., None, :]
        idx = np.arange(self.dim)
        hess[..., idx, idx] += diag
        return hess

    def polar(self):
        return PBall(self.q, 1.0 / self.scales)

    def to_dict(self):
        return {"type": "pball", "p": self.p, "scales": self.scales.tolist()}


class Ellipsoid(ConvexBody):
    """``{x : x^T M x <= 1}``; support ``sqrt(x^T M^-1 x)``."""

    def __init__(self, matrix):
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        if m.shape[0] != m.shape[1] or not np.allclose(m, m.T, rtol=0, atol=1e-12 * np.abs(m).max()):
            raise DomainError("ellipsoid matrix must be square and symmetric")
        if np.min(np.linalg.eigvalsh(m)) <= 0:
            raise DomainError("ellipsoid matrix must be positive definite")
        self.matrix = _frozen(m)
        self.inverse = _frozen(np.linalg.inv(m))
        self.dim = m.shape[0]

    @staticmethod
    def _form(x, a):
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", x, a, x), 0.0))

    def support(self, x):
        return self._form(np.asarray(x, dtype=float), self.inverse)

    def gauge(self, x):
        return self._form(np.asarray(x, dtype=float), self.matrix)

    def support_grad(self, x):
        x = _check_direction(x)
        return (x @ self.inverse) / self.support(x)[..., None]

    def quad_grad(self, x):
        return np.asarray(x, dtype=float) @ self.inverse

    def quad_hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.inverse, x.shape + (self.dim,)).copy()

    def polar(self):
        return Ellipsoid(self.inverse)

    def to_dict(self):
        return {"type": "ellipsoid", "matrix": self.matrix.tolist()}


# ---------------------------------------------------------------------------
# Smoothing


class Smoothed(ConvexBody):
    """Log-sum-exp smoothing of a polytope's support function.

    ``h_tau(x) = tau |x| log sum_i exp(v_i . x / (tau |x|))`` is 1-homogeneous,
    smooth away from the origin, and satisfies
    ``h(x) <= h_tau(x) <= h(x) + tau |x| log m`` for ``m`` vertices.
    """

    def __init__(self, base, tau):
        if not isinstance(base, Polytope):
            raise DomainError("only polytopes are smoothed")
        if not tau > 0:
            raise DomainError("smoothing parameter must be positive")
        self.base = base
        self.tau = float(tau)
        self.dim = base.dim
        self.hausdorff_bound = self.tau * math.log(len(base.vertices))

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        n = np.linalg.norm(x, axis=-1)
        safe = np.where(n > 0, n, 1.0)
        z = x / safe[..., None]
        a = (z @ self.base.vertices.T) / self.tau
        amax = np.max(a, axis=-1, keepdims=True)
        e = np.exp(a - amax)
        se = np.sum(e, axis=-1, keepdims=True)
        w = e / se
        # summing in sorted order makes h_tau(-x) = h_tau(x) exactly
        lse = amax[..., 0] + np.log(np.sum(np.sort(e, axis=-1), axis=-1))
        return n, z, w, lse, a

    def support(self, x):
        n, _, _, lse, _ = self._parts(x)
        return self.tau * n * lse

    def support_grad(self, x):
        x = _check_direction(x)
        _, z, w, lse, _ = self._parts(x)
        vbar = w @ self.base.vertices
        s = self.tau * lse - np.sum(vbar * z, axis=-1)
        return vbar + s[..., None] * z

    def quad_hess(self, x):
        x = np.asarray(x, dtype=float)
        n, z, w, lse, _ = self._parts(x)
        zero = n == 0
        if np.any(zero):
            z = z.copy()
            z[zero] = np.eye(self.dim)[0]
            n = np.where(zero, 1.0, n)
        V = self.base.vertices
        vbar = w @ V
        s = self.tau * lse - np.sum(vbar * z, axis=-1)
        dh = vbar + s[..., None] * z
        h = self.tau * n * lse
        cov = np.einsum("...k,ki,kj->...ij", w, V, V) - vbar[..., :, None] * vbar[..., None, :]
        proj = np.eye(self.dim) - z[..., :, None] * z[..., None, :]
        d2h = (proj @ cov @ proj) / (self.tau * n)[..., None, None] + (s / n)[..., None, None] * proj
        return dh[..., :, None] * dh[..., None, :] + h[..., None, None] * d2h

    def gauge(self, x):
        return _numeric_dual(self, x)[0]

    def to_dict(self):
        return {"type": "smoothed", "base": self.base.to_dict(), "tau": self.tau}


class PolarBody(ConvexBody):
    """Polar of a body without a closed-form polar; evaluated through duality.

    ``support`` is the base body's gauge, ``gauge`` is the base's support, and
    the gradient comes from the maximiser of ``x . y / h(y)``.
    """

    def __init__(self, base):
        if base.dim != 2:
            raise DomainError("numerical polar is implemented for planar bodies only")
        self.base = base
        self.dim = 2

    def support(self, x):
        return self.base.gauge(x)

    def gauge(self, x):
        return self.base.support(x)

    def support_grad(self, x):
        x = _check_direction(x)
        return _numeric_dual(self.base, x)[1]

    def polar(self):
        return self.base

    def to_dict(self):
        return {"type": "polar", "base": self.base.to_dict()}


_GRID = np.linspace(0.0, 2 * np.pi, 2048, endpoint=False)


def _numeric_dual(body, x):
    """Return ``(max_y x.y / h(y), argmax y scaled to h(y) = 1)`` in 2-D."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 2)
    dirs = np.stack([np.cos(_GRID), np.sin(_GRID)], axis=1)
    hdirs = body.support(dirs)
    vals = np.empty(len(flat))
    args = np.zeros((len(flat), 2))
    step = _GRID[1] - _GRID[0]
    for i, xi in enumerate(flat):
        if not np.any(xi):
            vals[i] = 0.0
            continue
        k = int(np.argmax(dirs @ xi / hdirs))

        def slope(t, xi=xi):
            # derivative of x.u(t) / h(u(t)) up to the positive factor h^2
            u = np.array([math.cos(t), math.sin(t)])
            du = np.array([-u[1], u[0]])
            return float(xi @ du) * float(body.support(u)) - float(xi @ u) * float(body.support_grad(u) @ du)

        lo, hi = _GRID[k] - step, _GRID[k] + step
        if slope(lo) > 0 > slope(hi):
            t = brentq(slope, lo, hi, xtol=1e-15, maxiter=200)
        else:
            t = minimize_scalar(
                lambda t, xi=xi: -float(xi @ [math.cos(t), math.sin(t)]) / float(body.support([math.cos(t), math.sin(t)])),
                bounds=(lo, hi), method="bounded", options={"xatol": 1e-14, "maxiter": 500},
            ).x
        u = np.array([math.cos(t), math.sin(t)])
        hu = float(body.support(u))
        vals[i] = float(xi @ u) / hu
        args[i] = u / hu
    return vals.reshape(x.shape[:-1]), args.reshape(x.shape)


# ---------------------------------------------------------------------------
# Constructors


def polytope(vertices):
    return Polytope(vertices)


def pball(p, scales=(1.0, 1.0)):
    """p-ball with per-axis scales; ``p`` may be ``inf`` or the string "inf"."""
    if isinstance(p, str):
        p = math.inf if p.lower() in ("inf", "infinity") else float(p)
    s = np.asarray(scales, dtype=float)
    if np.any(s <= 0):
        raise DomainError("scales must be positive")
    if len(s) == 2 and p == 1:
        return Polytope([[s[0], 0], [-s[0], 0], [0, s[1]], [0, -s[1]]])
    if len(s) == 2 and p == math.inf:
        return Polytope([[s[0], s[1]], [-s[0], s[1]], [-s[0], -s[1]], [s[0], -s[1]]])
    if p < 1:
        raise DomainError("p must be at least 1")
    return PBall(p, s)


def ellipsoid(matrix):
    return Ellipsoid(matrix)


def disk(radius=1.0):
    return PBall(2.0, [radius, radius])


def square(half_width=1.0):
    return pball(math.inf, [half_width, half_width])


def diamond(radius=1.0):
    return pball(1.0, [radius, radius])


# ---------------------------------------------------------------------------
# Operation-level API


def support(K, x):
    """``h_K(x)``; raises :class:`DomainError` for ``x = 0``."""
    return K.support(_check_direction(x))


def gauge(K, x):
    """``h_{K*}(x)``, the Minkowski functional of ``K``."""
    return K.gauge(np.asarray(x, dtype=float))


def polar(K):
    return K.polar()


def support_gradient(K, x):
    """``Dh_K(x)``, the boundary point of ``K`` with outer normal ``x``."""
    return K.support_grad(_check_direction(x))


def quadratic_gradient(K, x):
    """``DH_K(x)`` for ``H_K = h_K^2 / 2``."""
    return K.quad_grad(np.asarray(x, dtype=float))


def smooth_approx(K, tau):
    """A body with smooth support function within Hausdorff ``K.hausdorff_bound``.

    Bodies that are already smooth away from the origin are returned as is.
    """
    if not tau > 0:
        raise DomainError("smoothing parameter must be positive")
    if isinstance(K, Smoothed):
        return Smoothed(K.base, tau)
    if isinstance(K, Polytope):
        return Smoothed(K, tau)
    return K


def linear_image(K, L):
    """The body ``LK`` (so ``h_{LK}(x) = h_K(L^T x)``)."""
    L = np.asarray(L, dtype=float)
    if isinstance(K, Polytope):
        return Polytope(K.vertices @ L.T)
    if isinstance(K, Ellipsoid):
        Li = np.linalg.inv(L)
        m = Li.T @ K.matrix @ Li
        return Ellipsoid(0.5 * (m + m.T))
    if isinstance(K, PBall) and K.p == 2.0:
        return linear_image(Ellipsoid(np.diag(1.0 / K.scales**2)), L)
    raise DomainError(f"linear image not available for {type(K).__name__}")


def from_dict(spec):
    """Build a body from its JSON description."""
    kind = spec.get("type")
    if kind == "polytope":
        return Polytope(spec["vertices"])
    if kind == "pball":
        return pball(spec["p"], spec.get("scales", (1.0, 1.0)))
    if kind == "ellipsoid":
        return Ellipsoid(spec["matrix"])
    if kind == "smoothed":
        return smooth_approx(from_dict(spec["base"]), float(spec["tau"]))
    if kind == "disk":
        return disk(spec.get("radius", 1.0))
    if kind == "square":
        return square(spec.get("half_width", 1.0))
    if kind == "diamond":
        return diamond(spec.get("radius", 1.0))
    raise DomainError(f"unknown body type {kind!r}")

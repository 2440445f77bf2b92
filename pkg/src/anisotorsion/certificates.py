"""Closed-form bounds for torsional rigidity and principal frequency.

Everything here is solver-free. Integrands are polynomials of degree <= 2 on
triangles (the gauge of a polygon is linear on the cone over each facet, the
anisotropic distance is linear on each facet cell), so a degree-2 triangle
rule makes the integrals exact up to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .anisogeom import Ellipse, Polygon, aniso_inradius, facet_decomposition
from .convex_body import ConvexBody
from .errors import DomainError
from .special import bessel_zero, j0_squared

__all__ = [
    "BoundCertificate",
    "BarrierField",
    "triangle_rule",
    "integrate_polygon",
    "torsion_lower_ubar",
    "integral_distance",
    "torsion_upper_refined",
    "barrier_field",
    "torsion_upper_barrier",
    "torsion_bounds",
    "eigen_bounds",
    "thin_rectangle_terms",
    "thin_rectangle_ratio",
    "sandwich_constants",
]

CERT_EPS = 1e-3


@dataclass(frozen=True)
class BoundCertificate:
    quantity: str  # "torsion" or "eigenvalue"
    lower: float
    upper: float
    methods: dict
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.quantity not in ("torsion", "eigenvalue"):
            raise ValueError(f"unknown quantity {self.quantity!r}")
        if not self.lower <= self.upper:
            raise ValueError("certificate with lower > upper")

    def to_dict(self):
        return {
            "quantity": self.quantity,
            "lower": self.lower,
            "upper": self.upper,
            "methods": dict(self.methods),
            **self.aux,
        }


# ---------------------------------------------------------------------------
# Quadrature


def triangle_rule(order=2):
    """Barycentric points and weights (summing to 1) exact for degree ``order``."""
    if order <= 1:
        return np.full((1, 3), 1 / 3), np.ones(1)
    if order == 2:
        pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        return pts, np.full(3, 1 / 3)
    # collapsed Gauss-Legendre product rule; the Jacobian (1 - u) adds a degree
    n = (order + 1) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w
    U, V = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w) * (1 - U)
    l1 = U.ravel()
    l2 = ((1 - U) * V).ravel()
    pts = np.column_stack([1 - l1 - l2, l1, l2])
    return pts, 2 * W.ravel()


def _fan(vertices, apex=None):
    v = np.asarray(vertices, dtype=float)
    if apex is None:
        return np.stack([np.repeat(v[:1], len(v) - 2, axis=0), v[1:-1], v[2:]], axis=1)
    apex = np.asarray(apex, dtype=float)
    return np.stack([np.repeat(apex[None], len(v), axis=0), v, np.roll(v, -1, axis=0)], axis=1)


def _tri_area(t):
    d1, d2 = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _integrate(tris, f, order=2):
    """Sum over triangles ``(m, 3, 2)`` of the integral of ``f(points) -> (m, q)``."""
    bary, w = triangle_rule(order)
    x = np.einsum("qk,mkd->mqd", bary, tris)
    vals = f(x)
    return float(np.sum(_tri_area(tris) * (vals @ w)))


def integrate_polygon(vertices, f, order=2):
    return _integrate(_fan(vertices), f, order)


def _inner(domain):
    if isinstance(domain, Ellipse):
        return domain.polygon()
    if isinstance(domain, Polygon):
        return domain
    raise DomainError(f"unsupported domain {type(domain).__name__}")


def _outer(domain):
    # upper bounds need a polygon containing the domain (torsion is monotone)
    if isinstance(domain, Ellipse):
        return domain.outer_polygon()
    return _inner(domain)


# ---------------------------------------------------------------------------
# Torsion lower bound


def torsion_lower_ubar(K: ConvexBody, domain, quad_order=2, origin=None):
    """Quotient of ``(1 - g^2) / 4`` with ``g`` the gauge of the domain about ``origin``.

    ``origin`` defaults to the centre of the largest inscribed copy of K. The
    value is a lower bound for the torsional rigidity of any domain containing
    the polygon.
    """
    poly = _inner(domain)
    c = aniso_inradius(K, poly).center if origin is None else np.asarray(origin, dtype=float)
    beta = poly.offsets - poly.normals @ c
    if np.any(beta <= 1e-12 * poly.scale):
        raise DomainError("gauge origin must be an interior point")
    n = poly.normals / beta[:, None]
    hn = K.support(-n)  # grad ubar = -(g / 2) n on cone j
    tris = _fan(poly.vertices, c)
    num = 0.0
    den = 0.0
    for j in range(len(n)):
        t = tris[j:j + 1]

        def g2(x, j=j):
            return ((x - c) @ n[j]) ** 2

        num += _integrate(t, lambda x: (1 - g2(x)) / 4, quad_order)
        den += _integrate(t, lambda x: g2(x) * hn[j] ** 2 / 4, quad_order)
    return num * num / den


# ---------------------------------------------------------------------------
# Torsion upper bounds


def integral_distance(K: ConvexBody, domain):
    """``int d_K(x, boundary) dx`` over a polygon, exact."""
    total = 0.0
    for cell in facet_decomposition(K, _inner(domain)):
        total += integrate_polygon(cell.vertices, cell.delta, 2)
    return total


def torsion_upper_refined(K: ConvexBody, domain):
    """``R^2 |P| / 3 + (R / 6) int (2 d_K - R)`` for a polygon P containing the domain.

    Summing the per-cell estimate of the barrier integral gives the factor 2
    on the distance term; the bound is below ``R^2 |P| / 3`` exactly when
    ``2 int d_K < R |P|``.
    """
    poly = _outer(domain)
    R = aniso_inradius(K, poly).R
    return _refined(R, poly.area, integral_distance(K, poly))


def _refined(R, area, int_d):
    return R * R * area / 3 + R / 6 * (2 * int_d - R * area)


@dataclass(frozen=True)
class BarrierField:
    """Piecewise quadratic ``-d^2 (1 + eps) / 2 + R d (1 + 2 eps)`` of the facet distance."""

    cells: tuple
    R: float
    eps: float

    def profile(self, d):
        return -0.5 * d * d * (1 + self.eps) + self.R * d * (1 + 2 * self.eps)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = np.min(np.stack([c.delta(x) for c in self.cells], axis=-1), axis=-1)
        return self.profile(d)

    def cell_values(self, j, x):
        return self.profile(self.cells[j].delta(x))

    def integral(self):
        return sum(
            integrate_polygon(c.vertices, lambda x, c=c: self.profile(c.delta(x)), 2) for c in self.cells
        )


def barrier_field(K: ConvexBody, domain, eps=0.0):
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    poly = _outer(domain)
    R = aniso_inradius(K, poly).R
    return BarrierField(tuple(facet_decomposition(K, poly)), R, float(eps))


def torsion_upper_barrier(K: ConvexBody, domain, eps=0.0):
    """``int u^eps`` for the facet-cell barrier."""
    return barrier_field(K, domain, eps).integral()


def torsion_bounds(K: ConvexBody, domain) -> BoundCertificate:
    inner = _inner(domain)
    outer = _outer(domain)
    R = aniso_inradius(K, outer).R
    int_d = integral_distance(K, outer)
    refined = _refined(R, outer.area, int_d)
    b0 = torsion_upper_barrier(K, outer, 0.0)
    b1 = torsion_upper_barrier(K, outer, CERT_EPS)
    lo = torsion_lower_ubar(K, inner)
    hi, how = (b1, f"barrier(eps={CERT_EPS:g})") if b1 <= refined else (refined, "refined")
    return BoundCertificate(
        "torsion",
        lo,
        hi,
        {"lower": "ubar", "upper": how},
        {
            "R": float(aniso_inradius(K, inner).R),
            "area": float(inner.area),
            "int_dK": int_d,
            "barrier_0": b0,
            "barrier_eps": b1,
            "refined": refined,
            "plain_upper": R * R * outer.area / 3,
        },
    )


# ---------------------------------------------------------------------------
# Eigenvalue


def eigen_bounds(K: ConvexBody, domain) -> BoundCertificate:
    """``(pi^2 / 4) R^-2 <= lambda_1 <= j_0^2 R^-2``."""
    R = aniso_inradius(K, _inner(domain)).R
    return BoundCertificate(
        "eigenvalue",
        math.pi**2 / 4 / R**2,
        j0_squared() / R**2,
        {"lower": "one-dimensional", "upper": "inscribed ball"},
        {"R": float(R), "area": float(_inner(domain).area)},
    )


def sandwich_constants(N=2):
    """``(1/(N(N+2)), 1/3, pi^2/4, j_{N/2-1}^2)``."""
    if N < 1:
        raise ValueError("dimension must be at least 1")
    return 1.0 / (N * (N + 2)), 1.0 / 3.0, math.pi**2 / 4, bessel_zero(N / 2 - 1) ** 2


# ---------------------------------------------------------------------------
# Thin rectangles


def thin_rectangle_terms(K: ConvexBody, eps, a=1.0, n=256):
    """Integrals of the thin-rectangle test function on ``[-eps, eps] x [-a, a]``.

    The middle block C carries ``(eps^2 - x^2) / (2 h_1^2)``; the two end caps D
    carry the same profile damped linearly to zero at the short sides. Cap
    integrals use an ``n x n`` Gauss-Legendre product rule.
    """
    a = float(np.atleast_1d(a)[0])
    eps = float(eps)
    if not 0 < eps < a:
        raise DomainError("need 0 < eps < a")
    h1 = float(K.support(np.array([1.0, 0.0])))
    h2 = float(K.support(np.array([0.0, 1.0])))
    area_c = 4 * eps * (a - eps)
    int_c = area_c * eps**2 / (3 * h1**2)
    dir_c = area_c * eps**2 / (3 * h1**2)
    x, w = np.polynomial.legendre.leggauss(n)
    X1, S = np.meshgrid(eps * x, 0.5 * eps * (x + 1), indexing="ij")
    W = np.outer(eps * w, 0.5 * eps * w)
    q = eps * eps - X1**2
    u = S * q / (2 * eps * h1**2)
    gx = -S * X1 / (eps * h1**2)
    gz = q / (2 * eps * h1**2)
    int_d = 0.0
    dir_d = 0.0
    for sgn in (-1.0, 1.0):  # top cap: z = a - s; bottom: z = -a + s
        grad = np.stack([gx, sgn * gz], axis=-1).reshape(-1, 2)
        hk = np.zeros(len(grad))
        nz = np.linalg.norm(grad, axis=1) > 0
        hk[nz] = K.support(grad[nz])
        int_d += float(np.sum(W * u))
        dir_d += float(np.sum(W.ravel() * hk**2))
    R = min(eps / h1, a / h2)
    return {
        "int_C": int_c,
        "dir_C": dir_c,
        "int_D": int_d,
        "dir_D": dir_d,
        "R": R,
        "area": 4 * eps * a,
        "h1": h1,
    }


def thin_rectangle_ratio(K: ConvexBody, eps, a=1.0, n=256):
    """Lower bound for ``T / (R^2 |Omega|)`` on ``[-eps, eps] x [-a, a]``; tends to 1/3."""
    t = thin_rectangle_terms(K, eps, a, n)
    T = (t["int_C"] + t["int_D"]) ** 2 / (t["dir_C"] + t["dir_D"])
    return T / (t["R"] ** 2 * t["area"])

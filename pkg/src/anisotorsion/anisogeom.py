"""Geometry of a planar convex domain measured by the gauge of a body K.

The anisotropic distance from an interior point to the boundary of a convex
polygon is ``min_j (b_j - nu_j . x) / h_K(nu_j)``; the inradius is the optimum
of a small linear program in ``(x, t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .convex_body import ConvexBody, support_gradient
from .errors import DomainError, NotCanonicalError

__all__ = [
    "Polygon",
    "Ellipse",
    "InradiusResult",
    "FacetCell",
    "ShearMap",
    "GaleResult",
    "clip_halfplane",
    "halfplane_intersection",
    "polygon_area",
    "aniso_distance",
    "aniso_inradius",
    "contact_normals",
    "covering_check",
    "canonicalize",
    "gale_polytope",
    "facet_decomposition",
    "shear_map",
]


def polygon_area(v):
    v = np.asarray(v, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _centroid(v):
    v = np.asarray(v, dtype=float)
    a = polygon_area(v)
    if abs(a) < 1e-300:
        return v.mean(axis=0)
    x, y = v[:, 0], v[:, 1]
    cr = x * np.roll(y, -1) - np.roll(x, -1) * y
    cx = np.sum((x + np.roll(x, -1)) * cr) / (6 * a)
    cy = np.sum((y + np.roll(y, -1)) * cr) / (6 * a)
    return np.array([cx, cy])


def clip_halfplane(verts, a, b):
    """Sutherland-Hodgman step: keep the part of a convex polygon with ``a.x <= b``."""
    verts = np.asarray(verts, dtype=float)
    if len(verts) == 0:
        return verts
    s = verts @ a - b
    out = []
    n = len(verts)
    for i in range(n):
        p, q = verts[i], verts[(i + 1) % n]
        sp, sq = s[i], s[(i + 1) % n]
        if sp <= 0:
            out.append(p)
        if (sp < 0 < sq) or (sq < 0 < sp):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    if not out:
        return np.zeros((0, 2))
    out = np.array(out)
    # drop consecutive duplicates created by vertices lying on the line
    keep = np.linalg.norm(out - np.roll(out, -1, axis=0), axis=1) > 1e-15 * (1 + np.abs(out).max())
    return out[keep] if keep.any() else out[:1]


def halfplane_intersection(normals, offsets, box):
    """Intersect ``{x : n_k . x <= c_k}`` inside the square ``[-box, box]^2``."""
    v = np.array([[-box, -box], [box, -box], [box, box], [-box, box]], dtype=float)
    for a, c in zip(normals, offsets):
        v = clip_halfplane(v, np.asarray(a, dtype=float), float(c))
        if len(v) == 0:
            break
    return v


# ---------------------------------------------------------------------------
# Domains


class Polygon:
    """Bounded convex polygon, vertices stored counterclockwise.

    Facet ``j`` joins vertex ``j`` to vertex ``j + 1`` and lies on the line
    ``normals[j] . x = offsets[j]`` with unit outward normal.
    """

    def __init__(self, vertices, *, tol=1e-12):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DomainError("polygon needs at least three planar vertices")
        if polygon_area(v) < 0:
            v = v[::-1]
        scale = np.abs(v).max() + 1.0
        # remove repeated and collinear vertices
        changed = True
        while changed and len(v) >= 3:
            changed = False
            e1 = np.roll(v, -1, axis=0) - v
            e0 = v - np.roll(v, 1, axis=0)
            cross = e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0]
            flat = (np.abs(cross) <= tol * scale**2) | (np.linalg.norm(e1, axis=1) <= tol * scale)
            if flat.any():
                v = v[~flat] if (~flat).sum() >= 3 else v[:0]
                changed = True
        if len(v) < 3 or polygon_area(v) <= tol * scale**2:
            raise DomainError("polygon is degenerate (empty interior)")
        e1 = np.roll(v, -1, axis=0) - v
        e0 = v - np.roll(v, 1, axis=0)
        cross = e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0]
        if np.any(cross < 0):
            raise DomainError("polygon is not convex")
        # the turning number must be one (rules out star-shaped self-overlap)
        ang = np.arctan2(e1[:, 1], e1[:, 0])
        turn = np.sum(np.mod(np.roll(ang, -1) - ang, 2 * np.pi))
        if abs(turn - 2 * np.pi) > 1e-6:
            raise DomainError("polygon is not simple")
        self.vertices = v
        self.vertices.setflags(write=False)
        t = e1 / np.linalg.norm(e1, axis=1)[:, None]
        self.normals = np.column_stack([t[:, 1], -t[:, 0]])
        self.offsets = np.einsum("ij,ij->i", self.normals, v)
        self.normals.setflags(write=False)
        self.offsets.setflags(write=False)

    @classmethod
    def rectangle(cls, a, b, center=(0.0, 0.0)):
        cx, cy = center
        return cls([[cx - a, cy - b], [cx + a, cy - b], [cx + a, cy + b], [cx - a, cy + b]])

    @classmethod
    def regular(cls, n, radius=1.0, center=(0.0, 0.0), phase=0.0):
        t = phase + 2 * np.pi * np.arange(n) / n
        return cls(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]))

    @property
    def area(self):
        return polygon_area(self.vertices)

    @property
    def centroid(self):
        return _centroid(self.vertices)

    @property
    def diameter(self):
        v = self.vertices
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=-1)))

    @property
    def scale(self):
        return float(np.abs(self.vertices).max() + self.diameter)

    def signed_distance(self, x):
        """``max_j (nu_j . x - b_j)``: exact Euclidean signed distance inside."""
        return np.max(np.asarray(x, dtype=float) @ self.normals.T - self.offsets, axis=-1)

    def contains(self, x, tol=1e-12):
        return self.signed_distance(x) <= tol * self.scale

    def translated(self, c):
        return Polygon(self.vertices + np.asarray(c, dtype=float))

    def scaled(self, t):
        return Polygon(self.vertices * float(t))

    def transformed(self, L):
        return Polygon(self.vertices @ np.asarray(L, dtype=float).T)

    def polygon(self):
        return self

    def boundary_point(self, p, q):
        """Midpoint of a boundary segment (the boundary is straight)."""
        return 0.5 * (p + q)

    def to_dict(self):
        return {"type": "polygon", "vertices": self.vertices.tolist()}

    def __repr__(self):
        return f"Polygon({len(self.vertices)} vertices, area={self.area:.6g})"


class Ellipse:
    """Axis-aligned ellipse ``((x - c)/a)^2 + ((y - c)/b)^2 <= 1``.

    Used by the mesher so boundary nodes lie on the curve; geometric
    operations go through the inscribed polygon returned by :meth:`polygon`.
    """

    def __init__(self, semi_axes, center=(0.0, 0.0), n_poly=256):
        a, b = map(float, semi_axes)
        if a <= 0 or b <= 0:
            raise DomainError("semi-axes must be positive")
        self.semi_axes = np.array([a, b])
        self.center = np.asarray(center, dtype=float)
        self.n_poly = int(n_poly)

    @property
    def area(self):
        return float(np.pi * self.semi_axes.prod())

    @property
    def diameter(self):
        return float(2 * self.semi_axes.max())

    @property
    def scale(self):
        return float(np.abs(self.center).max() + 3 * self.semi_axes.max())

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.center + np.stack([self.semi_axes[0] * np.cos(t), self.semi_axes[1] * np.sin(t)], axis=-1)

    def polygon(self, n=None):
        return Polygon(self.point(2 * np.pi * np.arange(n or self.n_poly) / (n or self.n_poly)))

    def outer_polygon(self, n=None):
        """Circumscribed polygon: the inscribed one blown up by ``1 / cos(pi / n)``."""
        n = n or self.n_poly
        t = 2 * np.pi * np.arange(n) / n
        return Polygon(self.center + (self.point(t) - self.center) / np.cos(np.pi / n))

    def signed_distance(self, x):
        """Approximate signed distance (exact on the boundary and for disks)."""
        y = (np.asarray(x, dtype=float) - self.center) / self.semi_axes
        r = np.linalg.norm(y, axis=-1)
        return (r - 1.0) * self.semi_axes.min()

    def contains(self, x, tol=1e-12):
        return self.signed_distance(x) <= tol * self.scale

    def boundary_point(self, p, q):
        m = 0.5 * (p + q) - self.center
        r = np.linalg.norm(m / self.semi_axes)
        return self.center + m / r

    def scaled(self, t):
        return Ellipse(self.semi_axes * t, self.center * t, self.n_poly)

    def to_dict(self):
        return {"type": "ellipse", "semi_axes": self.semi_axes.tolist(), "center": self.center.tolist()}

    def __repr__(self):
        return f"Ellipse(semi_axes={self.semi_axes.tolist()})"


# ---------------------------------------------------------------------------
# Distance and inradius


def _weights(K: ConvexBody, poly: Polygon):
    h = K.support(poly.normals)
    if np.any(h <= 0):
        raise DomainError("support function must be positive on facet normals")
    return h


def aniso_distance(K, x, domain):
    """Gauge distance from interior point(s) ``x`` to the boundary of ``domain``."""
    poly = domain.polygon()
    x = np.asarray(x, dtype=float)
    if not np.all(poly.contains(x)):
        raise DomainError("point lies outside the domain")
    d = (poly.offsets - x @ poly.normals.T) / _weights(K, poly)
    return np.maximum(np.min(d, axis=-1), 0.0)


@dataclass(frozen=True)
class InradiusResult:
    R: float
    center: np.ndarray
    active: tuple

    def to_dict(self):
        return {"R": self.R, "center": self.center.tolist(), "active": list(self.active)}


_LP_OPTS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _lp(c, A, b):
    return linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * len(c), method="highs-ds", options=_LP_OPTS)


def aniso_inradius(K, domain, *, tol=1e-12):
    """Largest ``t`` with ``x + tK`` inside the domain, via a linear program.

    When the optimal centres form a segment (two parallel facets bind), the
    midpoint of that segment is returned so the answer does not depend on the
    solver's pivoting.
    """
    poly = domain.polygon()
    h = _weights(K, poly)
    A = np.column_stack([poly.normals, h])
    res = _lp([0.0, 0.0, -1.0], A, poly.offsets)
    if res.status != 0 or res.x[2] <= 0:
        raise DomainError(f"inradius linear program failed: {res.message}")
    t = res.x[2]
    center = res.x[:2]
    scale = poly.scale
    slack = (poly.offsets - poly.normals @ center) / h - t
    act = np.flatnonzero(slack <= 1e-9 * scale)
    nrm = poly.normals[act]
    dots = nrm @ nrm.T
    pair = np.argwhere(dots < -1 + 1e-12)
    if len(pair):
        # optimal face may be a segment orthogonal to the parallel pair
        nu = nrm[pair[0, 0]]
        u = np.array([-nu[1], nu[0]])
        rhs = poly.offsets - t * h + tol * scale
        lo = _lp(u, poly.normals, rhs)
        hi = _lp(-u, poly.normals, rhs)
        if lo.status == 0 and hi.status == 0:
            center = 0.5 * (lo.x + hi.x)
            i, k = act[pair[0, 0]], act[pair[0, 1]]
            # both binding facets are equidistant from the segment
            center = center + nu * (0.5 * (poly.offsets[i] - poly.offsets[k]) - nu @ center)
    slack = (poly.offsets - poly.normals @ center) / h
    R = float(max(np.min(slack), 0.0))
    active = tuple(int(j) for j in np.flatnonzero(slack - R <= 1e-8 * scale))
    return InradiusResult(R=R, center=np.asarray(center, dtype=float), active=active)


def contact_normals(K, domain, r=None):
    """Outer normals of the facets touched by the maximal inscribed copy of K."""
    poly = domain.polygon()
    if r is None:
        r = aniso_inradius(K, poly)
    return [poly.normals[j].copy() for j in r.active]


def covering_check(normals):
    """True iff every unit vector has nonnegative product with some normal.

    Equivalently, the origin lies in the convex hull of the normals; checked
    as a feasibility linear program.
    """
    nv = np.atleast_2d(np.asarray(normals, dtype=float))
    if nv.size == 0:
        raise DomainError("covering_check needs at least one normal")
    k, n = nv.shape
    A_eq = np.vstack([nv.T, np.ones((1, k))])
    b_eq = np.concatenate([np.zeros(n), [1.0]])
    res = linprog(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs", options=_LP_OPTS)
    return bool(res.status == 0)


def canonicalize(K, domain):
    """Translate the incenter to the origin and rescale to unit inradius.

    Returns ``(canonical polygon, center, R)``.
    """
    poly = domain.polygon()
    r = aniso_inradius(K, poly)
    return poly.translated(-r.center).scaled(1.0 / r.R), r.center, r.R


@dataclass(frozen=True)
class GaleResult:
    polygon: Polygon
    normals: np.ndarray
    clipped: bool


def gale_polytope(K, domain, *, tol=1e-8, box_factor=10.0):
    """Circumscribed polygon cut out by the contact facets of the maximal body.

    The domain must be canonical (incenter at the origin, unit inradius). A
    slab-like result is clipped to a box of ``box_factor`` times the
    circumradius and flagged.
    """
    poly = domain.polygon()
    r = aniso_inradius(K, poly)
    if abs(r.R - 1.0) > tol or np.linalg.norm(r.center) > tol * poly.scale:
        raise NotCanonicalError("domain not in canonical position")
    normals = np.array(contact_normals(K, poly, r))
    if not covering_check(normals):
        raise NotCanonicalError("domain not in canonical position")
    offsets = poly.offsets[list(r.active)]
    rho = float(np.max(np.linalg.norm(poly.vertices, axis=1)))
    box = box_factor * rho
    verts = halfplane_intersection(normals, offsets, box)
    clipped = bool(np.any(np.abs(verts) >= box * (1 - 1e-12)))
    return GaleResult(polygon=Polygon(verts), normals=normals, clipped=clipped)


# ---------------------------------------------------------------------------
# Facet cells


@dataclass(frozen=True)
class FacetCell:
    """Points of the domain whose nearest facet (in the K-gauge) is ``index``."""

    index: int
    vertices: np.ndarray
    normal: np.ndarray
    offset: float
    weight: float  # h_K(normal)

    def delta(self, x):
        """Affine distance ``(b_j - nu_j . x) / h_K(nu_j)`` to the facet line."""
        return (self.offset - np.asarray(x, dtype=float) @ self.normal) / self.weight

    @property
    def area(self):
        return polygon_area(self.vertices)


def facet_decomposition(K, domain):
    """Split the polygon into nearest-facet cells; each cell is a convex polygon."""
    poly = domain.polygon()
    h = _weights(K, poly)
    nw = poly.normals / h[:, None]
    bw = poly.offsets / h
    cells = []
    m = len(h)
    for j in range(m):
        A = nw - nw[j]
        b = bw - bw[j]
        v = poly.vertices.copy()
        done = np.zeros(m, dtype=bool)
        done[j] = True
        order = [(j - 1) % m, (j + 1) % m]
        while len(v) and order:
            for l in order:
                v = clip_halfplane(v, A[l], b[l])
                done[l] = True
                if len(v) == 0:
                    break
            if len(v) == 0:
                break
            # only halfplanes that still cut the current piece matter
            viol = np.max(v @ A.T - b, axis=0) > 0
            order = list(np.flatnonzero(viol & ~done)[:8])
        if len(v) >= 3 and polygon_area(v) > 0:
            cells.append(FacetCell(j, v, poly.normals[j].copy(), float(poly.offsets[j]), float(h[j])))
    return cells


# ---------------------------------------------------------------------------
# Shear


@dataclass(frozen=True)
class ShearMap:
    matrix: np.ndarray
    normal: np.ndarray = field(default=None)

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.matrix.T


def shear_map(K, nu):
    """Unimodular map fixing ``nu``'s orthogonal complement with ``L Dh_K(nu) = h_K(nu) nu``."""
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    d = support_gradient(K, nu)
    hn = float(K.support(nu))
    if float(d @ nu) <= 0 or hn <= 0:
        raise RuntimeError("support gradient has nonpositive normal component")
    perp = d - (d @ nu) * nu
    L = np.eye(len(nu)) - np.outer(perp / hn, nu)
    return ShearMap(matrix=L, normal=nu)

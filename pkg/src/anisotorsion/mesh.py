"""P1 triangulations of convex planar domains.

A coarse mesh is built by force-equilibrium smoothing of a hexagonal point
lattice (Persson & Strang's distmesh idea with all boundary nodes pinned),
then uniformly refined by edge bisection down to the requested size. Meshes
for ``h`` and ``h / 2`` therefore share their coarse ancestor and are nested,
which keeps convergence studies clean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .anisogeom import Ellipse, Polygon, aniso_inradius
from .convex_body import disk
from .errors import DomainError

__all__ = ["Mesh", "triangulate", "refine"]


@dataclass(frozen=True)
class Mesh:
    points: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (m, 3), counterclockwise
    boundary: np.ndarray  # (n,) bool
    h: float

    @property
    def n_points(self):
        return len(self.points)

    @property
    def areas(self):
        p = self.points[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self):
        return float(self.areas.sum())

    def min_angle(self):
        """Smallest interior angle over all triangles, in degrees."""
        p = self.points[self.triangles]
        worst = 180.0
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            c = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            worst = min(worst, float(np.degrees(np.arccos(np.clip(c, -1, 1))).min()))
        return worst

    def transformed(self, L):
        """Image of the mesh under a linear map with positive determinant."""
        L = np.asarray(L, dtype=float)
        if np.linalg.det(L) <= 0:
            raise DomainError("map must preserve orientation")
        return Mesh(self.points @ L.T, self.triangles, self.boundary, self.h)

    def scaled(self, t):
        return Mesh(self.points * float(t), self.triangles, self.boundary, self.h * float(t))


def _edges(tri):
    e = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    return np.sort(e, axis=1)


def _boundary_nodes(domain, h):
    """Boundary nodes at spacing about ``h``, including every polygon corner."""
    if isinstance(domain, Ellipse):
        a, b = domain.semi_axes
        perim = np.pi * (3 * (a + b) - np.sqrt((3 * a + b) * (a + 3 * b)))
        n = max(8, int(np.ceil(perim / h)))
        return domain.point(2 * np.pi * np.arange(n) / n)
    v = domain.vertices
    pts = []
    for i in range(len(v)):
        p, q = v[i], v[(i + 1) % len(v)]
        k = max(1, int(np.ceil(np.linalg.norm(q - p) / h)))
        t = np.arange(k)[:, None] / k
        pts.append(p + t * (q - p))
    return np.vstack(pts)


def _sdf(poly, x):
    return poly.signed_distance(x)


def _pull_inside(poly, x, margin):
    """Move points of ``x`` lying within ``margin`` of the boundary inward."""
    for _ in range(4):
        s = x @ poly.normals.T - poly.offsets + margin
        j = np.argmax(s, axis=1)
        bad = s[np.arange(len(x)), j] > 0
        if not bad.any():
            break
        x[bad] -= s[bad, j[bad]][:, None] * poly.normals[j[bad]]
    return x


def _triangles(points, scale):
    tri = Delaunay(points).simplices
    p = points[tri]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    neg = area < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]
    return tri[np.abs(area) > 1e-12 * scale**2]


def _coarse(domain, h, iters=80):
    bnd = _boundary_nodes(domain, h)
    # inscribed polygon of the boundary nodes: exact for polygons
    poly = Polygon(bnd) if isinstance(domain, Ellipse) else domain
    lo, hi = bnd.min(axis=0), bnd.max(axis=0)
    c = poly.centroid
    dy = h * np.sqrt(3) / 2
    ks = np.arange(np.floor((lo[1] - c[1]) / dy), np.ceil((hi[1] - c[1]) / dy) + 1)
    js = np.arange(np.floor((lo[0] - c[0]) / h) - 1, np.ceil((hi[0] - c[0]) / h) + 1)
    J, Kk = np.meshgrid(js, ks)
    inner = np.column_stack([(c[0] + h * (J + 0.5 * (Kk % 2))).ravel(), (c[1] + dy * Kk).ravel()])
    inner = inner[_sdf(poly, inner) < -0.4 * h]
    nb = len(bnd)
    pts = np.vstack([bnd, inner])
    scale = float(np.abs(bnd).max() + 1.0)
    if len(inner):
        for _ in range(iters):
            tri = _triangles(pts, scale)
            e = np.unique(_edges(tri), axis=0)
            vec = pts[e[:, 0]] - pts[e[:, 1]]
            L = np.linalg.norm(vec, axis=1)
            L0 = 1.2 * np.sqrt(np.mean(L**2))
            F = np.maximum(L0 - L, 0.0)
            fv = (F / L)[:, None] * vec
            tot = np.zeros_like(pts)
            np.add.at(tot, e[:, 0], fv)
            np.add.at(tot, e[:, 1], -fv)
            tot[:nb] = 0.0
            pts = pts + 0.2 * tot
            pts[nb:] = _pull_inside(poly, pts[nb:], 0.3 * h)
            if np.max(np.linalg.norm(0.2 * tot[nb:], axis=1)) < 1e-3 * h:
                break
    tri = _triangles(pts, scale)
    boundary = np.zeros(len(pts), dtype=bool)
    boundary[:nb] = True
    return Mesh(pts, tri, boundary, h)


def refine(mesh, domain):
    """Split every triangle into four; new boundary nodes are placed on the domain boundary."""
    tri = mesh.triangles
    e_all = _edges(tri)
    edges, inv, counts = np.unique(e_all, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    mids = 0.5 * (mesh.points[edges[:, 0]] + mesh.points[edges[:, 1]])
    on_bnd = counts == 1
    for k in np.flatnonzero(on_bnd):
        mids[k] = domain.boundary_point(mesh.points[edges[k, 0]], mesh.points[edges[k, 1]])
    n = len(mesh.points)
    m = len(tri)
    m01, m12, m20 = inv[:m] + n, inv[m:2 * m] + n, inv[2 * m:] + n
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    new = np.vstack([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])
    pts = np.vstack([mesh.points, mids])
    boundary = np.concatenate([mesh.boundary, on_bnd])
    return Mesh(pts, new, boundary, mesh.h / 2)


def triangulate(domain, h):
    """Mesh a convex polygon or ellipse with target edge length ``h``."""
    if not h > 0:
        raise DomainError("mesh size must be positive")
    if isinstance(domain, Polygon):
        poly = domain
    elif isinstance(domain, Ellipse):
        poly = domain.polygon(64)
    else:
        raise DomainError(f"cannot mesh {type(domain).__name__}")
    diam = poly.diameter
    if h >= diam / 2:
        raise DomainError(f"mesh size {h} too large for a domain of diameter {diam:.4g}")
    r_in = aniso_inradius(disk(), poly).R
    edge = float(np.min(np.linalg.norm(np.roll(poly.vertices, -1, axis=0) - poly.vertices, axis=1)))
    if isinstance(domain, Ellipse):
        edge = np.inf
    cap = min(diam / 8, 0.8 * r_in, 1.5 * edge)
    k = 0
    while h * 2 ** (k + 1) <= cap:
        k += 1
    mesh = _coarse(domain, h * 2**k)
    for _ in range(k):
        mesh = refine(mesh, domain)
    return Mesh(mesh.points, mesh.triangles, mesh.boundary, float(h))

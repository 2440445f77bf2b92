"""JSON descriptions of bodies and domains, and small file helpers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .anisogeom import Ellipse, Polygon
from .convex_body import ConvexBody, Ellipsoid, PBall, Polytope, from_dict
from .errors import DomainError

__all__ = ["read_json", "load_body", "load_domain", "domain_from_dict", "body_as_domain", "write_field_csv"]


def read_json(src, base=None):
    """A dict given inline, or the parsed contents of a JSON file."""
    if isinstance(src, dict):
        return src
    path = Path(src)
    if base is not None and not path.is_absolute():
        path = Path(base) / path
    with open(path) as fh:
        return json.load(fh)


def load_body(src, base=None) -> ConvexBody:
    return from_dict(read_json(src, base))


def domain_from_dict(spec):
    kind = spec.get("type")
    c = spec.get("center", (0.0, 0.0))
    if kind == "polygon":
        return Polygon(spec["vertices"])
    if kind == "rectangle":
        a, b = spec["half_widths"]
        return Polygon.rectangle(a, b, c)
    if kind == "regular":
        return Polygon.regular(int(spec["n"]), spec.get("radius", 1.0), c, spec.get("phase", 0.0))
    if kind == "ellipse":
        return Ellipse(spec["semi_axes"], c)
    if kind == "disk":
        r = spec.get("radius", 1.0)
        return Ellipse((r, r), c)
    if kind == "body":
        return body_as_domain(from_dict(spec["body"]))
    raise DomainError(f"unknown domain type {kind!r}")


def load_domain(src, base=None):
    return domain_from_dict(read_json(src, base))


def body_as_domain(K):
    """The body itself as a planar domain (polygon or axis-aligned ellipse)."""
    if isinstance(K, Polytope) and K.dim == 2:
        return Polygon(K.vertices)
    if isinstance(K, PBall) and K.p == 2.0 and K.dim == 2:
        return Ellipse(K.scales)
    if isinstance(K, Ellipsoid) and K.dim == 2:
        M = K.matrix
        if abs(M[0, 1]) > 1e-14 * np.abs(M).max():
            raise DomainError("only axis-aligned ellipses are supported as domains")
        return Ellipse(1.0 / np.sqrt(np.diag(M)))
    raise DomainError(f"cannot use {type(K).__name__} as a domain")


def write_field_csv(path, points, values):
    with open(path, "w") as fh:
        fh.write("x,y,u\n")
        for (x, y), u in zip(points, values):
            fh.write(f"{float(x)!r},{float(y)!r},{float(u)!r}\n")

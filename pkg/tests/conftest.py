import numpy as np
import pytest

from anisotorsion import diamond, disk, ellipsoid, square

# 2:1 ellipse x^2/4 + y^2 <= 1
ELLIPSE21 = [[0.25, 0.0], [0.0, 1.0]]


def suite_bodies():
    return {
        "disk": disk(),
        "square": square(),
        "diamond": diamond(),
        "ellipse21": ellipsoid(ELLIPSE21),
    }


@pytest.fixture(scope="session")
def bodies():
    return suite_bodies()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_convex_polygon(rng, n=None, scale=1.0):
    """Convex hull of random points around the origin (origin kept inside)."""
    from scipy.spatial import ConvexHull

    from anisotorsion import Polygon

    while True:
        k = n or int(rng.integers(5, 12))
        ang = np.sort(rng.uniform(0, 2 * np.pi, k))
        rad = rng.uniform(0.5, 1.5, k)
        pts = scale * np.column_stack([rad * np.cos(ang), 0.6 * rad * np.sin(ang)])
        hull = ConvexHull(pts)
        if len(hull.vertices) >= 3 and hull.volume > 0.2 * scale**2:
            return Polygon(pts[hull.vertices])


_SOLVES = {}


def solved(body_name, domain, h, which="torsion"):
    """Cached (mesh context, torsion report[, eigen report]) for a named body on a domain.

    ``domain`` is a hashable key: "self" (Omega = K), or a tuple
    ("rect", a, b) / ("regular", n) / ("polygon", vertices-tuple).
    """
    from anisotorsion import Polygon, solve_eigen, solve_torsion, triangulate
    from anisotorsion.io import body_as_domain
    from anisotorsion.solver import FEContext

    key = (body_name, domain, h)
    if key not in _SOLVES:
        K = suite_bodies()[body_name]
        if domain == "self":
            dom = body_as_domain(K)
        elif domain[0] == "rect":
            dom = Polygon.rectangle(domain[1], domain[2])
        elif domain[0] == "regular":
            dom = Polygon.regular(domain[1])
        else:
            dom = Polygon(domain[1])
        ctx = FEContext(triangulate(dom, h))
        _SOLVES[key] = {"K": K, "dom": dom, "ctx": ctx, "torsion": solve_torsion(K, ctx)}
    entry = _SOLVES[key]
    if which == "eigen" and "eigen" not in entry:
        entry["eigen"] = solve_eigen(entry["K"], entry["ctx"], init=entry["torsion"].field)
    return entry


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])

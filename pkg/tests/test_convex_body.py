import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisotorsion import (
    DomainError,
    Ellipsoid,
    PBall,
    Polytope,
    Smoothed,
    diamond,
    disk,
    ellipsoid,
    gauge,
    pball,
    polar,
    quadratic_gradient,
    smooth_approx,
    square,
    support,
    support_gradient,
)
from anisotorsion.convex_body import from_dict

from conftest import ELLIPSE21

SMOOTH = {
    "disk": disk(),
    "ellipse21": ellipsoid(ELLIPSE21),
    "tilted_ellipse": ellipsoid([[2.0, 0.6], [0.6, 0.7]]),
    "p3": pball(3, [1.0, 0.5]),
    "p1.5": pball(1.5, [2.0, 1.0]),
}


def unit_dirs(rng, n):
    a = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([np.cos(a), np.sin(a)])


# --- spec examples -----------------------------------------------------------


def test_support_examples():
    assert support(square(), [1.0, 0.0]) == 1.0
    assert support(disk(), [3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)
    assert support(diamond(), [2.0, -5.0]) == 5.0


def test_gauge_examples():
    assert gauge(square(), [0.5, -0.5]) == pytest.approx(0.5, abs=1e-15)
    assert gauge(disk(), [0.6, 0.8]) == pytest.approx(1.0, abs=1e-15)
    assert gauge(ellipsoid(ELLIPSE21), [2.0, 0.0]) == pytest.approx(1.0, abs=1e-15)
    assert gauge(square(), [0.0, 0.0]) == 0.0


def test_polar_examples():
    P = polar(square())
    assert isinstance(P, Polytope)
    want = {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)}
    got = {tuple(np.round(v, 12) + 0.0) for v in P.vertices}
    assert got == want
    D = polar(disk())
    x = np.array([[0.3, -2.0], [1.0, 1.0]])
    np.testing.assert_allclose(D.support(x), disk().support(x), rtol=1e-15)
    P3 = polar(pball(3))
    assert isinstance(P3, PBall) and P3.p == pytest.approx(1.5)
    np.testing.assert_allclose(P3.support(x), np.sum(np.abs(x) ** 3, axis=1) ** (1 / 3), rtol=1e-14)


def test_polar_involution_polytope(rng):
    pts = rng.normal(size=(7, 2))
    K = Polytope(np.vstack([pts, -pts]))
    KK = polar(polar(K))
    a = np.array(sorted(map(tuple, np.round(K.vertices, 9))))
    b = np.array(sorted(map(tuple, np.round(KK.vertices, 9))))
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_polar_of_smoothed_delegates():
    S = smooth_approx(square(), 0.1)
    P = polar(S)
    x = np.array([0.3, 0.7])
    assert P.support(x) == pytest.approx(S.gauge(x), rel=1e-12)
    assert P.gauge(x) == pytest.approx(S.support(x), rel=1e-12)
    assert polar(P) is S


def test_support_gradient_examples():
    np.testing.assert_allclose(support_gradient(disk(), [3.0, 4.0]), [0.6, 0.8], atol=1e-15)
    E = ellipsoid(ELLIPSE21)
    np.testing.assert_allclose(support_gradient(E, [0.0, 1.0]), [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(support_gradient(E, [1.0, 1.0]), np.array([4.0, 1.0]) / math.sqrt(5), atol=1e-14)


def test_support_gradient_ellipse_bruteforce():
    # maximise x.y over a dense sample of the ellipse boundary
    t = np.linspace(0, 2 * np.pi, 400001)
    y = np.column_stack([2 * np.cos(t), np.sin(t)])
    best = y[np.argmax(y @ [1.0, 1.0])]
    np.testing.assert_allclose(support_gradient(ellipsoid(ELLIPSE21), [1.0, 1.0]), best, atol=1e-4)


def test_quadratic_gradient_examples():
    np.testing.assert_allclose(quadratic_gradient(disk(), [3.0, 4.0]), [3.0, 4.0], atol=1e-14)
    for K in (disk(), square(), diamond(), ellipsoid(ELLIPSE21), pball(3)):
        np.testing.assert_array_equal(quadratic_gradient(K, [0.0, 0.0]), [0.0, 0.0])
    E = ellipsoid(ELLIPSE21)
    np.testing.assert_allclose(quadratic_gradient(E, [1.0, 0.0]), [4.0, 0.0], atol=1e-14)
    # central differences of H = (4 x1^2 + x2^2) / 2
    H = lambda x: 0.5 * E.support(np.asarray(x)) ** 2
    s = 1e-6
    fd = [(H([1 + s, 0]) - H([1 - s, 0])) / (2 * s), (H([1, s]) - H([1, -s])) / (2 * s)]
    np.testing.assert_allclose(fd, [4.0, 0.0], atol=1e-6)


def test_smooth_approx_examples():
    D = disk()
    assert smooth_approx(D, 0.3) is D
    S = smooth_approx(square(), 0.1)
    v = float(S.support([1.0, 0.0]))
    assert 1.0 <= v <= 1.0 + 0.1 * math.log(4)
    assert S.hausdorff_bound == pytest.approx(0.1 * math.log(4))
    vals = [float(smooth_approx(diamond(), t).support([1.0, 1.0])) for t in (0.2, 0.1, 0.05)]
    assert vals[0] > vals[1] > vals[2] > 1.0
    assert vals[2] - 1.0 < 0.05 * math.log(4)


def test_smoothing_converges_uniformly(rng):
    x = unit_dirs(rng, 500)
    K = Polytope([[1, 0.2], [0.3, 1], [-1, -0.2], [-0.3, -1]])
    errs = []
    for tau in (1e-1, 1e-2, 1e-3):
        S = smooth_approx(K, tau)
        d = S.support(x) - K.support(x)
        assert np.all(d >= -1e-15)
        assert np.all(d <= S.hausdorff_bound + 1e-15)
        errs.append(d.max())
    assert errs[0] > errs[1] > errs[2]


# --- errors ----------------------------------------------------------------------


def test_zero_direction_errors():
    for K in (square(), disk(), ellipsoid(ELLIPSE21)):
        with pytest.raises(DomainError):
            support(K, [0.0, 0.0])
        with pytest.raises(DomainError):
            support_gradient(K, [0.0, 0.0])


def test_invalid_bodies():
    with pytest.raises(DomainError):
        Polytope([[1, 0], [0, 1], [-1, 0]])  # not symmetric
    with pytest.raises(DomainError):
        Polytope([[1, 1], [-1, -1]])  # flat
    with pytest.raises(DomainError):
        Ellipsoid([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(DomainError):
        pball(2, [1.0, -1.0])
    with pytest.raises(DomainError):
        smooth_approx(square(), 0.0)


def test_pball_routing():
    assert isinstance(pball(1), Polytope)
    assert isinstance(pball("inf"), Polytope)
    assert isinstance(pball(2), PBall)


def test_from_dict_roundtrip():
    for K in (square(), disk(), ellipsoid(ELLIPSE21), pball(3, [1, 2]), smooth_approx(diamond(), 0.05)):
        K2 = from_dict(K.to_dict())
        x = np.array([[0.3, -1.2], [2.0, 0.1]])
        np.testing.assert_allclose(K2.support(x), K.support(x), rtol=1e-15)
    unordered = from_dict({"type": "polytope", "vertices": [[1, 1], [-1, -1], [1, -1], [-1, 1], [0, 0.5]]})
    assert len(unordered.vertices) == 4
    with pytest.raises(DomainError):
        from_dict({"type": "polytope", "vertices": [[2, 0], [0, 1], [-1, 0], [0, -1]]})


# --- tie-breaking ------------------------------------------------------------------


def test_polytope_subgradient_is_lexicographic_vertex():
    K = square()
    # (1, 0) is normal to the edge between (1, -1) and (1, 1)
    np.testing.assert_array_equal(support_gradient(K, [1.0, 0.0]), [1.0, -1.0])
    np.testing.assert_array_equal(support_gradient(K, [0.0, 1.0]), [-1.0, 1.0])
    g = support_gradient(K, [1.0, 1e-9])
    np.testing.assert_array_equal(g, [1.0, 1.0])


# --- properties -------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(SMOOTH))
def test_hdh_identity(name, rng):
    K = SMOOTH[name]
    x = rng.normal(size=(1000, 2))
    err = np.abs(K.gauge(support_gradient(K, x)) - 1.0)
    assert err.max() < 1e-9


@pytest.mark.parametrize("name", sorted(SMOOTH))
def test_invgrad_identity(name, rng):
    K = SMOOTH[name]
    Kp = polar(K)
    x = rng.normal(size=(1000, 2)) * rng.uniform(0.1, 10, size=(1000, 1))
    back = quadratic_gradient(K, quadratic_gradient(Kp, x))
    err = np.linalg.norm(back - x, axis=1) / np.linalg.norm(x, axis=1)
    assert err.max() < 1e-7


def test_identities_smoothed_body(rng):
    S = smooth_approx(Polytope([[1, 0.2], [0.3, 1], [-1, -0.2], [-0.3, -1]]), 0.05)
    x = rng.normal(size=(200, 2))
    assert np.max(np.abs(S.gauge(support_gradient(S, x)) - 1)) < 1e-9
    back = quadratic_gradient(S, quadratic_gradient(polar(S), x))
    assert np.max(np.linalg.norm(back - x, axis=1) / np.linalg.norm(x, axis=1)) < 1e-7


ALL = dict(SMOOTH, square=square(), diamond=diamond(), hexagon=Polytope(
    [[math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)] for k in range(6)]
), smoothed=smooth_approx(square(), 0.1))


@pytest.mark.parametrize("name", sorted(ALL))
@pytest.mark.parametrize("t", [0.5, 2.0, 10.0])
def test_homogeneity(name, t, rng):
    K = ALL[name]
    x = rng.normal(size=(200, 2))
    np.testing.assert_allclose(K.support(t * x), t * K.support(x), rtol=1e-12)
    np.testing.assert_allclose(support_gradient(K, t * x), support_gradient(K, x), rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(quadratic_gradient(K, t * x), t * quadratic_gradient(K, x), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", sorted(ALL))
def test_symmetry(name, rng):
    K = ALL[name]
    x = rng.normal(size=(200, 2))
    np.testing.assert_array_equal(K.support(-x), K.support(x))


@pytest.mark.parametrize("name", ["square", "diamond", "hexagon", "disk", "p3", "p1.5"])
def test_duality_support_of_polar_is_gauge(name, rng):
    K = ALL[name]
    x = rng.normal(size=(500, 2))
    np.testing.assert_allclose(polar(K).support(x), K.gauge(x), rtol=1e-12)
    np.testing.assert_allclose(polar(K).gauge(x), K.support(x), rtol=1e-12)


@pytest.mark.parametrize("name", sorted(SMOOTH) + ["smoothed"])
def test_gradients_match_finite_differences(name, rng):
    K = ALL[name]
    x = rng.normal(size=(200, 2))
    s = 1e-6
    H = lambda y: 0.5 * K.support(y) ** 2
    for k in range(2):
        e = np.zeros(2)
        e[k] = s
        fd_h = (K.support(x + e) - K.support(x - e)) / (2 * s)
        fd_H = (H(x + e) - H(x - e)) / (2 * s)
        gh = support_gradient(K, x)[:, k]
        gH = quadratic_gradient(K, x)[:, k]
        scale_h = np.linalg.norm(support_gradient(K, x), axis=1)
        scale_H = np.linalg.norm(quadratic_gradient(K, x), axis=1)
        assert np.max(np.abs(fd_h - gh) / scale_h) < 1e-5
        assert np.max(np.abs(fd_H - gH) / scale_H) < 1e-5


@pytest.mark.parametrize("name", sorted(ALL))
def test_support_is_convex_and_subadditive(name, rng):
    K = ALL[name]
    x, y = rng.normal(size=(2, 300, 2))
    assert np.all(K.support(x + y) <= K.support(x) + K.support(y) + 1e-12)
    assert np.all(K.support(x) >= 0)


def test_euler_identity(rng):
    x = rng.normal(size=(100, 2))
    for K in SMOOTH.values():
        np.testing.assert_allclose(np.sum(x * quadratic_gradient(K, x), axis=1), K.support(x) ** 2, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    p=st.floats(1.2, 6.0),
    sx=st.floats(0.2, 5.0),
    sy=st.floats(0.2, 5.0),
    ang=st.floats(0, 2 * math.pi),
    r=st.floats(1e-3, 1e3),
)
def test_pball_identities_hypothesis(p, sx, sy, ang, r):
    K = PBall(p, [sx, sy])
    x = r * np.array([math.cos(ang), math.sin(ang)])
    assert abs(K.gauge(support_gradient(K, x)) - 1) < 1e-9
    back = quadratic_gradient(K, quadratic_gradient(polar(K), x))
    assert np.linalg.norm(back - x) < 1e-7 * np.linalg.norm(x)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.1, 10), b=st.floats(0.1, 10), c=st.floats(-0.9, 0.9), ang=st.floats(0, 2 * math.pi))
def test_ellipsoid_identities_hypothesis(a, b, c, ang):
    M = np.array([[a, c * math.sqrt(a * b)], [c * math.sqrt(a * b), b]])
    K = Ellipsoid(M)
    x = np.array([math.cos(ang), math.sin(ang)])
    assert abs(K.gauge(support_gradient(K, x)) - 1) < 1e-9
    back = quadratic_gradient(K, quadratic_gradient(polar(K), x))
    assert np.linalg.norm(back - x) < 1e-7


def test_smoothed_only_wraps_polytopes():
    with pytest.raises(DomainError):
        Smoothed(disk(), 0.1)

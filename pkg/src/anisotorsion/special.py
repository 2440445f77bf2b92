"""First zeros of Bessel functions of the first kind.

J_nu is summed from its ascending series with the (x/2)^nu prefactor dropped,
which keeps the sign and the zeros; the first zero is bracketed by a coarse
scan and refined by bisection.
"""

from __future__ import annotations

import math
from functools import lru_cache

__all__ = ["bessel_j", "bessel_zero", "j0_squared"]


def _series(nu, x, tol=1e-17):
    # sum_k (-1)^k (x^2/4)^k / (k! Gamma(k + nu + 1))
    q = 0.25 * x * x
    term = 1.0 / math.gamma(nu + 1.0)
    total = term
    k = 0
    while True:
        k += 1
        term *= -q / (k * (k + nu))
        total += term
        if abs(term) < tol * max(abs(total), 1e-300) and k > q:
            return total
        if k > 500:
            return total


def bessel_j(nu, x):
    """J_nu(x) for x > 0 and nu > -1 (moderate arguments)."""
    if x <= 0:
        raise ValueError("x must be positive")
    return (0.5 * x) ** nu * _series(float(nu), float(x))


@lru_cache(maxsize=None)
def bessel_zero(nu, tol=1e-15):
    """First positive zero of J_nu, nu > -1."""
    nu = float(nu)
    if nu <= -1:
        raise ValueError("order must exceed -1")
    step = 0.05
    a = step
    fa = _series(nu, a)
    while True:
        b = a + step
        fb = _series(nu, b)
        if fa * fb <= 0:
            break
        a, fa = b, fb
        if a > 200:
            raise RuntimeError("no zero bracketed")
    while b - a > tol * b:
        m = 0.5 * (a + b)
        fm = _series(nu, m)
        if fm == 0:
            return m
        if fa * fm < 0:
            b = m
        else:
            a, fa = m, fm
        if m in (a, b) and b - a <= 4 * math.ulp(m):
            break
    return 0.5 * (a + b)


def j0_squared():
    """``j_0^2``: the first Dirichlet eigenvalue of the unit disk."""
    return bessel_zero(0.0) ** 2

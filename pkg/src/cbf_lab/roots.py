"""Real-root isolation for low-degree real polynomials.

Roots of ``p'`` split the real line into intervals on which ``p`` is monotone,
so each interval holds at most one simple root, found by bisection from a
sign change and polished with Newton. Critical points where ``p`` is (numerically)
zero are reported as even-multiplicity roots. The search interval is the
Cauchy bound, so nothing outside it is missed.
"""

from __future__ import annotations

import numpy as np

from cbf_lab.errors import RootFindingFailed


def trim(coeffs, rtol: float = 1e-14) -> np.ndarray:
    """Drop negligible leading coefficients (ascending order)."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        return c
    scale = np.abs(c).max()
    if scale == 0.0:
        return c[:1] * 0.0
    n = c.size
    while n > 1 and abs(c[n - 1]) <= rtol * scale:
        n -= 1
    return c[:n]


def cauchy_bound(coeffs) -> float:
    """Every real root lies in ``[-bound, bound]``."""
    c = trim(coeffs)
    if c.size <= 1:
        return 0.0
    return 1.0 + float(np.max(np.abs(c[:-1] / c[-1])))


def _evaluate(c, x):
    return np.polynomial.polynomial.polyval(x, c)


def _abs_scale(c, x) -> float:
    return float(np.polynomial.polynomial.polyval(abs(x), np.abs(c)))


def _bisect(c, a, b, fa, maxiter=200):
    for _ in range(maxiter):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        fm = _evaluate(c, mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def _newton_polish(c, x, a, b, steps=3):
    dc = np.polynomial.polynomial.polyder(c)
    for _ in range(steps):
        d = _evaluate(dc, x)
        if d == 0.0:
            break
        nx = x - _evaluate(c, x) / d
        if not (a <= nx <= b):
            break
        if abs(_evaluate(c, nx)) > abs(_evaluate(c, x)):
            break
        x = nx
    return x


def real_roots(coeffs, lo: float | None = None, hi: float | None = None,
               zero_rtol: float = 1e-12) -> list[float]:
    """All real roots of the polynomial with ascending ``coeffs`` in ``[lo, hi]``.

    ``zero_rtol`` decides when a critical value counts as a (double) root,
    relative to the absolute-coefficient scale at that point.
    """
    c = trim(coeffs)
    if c.size <= 1:
        if c.size == 1 and c[0] == 0.0:
            raise RootFindingFailed("identically zero polynomial")
        return []
    if not np.all(np.isfinite(c)):
        raise RootFindingFailed("non-finite polynomial coefficients")
    bound = cauchy_bound(c)
    lo = -bound if lo is None else max(lo, -bound)
    hi = bound if hi is None else min(hi, bound)
    if lo > hi:
        return []
    if c.size == 2:
        r = -c[0] / c[1]
        return [r] if lo <= r <= hi else []

    crit = [x for x in real_roots(np.polynomial.polynomial.polyder(c), lo, hi, zero_rtol)
            if lo < x < hi]
    knots = [lo, *crit, hi]
    values = [_evaluate(c, x) for x in knots]
    found: list[float] = []
    for x, v in zip(knots, values):
        if v == 0.0 or abs(v) <= zero_rtol * _abs_scale(c, x) and x in crit:
            found.append(x)
    for (a, fa), (b, fb) in zip(zip(knots, values), zip(knots[1:], values[1:])):
        if fa == 0.0 or fb == 0.0 or np.sign(fa) == np.sign(fb):
            continue
        r = _bisect(c, a, b, fa)
        found.append(_newton_polish(c, r, a, b))
    found.sort()
    out: list[float] = []
    for r in found:
        if out and abs(r - out[-1]) <= 1e-12 * max(1.0, abs(r)):
            continue
        out.append(r)
    return out


def cubic_discriminant(a: float, b: float, c: float, d: float) -> float:
    """Discriminant of ``a x^3 + b x^2 + c x + d``; negative means one real root."""
    return 18 * a * b * c * d - 4 * b**3 * d + b**2 * c**2 - 4 * a * c**3 - 27 * a**2 * d**2

"""Brute-force cross-checks that deliberately avoid the analytic code paths.

The QP is re-solved from its KKT system, the closed loop is rebuilt from that
solution, and equilibria are located by scanning the obstacle boundary. Only the
raw scenario matrices are shared with the analytic modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from cbf_lab.errors import DegenerateGradient
from cbf_lab.model import Circle, Scenario


def _barrier(scenario: Scenario):
    """(h, grad_h) closures built directly from the obstacle's raw fields."""
    obs = scenario.obstacle
    xc = np.array(obs.center)
    if isinstance(obs, Circle):
        P, off = np.eye(2), obs.radius**2
    else:
        P, off = np.array(obs.P), 1.0

    def h(X):
        Y = np.asarray(X, dtype=float) - xc
        return np.einsum("...i,ij,...j->...", Y, P, Y) - off

    def grad(X):
        Y = np.asarray(X, dtype=float) - xc
        return 2.0 * Y @ P

    return h, grad


def _closed_loop(scenario: Scenario) -> np.ndarray:
    return np.array(scenario.A) - np.array(scenario.B) @ np.array(scenario.K)


def _weight(scenario: Scenario) -> np.ndarray:
    B = np.array(scenario.B)
    return B.T @ B if scenario.config.G is None else np.array(scenario.config.G)


def qp_reference_solver(scenario: Scenario, x) -> np.ndarray:
    """Solve ``min th^T G th  s.t.  a^T th >= b`` through its KKT conditions.

    Here ``a = B^T grad_h(x)`` and ``b = -(grad_h^T At x + alpha0 h(x))``. When the
    constraint is inactive at ``th = 0`` the answer is zero; otherwise the
    constraint is active and ``[2G, -a; a^T, 0] [th; mu] = [0; b]``.

    Raises:
        DegenerateGradient: active constraint with ``a = 0`` (infeasible QP).
    """
    return qp_reference_batch(scenario, np.asarray(x, dtype=float)[None, :])[0]


def qp_reference_batch(scenario: Scenario, X, strict: bool = True) -> np.ndarray:
    """Row-wise :func:`qp_reference_solver`; with ``strict=False`` infeasible rows are NaN."""
    X = np.asarray(X, dtype=float)
    h, grad = _barrier(scenario)
    At = _closed_loop(scenario)
    B = np.array(scenario.B)
    G = _weight(scenario)
    m = B.shape[1]
    g = grad(X)
    a = g @ B
    b = -(np.einsum("ni,ni->n", g, X @ At.T) + scenario.alpha0 * h(X))
    theta = np.zeros((X.shape[0], m))
    active = b > 0.0
    if not np.any(active):
        return theta
    bad = active & (np.linalg.norm(a, axis=1) < 1e-12)
    if np.any(bad):
        if strict:
            raise DegenerateGradient("active constraint with B^T grad h = 0")
        theta[bad] = np.nan
        active &= ~bad
        if not np.any(active):
            return theta
    aa = a[active]
    k = aa.shape[0]
    kkt = np.zeros((k, m + 1, m + 1))
    kkt[:, :m, :m] = 2.0 * G
    kkt[:, :m, m] = -aa
    kkt[:, m, :m] = aa
    rhs = np.zeros((k, m + 1))
    rhs[:, m] = b[active]
    sol = np.linalg.solve(kkt, rhs[..., None])[..., 0]
    theta[active] = sol[:, :m]
    return theta


def reference_field(scenario: Scenario, X, strict: bool = True) -> np.ndarray:
    """Closed loop ``At x + B th(x)`` with ``th`` from the KKT solve."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    theta = qp_reference_batch(scenario, X, strict)
    return X @ _closed_loop(scenario).T + theta @ np.array(scenario.B).T


@dataclass
class BoundaryZero:
    angle: float
    location: np.ndarray
    residual: float


@dataclass
class BoundaryScan:
    samples: int
    zeros: list[BoundaryZero] = field(default_factory=list)

    @property
    def locations(self) -> np.ndarray:
        return np.array([z.location for z in self.zeros]).reshape(-1, 2)


def _boundary_param(scenario: Scenario):
    """Angle -> boundary point, and its tangent, via a Cholesky factor of the shape."""
    obs = scenario.obstacle
    xc = np.array(obs.center)
    if isinstance(obs, Circle):
        T = obs.radius * np.eye(2)
    else:
        L = np.linalg.cholesky(np.array(obs.P))
        T = np.linalg.inv(L.T)

    def point(theta):
        th = np.asarray(theta, dtype=float)
        return xc + np.stack([np.cos(th), np.sin(th)], axis=-1) @ T.T

    def tangent(theta):
        th = np.asarray(theta, dtype=float)
        return np.stack([-np.sin(th), np.cos(th)], axis=-1) @ T.T

    return point, tangent


def _scan_once(scenario, n, point, tangent, tol):
    def g(theta):
        th = np.atleast_1d(theta)
        return np.einsum("ni,ni->n", tangent(th), reference_field(scenario, point(th), False))

    def fnorm(theta):
        return float(np.linalg.norm(reference_field(scenario, point(np.atleast_1d(theta)), False)[0]))

    thetas = 2.0 * math.pi * np.arange(n) / n
    vals = g(thetas)
    found: list[BoundaryZero] = []
    step = 2.0 * math.pi / n
    for i in range(n):
        a, b = thetas[i], thetas[i] + step
        fa, fb = vals[i], vals[(i + 1) % n]
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0.0:
            cand = a
        elif np.sign(fa) != np.sign(fb) and fb != 0.0:
            lo, hi, flo = a, b, fa
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                fm = g(mid)[0]
                if not np.isfinite(fm):
                    break
                if fm == 0.0:
                    lo = hi = mid
                    break
                if np.sign(fm) == np.sign(flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
            cand = 0.5 * (lo + hi)
        else:
            # Touching zero without a sign change: look for a local minimum of |g|.
            fp = vals[i - 1]
            if not (abs(fa) <= abs(fp) and abs(fa) <= abs(fb)):
                continue
            res = minimize_scalar(lambda t: abs(g(t)[0]), bounds=(a - step, b),
                                  method="bounded", options={"xatol": 1e-14})
            cand = float(res.x)
        res_norm = fnorm(cand)
        if res_norm <= tol:
            found.append(BoundaryZero(float(cand % (2 * math.pi)), point(cand), res_norm))
    return found


def _merge(zeros, tol):
    out: list[BoundaryZero] = []
    for z in sorted(zeros, key=lambda z: z.residual):
        if all(np.linalg.norm(z.location - o.location) > tol for o in out):
            out.append(z)
    out.sort(key=lambda z: (round(float(z.location[0]), 9), round(float(z.location[1]), 9)))
    return out


def boundary_equilibrium_scan(scenario: Scenario, n_samples: int = 1024,
                              max_samples: int = 1 << 17) -> BoundaryScan:
    """Equilibria on the boundary from zeros of the tangential field component.

    On the boundary the filtered field is tangent wherever the constraint is
    active, so its zeros are zeros of ``tangent . F``. Sign changes are bisected;
    sign-preserving local minima of ``|tangent . F|`` are minimised to catch
    tangential double zeros. The resolution doubles until two consecutive scans
    agree on the count.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    point, tangent = _boundary_param(scenario)
    obs = scenario.obstacle
    size = float(np.linalg.norm(obs.center)) + (obs.radius if isinstance(obs, Circle)
                                                else 1.0 / math.sqrt(np.linalg.eigvalsh(obs.P)[0]))
    tol = 1e-8 * max(1.0, np.linalg.norm(_closed_loop(scenario), 2) * size)
    n = n_samples
    prev = _merge(_scan_once(scenario, n, point, tangent, tol), 1e-7 * size)
    while n < max_samples:
        n *= 2
        cur = _merge(_scan_once(scenario, n, point, tangent, tol), 1e-7 * size)
        if len(cur) == len(prev):
            return BoundaryScan(n, cur)
        prev = cur
    return BoundaryScan(n, prev)


def finite_difference_jacobian(scenario: Scenario, p, step: float = 1e-6) -> np.ndarray:
    """One-sided difference quotients of the reference field, from the active side.

    Each column uses ``+step`` or ``-step`` along a coordinate, choosing the sign
    that keeps the perturbed point in the region where the filter is active.
    """
    if not (1e-8 <= step <= 1e-4):
        raise ValueError("step must lie in [1e-8, 1e-4]")
    p = np.asarray(p, dtype=float)
    h, grad = _barrier(scenario)
    At = _closed_loop(scenario)
    f0 = reference_field(scenario, p)[0]

    def eta(x):
        return float(grad(x) @ (At @ x) + scenario.alpha0 * h(x))

    J = np.zeros((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = 1.0
        sgn = 1.0 if eta(p + step * e) < eta(p - step * e) else -1.0
        J[:, k] = (reference_field(scenario, p + sgn * step * e)[0] - f0) / (sgn * step)
    return J


def match_multisets(a, b, tol: float) -> bool:
    """True when two point sets pair up one-to-one within ``tol``."""
    a = [np.asarray(x) for x in a]
    b = [np.asarray(x) for x in b]
    if len(a) != len(b):
        return False
    unused = list(range(len(b)))
    for x in a:
        hit = next((j for j in unused if np.linalg.norm(x - b[j]) <= tol), None)
        if hit is None:
            return False
        unused.remove(hit)
    return True

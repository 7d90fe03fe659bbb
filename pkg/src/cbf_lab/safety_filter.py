"""Closed-form CBF safety filter and the closed-loop vector field it induces.

With ``G = B^T B`` the single-constraint QP has the solution

    v(x) = 0                                   if eta(x) >= 0
    v(x) = -eta G^-1 B^T grad_h / |B^T grad_h|^2_{G^-1}   otherwise

so the closed loop is ``F(x) = At x - eta D grad_h / (grad_h^T D grad_h)`` on the
active set, where ``D = B G^-1 B^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from cbf_lab.errors import DegenerateGradient
from cbf_lab.model import Circle, Scenario

GRADIENT_TOL = 1e-12


@dataclass(frozen=True)
class FilterEvaluation:
    eta: float
    v: np.ndarray
    F: np.ndarray


def eta(scenario: Scenario, x) -> float:
    """Constraint margin ``grad_h(x)^T At x + alpha0 h(x)`` under the nominal input."""
    x = np.asarray(x, dtype=float)
    obs = scenario.obstacle
    return float(obs.grad(x) @ (scenario.Atilde @ x) + scenario.alpha0 * obs.h(x))


def safety_filter(scenario: Scenario, x) -> FilterEvaluation:
    """Evaluate the filter correction and closed-loop field at ``x``.

    Raises:
        DegenerateGradient: the constraint is active but ``B^T grad_h`` vanishes.
    """
    x = np.asarray(x, dtype=float)
    e = eta(scenario, x)
    f_nom = scenario.Atilde @ x
    if e >= 0.0:
        return FilterEvaluation(e, np.zeros(scenario.m), f_nom)
    g = scenario.obstacle.grad(x)
    bg = scenario.B.T @ g
    if np.linalg.norm(bg) < GRADIENT_TOL:
        raise DegenerateGradient(f"B^T grad h vanishes at {x.tolist()} with eta = {e:.6g}")
    v = -e * (scenario.Ginv @ bg) / float(bg @ scenario.Ginv @ bg)
    return FilterEvaluation(e, v, f_nom + scenario.B @ v)


def vector_field(scenario: Scenario, X) -> np.ndarray:
    """Batched closed-loop field for states of shape ``(..., 2)``.

    Points where the filter would be undefined return NaN rather than raising,
    so integrators can flag them without aborting a whole batch.
    """
    X = np.asarray(X, dtype=float)
    obs = scenario.obstacle
    f_nom = X @ scenario.Atilde.T
    g = obs.grad(X)
    e = np.sum(g * f_nom, axis=-1) + scenario.alpha0 * obs.h(X)
    Dg = g @ scenario.D.T
    s = np.sum(g * Dg, axis=-1)
    active = e < 0.0
    degenerate = active & (s < GRADIENT_TOL**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(active, -e / s, 0.0)
    coef = np.where(degenerate, np.nan, coef)
    return f_nom + coef[..., None] * Dg


def make_scalar_field(scenario: Scenario):
    """Return a plain-float ``(x1, x2) -> (F1, F2, h, eta)`` closure.

    Per-call numpy overhead dominates for single 2-vectors; this closure is
    what the single-trajectory integrator uses. Must agree with
    :func:`vector_field` to rounding.
    """
    (a11, a12), (a21, a22) = scenario.Atilde.tolist()
    (d11, d12), (d21, d22) = scenario.D.tolist()
    c1, c2 = scenario.center.tolist()
    alpha0 = scenario.alpha0
    if isinstance(scenario.obstacle, Circle):
        r2 = scenario.obstacle.radius ** 2
        p11, p12, p22, off = 1.0, 0.0, 1.0, r2
    else:
        (p11, p12), (_, p22) = scenario.obstacle.P.tolist()
        off = 1.0

    def field(x1: float, x2: float):
        f1 = a11 * x1 + a12 * x2
        f2 = a21 * x1 + a22 * x2
        y1 = x1 - c1
        y2 = x2 - c2
        q1 = p11 * y1 + p12 * y2
        q2 = p12 * y1 + p22 * y2
        h = y1 * q1 + y2 * q2 - off
        g1 = 2.0 * q1
        g2 = 2.0 * q2
        e = g1 * f1 + g2 * f2 + alpha0 * h
        if e < 0.0:
            dg1 = d11 * g1 + d12 * g2
            dg2 = d21 * g1 + d22 * g2
            s = g1 * dg1 + g2 * dg2
            coef = -e / s if s > 0.0 else math.nan
            f1 += coef * dg1
            f2 += coef * dg2
        return f1, f2, h, e

    return field


def indicator(scenario: Scenario, p) -> float:
    """Indicator ``delta = grad_h^T At p / |B^T grad_h|^2_{G^-1}`` at ``p``."""
    p = np.asarray(p, dtype=float)
    g = scenario.obstacle.grad(p)
    bg = scenario.B.T @ g
    if np.linalg.norm(bg) < GRADIENT_TOL:
        raise DegenerateGradient(f"B^T grad h vanishes at {p.tolist()}")
    return float(g @ (scenario.Atilde @ p)) / float(bg @ scenario.Ginv @ bg)


def jacobian_at_boundary(scenario: Scenario, p) -> np.ndarray:
    """Analytic Jacobian of the closed loop at a boundary equilibrium candidate.

    J = At - D g g^T (At + alpha0 I) / s - D (H (g^T f) - g (f^T H)) / s,
    with ``g = grad_h(p)``, ``f = At p``, ``H`` the Hessian of h and
    ``s = g^T D g``. The bracket is read as ``H * scalar - outer(g, H f)``,
    which is the reading that matches finite differences of the field.
    """
    p = np.asarray(p, dtype=float)
    At, D = scenario.Atilde, scenario.D
    g = scenario.obstacle.grad(p)
    s = float(g @ D @ g)
    if abs(s) < GRADIENT_TOL**2:
        raise DegenerateGradient(f"g^T D g vanishes at {p.tolist()}")
    H = scenario.obstacle.hessian()
    f = At @ p
    bracket = H * float(g @ f) - np.outer(g, f @ H)
    return At - np.outer(D @ g, g) @ (At + scenario.alpha0 * np.eye(2)) / s - D @ bracket / s

"""Seeded generators of random valid scenarios for property tests and ``verify``."""

from __future__ import annotations

import math

import numpy as np

from cbf_lab.assumptions import check_assumptions
from cbf_lab.errors import ScenarioError
from cbf_lab.model import Circle, Ellipse, Scenario, make_scenario


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _random_basis(rng: np.random.Generator, min_angle: float = math.radians(20)) -> np.ndarray:
    t1 = rng.uniform(0, math.pi)
    t2 = t1 + rng.uniform(min_angle, math.pi - min_angle)
    return np.array([[math.cos(t1), math.cos(t2)], [math.sin(t1), math.sin(t2)]])


def random_hurwitz(rng: np.random.Generator, complex_prob: float = 0.2) -> np.ndarray:
    """Closed-loop matrix with eigenvalues in a moderate left-half-plane box."""
    V = _random_basis(rng)
    if rng.uniform() < complex_prob:
        a, b = -rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0)
        core = np.array([[a, b], [-b, a]])
    else:
        l1 = -rng.uniform(0.2, 5.0)
        l2 = l1
        while abs(l2 - l1) < 0.1:
            l2 = -rng.uniform(0.2, 5.0)
        core = np.diag([l1, l2])
    return V @ core @ np.linalg.inv(V)


def _random_circle(rng: np.random.Generator) -> Circle:
    n = rng.uniform(1.5, 5.0)
    t = rng.uniform(0, 2 * math.pi)
    return Circle(n * np.array([math.cos(t), math.sin(t)]), rng.uniform(0.2, 0.8) * n)


def _random_ellipse(rng: np.random.Generator) -> Ellipse:
    R = _rotation(rng.uniform(0, math.pi))
    P = R @ np.diag(rng.uniform(0.3, 3.0, size=2)) @ R.T
    P = 0.5 * (P + P.T)
    d = np.array([math.cos(t := rng.uniform(0, 2 * math.pi)), math.sin(t)])
    k = rng.uniform(1.3, 4.0)
    return Ellipse(d * k / math.sqrt(d @ P @ d), P)


def random_fully_actuated(rng: np.random.Generator, ellipse: bool = False,
                          complex_prob: float = 0.2) -> Scenario:
    """Invertible-B scenario: random plant and input matrix, gain chosen to hit
    a random Hurwitz closed loop."""
    At = random_hurwitz(rng, complex_prob)
    while True:
        B = rng.normal(size=(2, 2))
        if np.linalg.cond(B) < 10:
            break
    A = rng.normal(scale=2.0, size=(2, 2))
    K = np.linalg.solve(B, A - At)
    obs = _random_ellipse(rng) if ellipse else _random_circle(rng)
    return make_scenario(A, B, K, obs, rng.uniform(1.0, 20.0))


def _ackermann(A: np.ndarray, b: np.ndarray, char_poly) -> np.ndarray:
    C = np.column_stack([b, A @ b])
    phi = A @ A + char_poly[1] * A + char_poly[2] * np.eye(2)
    return np.array([0.0, 1.0]) @ np.linalg.solve(C, phi)


def random_underactuated(rng: np.random.Generator, ellipse: bool = False,
                         max_tries: int = 10000) -> Scenario:
    """Single-input scenario that passes all assumption checks (rejection sampling)."""
    for _ in range(max_tries):
        A = rng.normal(scale=1.5, size=(2, 2))
        b = rng.normal(size=2)
        b /= np.linalg.norm(b) / rng.uniform(0.5, 3.0)
        C = np.column_stack([b, A @ b])
        if abs(np.linalg.det(C)) < 0.1 * np.linalg.norm(b) ** 2:
            continue
        ev = np.linalg.eigvals(random_hurwitz(rng))
        char = np.real(np.poly(ev))
        K = _ackermann(A, b, char).reshape(1, 2)
        obs = _random_ellipse(rng) if ellipse else _random_circle(rng)
        try:
            sc = make_scenario(A, b.reshape(2, 1), K, obs, rng.uniform(5.0, 50.0))
        except ScenarioError:
            continue
        if check_assumptions(sc).all_hold:
            return sc
    raise RuntimeError("no valid under-actuated scenario found")


def corpus(seed: int, n: int, kind: str = "mixed", ellipse: bool = False) -> list[Scenario]:
    """``n`` scenarios; ``kind`` is ``"under"``, ``"full"`` or ``"mixed"`` (alternating)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        under = kind == "under" or (kind == "mixed" and i % 2 == 0)
        out.append(random_underactuated(rng, ellipse) if under
                   else random_fully_actuated(rng, ellipse))
    return out

"""The four built-in planar experiments with their expected undesirable equilibria.

Panels (b)-(d) are specified by their closed-loop matrix directly (``B = I``,
``K = 0``), since the printed gains do not produce these closed loops under
``u = -K x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cbf_lab.model import Circle, Kind, Scenario, from_closed_loop, make_scenario
from cbf_lab.oracle import match_multisets


@dataclass(frozen=True)
class Experiment:
    name: str
    build: callable
    expected: tuple[tuple[tuple[float, float], Kind], ...]
    tol: float
    table_row: int | None = None

    def scenario(self, alpha0: float | None = None) -> Scenario:
        sc = self.build()
        return sc if alpha0 is None else sc.with_alpha0(alpha0)


def _fig1a() -> Scenario:
    return make_scenario([[4.0, 2.0], [1.0, 1.0]], [[3.0], [1.0]], [[3.0, -2.0]],
                         Circle([3.0, 2.0], 1.0), 10.0)


def _fig1b() -> Scenario:
    return from_closed_loop([[-5.0, 0.0], [0.0, -1.0]], Circle([2.0, 0.0], 1.0), 10.0)


def _fig1c() -> Scenario:
    return from_closed_loop([[-3.0, 4.0 * math.sqrt(2.0)], [0.0, -1.0]],
                            Circle([2.0, 0.0], 1.0), 10.0)


def _fig1d() -> Scenario:
    return from_closed_loop([[-1.0, 0.0], [0.0, -5.0]], Circle([2.0, 0.0], 1.0), 10.0)


REGISTRY: dict[str, Experiment] = {
    "fig1a": Experiment("fig1a", _fig1a, (((2.0, 2.0), Kind.SADDLE),), 1e-9),
    "fig1b": Experiment("fig1b", _fig1b, (((3.0, 0.0), Kind.SADDLE),), 1e-9, table_row=1),
    "fig1c": Experiment("fig1c", _fig1c, (
        ((5.0 / 3.0, 2.0 * math.sqrt(2.0) / 3.0), Kind.DEGENERATE),
        ((3.0, 0.0), Kind.SADDLE),
    ), 1e-8, table_row=2),
    "fig1d": Experiment("fig1d", _fig1d, (
        ((2.5, -math.sqrt(3.0) / 2.0), Kind.SADDLE),
        ((2.5, math.sqrt(3.0) / 2.0), Kind.SADDLE),
        ((3.0, 0.0), Kind.ASYMPTOTICALLY_STABLE),
    ), 1e-9, table_row=3),
}


def compare(experiment: Experiment, reports) -> dict:
    """Match found equilibria against the registry: locations within ``tol``,
    kinds equal, counts equal."""
    found = [(np.asarray(r.location), r.kind) for r in reports]
    expected = [(np.asarray(p), k) for p, k in experiment.expected]
    locations_ok = match_multisets([p for p, _ in found], [p for p, _ in expected], experiment.tol)
    kinds_ok = locations_ok and all(
        any(np.linalg.norm(p - q) <= experiment.tol and k == kq for q, kq in expected)
        for p, k in found)
    return {
        "experiment": experiment.name,
        "match": bool(locations_ok and kinds_ok),
        "tolerance": experiment.tol,
        "expected": [{"location": list(p), "kind": k.value} for p, k in experiment.expected],
    }

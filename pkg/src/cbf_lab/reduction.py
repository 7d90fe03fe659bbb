"""Ellipse-to-circle similarity transform.

With ``P = E^T E`` (E the symmetric square root) the change of variables
``xh = E x`` maps the ellipsoidal safe set onto the complement of a unit disk
centred at ``E x_c``, and conjugates the closed-loop field. Equilibria map back
through ``E^-1`` and Jacobians through ``E^-1 J E``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from cbf_lab.errors import BadShapeMatrix, ScenarioError
from cbf_lab.model import (
    Circle,
    Ellipse,
    EquilibriumReport,
    FilterConfig,
    PlanarLTISystem,
    Scenario,
    validate_scenario,
)

TRANSPORTED = "transported"
FIXED = "fixed"


def principal_sqrt(P) -> np.ndarray:
    """Symmetric positive definite square root of an SPD matrix."""
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2) or not np.allclose(P, P.T, rtol=0, atol=1e-12 * max(1.0, np.abs(P).max())):
        raise BadShapeMatrix("P must be a symmetric 2x2 matrix")
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    if w.min() <= 0:
        raise BadShapeMatrix("P is not positive definite")
    E = (V * np.sqrt(w)) @ V.T
    return 0.5 * (E + E.T)


@dataclass(frozen=True)
class ReducedScenario:
    E: np.ndarray
    Einv: np.ndarray
    scenario: Scenario
    original: Scenario
    convention: str

    @property
    def hat_system(self) -> PlanarLTISystem:
        return self.scenario.system

    @property
    def hat_obstacle(self) -> Circle:
        return self.scenario.obstacle

    def to_original(self, xh) -> np.ndarray:
        return np.asarray(xh, dtype=float) @ self.Einv.T

    def to_reduced(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.E.T


def reduce(scenario: Scenario, convention: str = TRANSPORTED) -> ReducedScenario:
    """Build the unit-circle scenario equivalent to an ellipse scenario.

    ``convention="transported"`` keeps the original input weighting ``G``
    (the transformed field is then exactly conjugate to the original one).
    ``convention="fixed"`` re-applies the ``G = B^T B`` rule to the reduced
    input matrix; for two inputs this is a different filter in general.
    """
    obs = scenario.obstacle
    if not isinstance(obs, Ellipse):
        raise ScenarioError("reduce() needs an ellipse obstacle")
    if convention not in (TRANSPORTED, FIXED):
        raise ValueError(f"unknown convention {convention!r}")
    E = principal_sqrt(obs.P)
    Einv = np.linalg.inv(E)
    system = PlanarLTISystem(E @ scenario.A @ Einv, E @ scenario.B, scenario.K @ Einv)
    G = scenario.G if convention == TRANSPORTED else None
    reduced = validate_scenario(system, Circle(E @ obs.center, 1.0),
                                FilterConfig(scenario.alpha0, G))
    return ReducedScenario(E, Einv, reduced, scenario, convention)


def map_back(report: EquilibriumReport, E) -> EquilibriumReport:
    """Carry an equilibrium of the reduced system back to original coordinates.

    Spectrum, kind and indicator are invariant under the similarity.
    """
    E = np.asarray(E, dtype=float)
    Einv = np.linalg.inv(E)
    return replace(
        report,
        location=Einv @ report.location,
        jacobian=Einv @ report.jacobian @ E,
    )

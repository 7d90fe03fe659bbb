"""Decidable checks of the hypotheses the equilibrium analysis relies on.

All strict inequalities are evaluated with zero tolerance by default. A positive
``tol`` relaxes them to ``lhs > rhs - tol`` and logs a warning whenever the
relaxation is what made a check pass.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from cbf_lab.errors import WrongActuation
from cbf_lab.model import Circle, Scenario, is_hurwitz

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnderactuatedCoefficients:
    beta: float
    gamma: float
    T3: float


@dataclass(frozen=True)
class FeasibilityCheck:
    """Sufficient-condition feasibility check; ``holds=False`` does not prove infeasibility."""

    holds: bool
    T1: float | None = None
    T2: float | None = None
    T3: float | None = None
    kind: str = "sufficient-condition check"


@dataclass(frozen=True)
class Lemma4Report:
    gamma_beta_positive: bool
    discriminant_positive: bool
    gxc_nonzero: bool


@dataclass(frozen=True)
class AssumptionReport:
    origin_interior: bool
    feasibility: FeasibilityCheck
    stabilizable: bool
    lemma4: Lemma4Report | None
    internal_inconsistency: bool = False

    @property
    def all_hold(self) -> bool:
        return self.origin_interior and self.feasibility.holds and self.stabilizable

    def to_dict(self) -> dict:
        return asdict(self)


def _greater(lhs: float, rhs: float, tol: float, label: str) -> bool:
    if lhs > rhs:
        return True
    if tol > 0 and lhs > rhs - tol:
        log.warning("%s passes only under tolerance %g (lhs=%r, rhs=%r)", label, tol, lhs, rhs)
        return True
    return False


def _circle_data(scenario: Scenario):
    """Center and radius of the circular problem (reducing ellipses first)."""
    if isinstance(scenario.obstacle, Circle):
        return scenario, scenario.center, scenario.obstacle.radius
    from cbf_lab.reduction import reduce

    reduced = reduce(scenario).scenario
    return reduced, reduced.center, reduced.obstacle.radius


def underactuated_coefficients(scenario: Scenario) -> UnderactuatedCoefficients:
    """beta, gamma and T3 built from the open-loop A and the input column b."""
    if scenario.m != 1:
        raise WrongActuation(f"expected m = 1, got m = {scenario.m}")
    (a11, a12), (a21, a22) = scenario.A.tolist()
    b1, b2 = scenario.B[:, 0].tolist()
    xc1, xc2 = scenario.center.tolist()
    beta = a11 * b2 - b1 * a21
    gamma = a22 * b1 - b2 * a12
    return UnderactuatedCoefficients(beta, gamma, -gamma * xc2 + beta * xc1)


def check_origin_interior(scenario: Scenario, tol: float = 0.0) -> bool:
    obs = scenario.obstacle
    if isinstance(obs, Circle):
        lhs, rhs = float(obs.center @ obs.center), obs.radius**2
    else:
        lhs, rhs = float(obs.center @ obs.P @ obs.center), 1.0
    return _greater(lhs, rhs, tol, "origin interior")


def check_stabilizable(scenario: Scenario) -> bool:
    return is_hurwitz(scenario.Atilde)


def check_feasibility_underactuated(scenario: Scenario, tol: float = 0.0) -> FeasibilityCheck:
    """Sufficient condition for feasibility of the filter QP with ``alpha(s) = alpha0 s``.

    Ellipses are checked on the reduced circular problem.

    Raises:
        WrongActuation: ``m != 1``.
    """
    if scenario.m != 1:
        raise WrongActuation(f"expected m = 1, got m = {scenario.m}")
    circ, _, r = _circle_data(scenario)
    co = underactuated_coefficients(circ)
    b1, b2 = circ.B[:, 0].tolist()
    a0 = circ.alpha0
    nb2 = b1 * b1 + b2 * b2
    T1 = b2 * co.beta + b1 * co.gamma + 0.5 * a0 * nb2
    T2 = co.T3**2 + 2.0 * a0 * r * r * T1
    holds = r > 0 and nb2 > 0 and _greater(T1, 0.0, tol, "T1 > 0")
    if holds:
        lhs = r / math.sqrt(nb2)
        rhs = (abs(co.T3) + math.sqrt(max(T2, 0.0))) / (2.0 * T1)
        holds = T2 >= 0 and _greater(lhs, rhs, tol, "radius inequality")
    return FeasibilityCheck(bool(holds), T1, T2, co.T3)


def check_lemma4(scenario: Scenario, tol: float = 0.0) -> Lemma4Report:
    """The three beta/gamma conditions implied by the upstream assumptions."""
    circ, xc, r = _circle_data(scenario)
    co = underactuated_coefficients(circ)
    gb = co.gamma**2 + co.beta**2
    return Lemma4Report(
        gamma_beta_positive=_greater(gb, 0.0, tol, "gamma^2 + beta^2 > 0"),
        discriminant_positive=_greater(r * r * gb - co.T3**2, 0.0, tol, "r^2(gamma^2+beta^2) > T3^2"),
        gxc_nonzero=bool(co.gamma * xc[0] + co.beta * xc[1] != 0.0),
    )


def check_assumptions(scenario: Scenario, tol: float = 0.0) -> AssumptionReport:
    origin = check_origin_interior(scenario, tol)
    stab = check_stabilizable(scenario)
    if scenario.m == 1:
        feas = check_feasibility_underactuated(scenario, tol)
        l4 = check_lemma4(scenario, tol)
        upstream = origin and stab and feas.holds
        inconsistent = upstream and not all(np.array(
            [l4.gamma_beta_positive, l4.discriminant_positive, l4.gxc_nonzero]))
        if inconsistent:
            log.warning("assumptions hold but a beta/gamma condition fails: %s", l4)
        return AssumptionReport(origin, feas, stab, l4, bool(inconsistent))
    # B invertible: feasibility and stabilizability are automatic.
    return AssumptionReport(origin, FeasibilityCheck(True, kind="trivially true (B invertible)"),
                            stab, None)

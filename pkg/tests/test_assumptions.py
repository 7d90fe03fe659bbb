import math

import numpy as np
import pytest

from cbf_lab.assumptions import (
    check_assumptions,
    check_feasibility_underactuated,
    check_lemma4,
    check_origin_interior,
    underactuated_coefficients,
)
from cbf_lab.corpus import corpus, random_underactuated
from cbf_lab.errors import WrongActuation
from cbf_lab.model import Circle, FilterConfig, PlanarLTISystem, Scenario, make_scenario


def _unchecked(A, b, K, center, r, alpha0=10.0):
    """Scenario object built without validation, for boundary-case checks."""
    A = np.asarray(A, float)
    B = np.asarray(b, float).reshape(2, 1)
    K = np.asarray(K, float).reshape(1, 2)
    G = B.T @ B
    return Scenario(PlanarLTISystem(A, B, K), Circle(center, r), FilterConfig(alpha0),
                    A - B @ K, np.linalg.eigvals(A - B @ K), G, np.linalg.pinv(G),
                    B @ np.linalg.pinv(G) @ B.T)


def test_fig1a_coefficients(fig1a):
    co = underactuated_coefficients(fig1a)
    assert (co.beta, co.gamma, co.T3) == (1.0, 1.0, 1.0)


def test_fig1a_beta_gamma_conditions(fig1a):
    l4 = check_lemma4(fig1a)
    assert l4.gamma_beta_positive and l4.discriminant_positive and l4.gxc_nonzero


def test_fig1a_all_hold(fig1a):
    rep = check_assumptions(fig1a)
    assert rep.all_hold
    assert rep.feasibility.kind == "sufficient-condition check"
    assert not rep.internal_inconsistency


@pytest.mark.parametrize("center,r,expected", [
    ((3.0, 2.0), 1.0, True),
    ((1.0, 0.0), 1.0, False),
    ((0.5, 0.0), 1.0, False),
])
def test_origin_interior(center, r, expected):
    sc = _unchecked([[-1, 0], [0, -1]], [1, 0], [0, 0], center, r)
    assert check_origin_interior(sc) is expected


def test_tolerance_relaxes_boundary_case(caplog):
    sc = _unchecked([[-1, 0], [0, -1]], [1, 0], [0, 0], (1.0, 0.0), 1.0)
    assert check_origin_interior(sc, tol=1e-9)
    assert "tolerance" in caplog.text


def test_zero_input_vector_fails_feasibility():
    sc = _unchecked([[-1, 0], [0, -1]], [0, 0], [0, 0], (3.0, 0.0), 1.0)
    assert not check_feasibility_underactuated(sc).holds


def test_negative_t1_fails_regardless_of_radius():
    # beta = a11 b2 - b1 a21 = -20, gamma = a22 b1 - b2 a12 = 0, b = (0, 1)
    sc = _unchecked([[-20, 0], [0, -1]], [0, 1], [0, 0], (3.0, 0.0), 100.0, alpha0=1.0)
    res = check_feasibility_underactuated(sc)
    assert res.T1 < 0 and not res.holds


def test_beta_gamma_zero():
    # A = 0 gives beta = gamma = 0
    sc = _unchecked(np.zeros((2, 2)), [1, 1], [0, 0], (3.0, 0.0), 1.0)
    assert not check_lemma4(sc).gamma_beta_positive


def test_discriminant_boundary_equality():
    # b = (1, 0), a21 = -3, a22 = 4: beta = 3, gamma = 4; x_c = (3, 1) gives T3 = 5 = r |(gamma, beta)|
    sc = _unchecked([[0, 0], [-3, 4]], [1, 0], [0, 0], (3.0, 1.0), 1.0)
    co = underactuated_coefficients(sc)
    assert (co.beta, co.gamma, co.T3) == (3.0, 4.0, 5.0)
    assert not check_lemma4(sc).discriminant_positive


def test_wrong_actuation(fig1b):
    with pytest.raises(WrongActuation):
        check_feasibility_underactuated(fig1b)


def test_fully_actuated_feasibility_trivial(fig1b):
    rep = check_assumptions(fig1b)
    assert rep.feasibility.holds and rep.feasibility.kind.startswith("trivially true")
    assert rep.lemma4 is None


def test_beta_gamma_conditions_follow_from_upstream_checks():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        sc = random_underactuated(rng)
        l4 = check_lemma4(sc)
        assert l4.gamma_beta_positive and l4.discriminant_positive and l4.gxc_nonzero


def test_ellipse_checked_after_reduction():
    for sc in corpus(1, 20, kind="under", ellipse=True):
        assert check_assumptions(sc).all_hold


def test_checks_are_deterministic(fig1a):
    assert check_assumptions(fig1a).to_dict() == check_assumptions(fig1a).to_dict()

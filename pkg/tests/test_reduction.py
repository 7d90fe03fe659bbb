import numpy as np
import pytest

from cbf_lab.corpus import corpus
from cbf_lab.equilibria import find_equilibria, general_case
from cbf_lab.errors import BadShapeMatrix, ScenarioError
from cbf_lab.model import Ellipse, Kind, make_scenario
from cbf_lab.oracle import boundary_equilibrium_scan, match_multisets
from cbf_lab.reduction import FIXED, TRANSPORTED, map_back, principal_sqrt, reduce
from cbf_lab.safety_filter import vector_field
from cbf_lab.simulate import IntegratorConfig, integrate


def _ellipse_scenario(P, center, m=2):
    At = np.array([[-2.0, 1.0], [0.5, -3.0]])
    if m == 2:
        B = np.array([[1.0, 0.3], [-0.2, 2.0]])
        K = np.linalg.solve(B, -At)
        return make_scenario(np.zeros((2, 2)), B, K, Ellipse(center, P), 5.0)
    return make_scenario([[1.0, 2.0], [0.0, -1.0]], [[0.0], [1.0]], [[5.0, 3.0]],
                         Ellipse(center, P), 5.0)


def test_identity_shape_matrix():
    red = reduce(_ellipse_scenario(np.eye(2), [3.0, 2.0]))
    np.testing.assert_allclose(red.E, np.eye(2))
    np.testing.assert_allclose(red.scenario.center, [3.0, 2.0])
    assert red.scenario.obstacle.radius == 1.0


def test_diagonal_square_root():
    red = reduce(_ellipse_scenario(np.diag([4.0, 1.0]), [1.0, 0.0]))
    np.testing.assert_allclose(red.E, np.diag([2.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(red.scenario.center, [2.0, 0.0], atol=1e-15)


def test_principal_sqrt_properties():
    rng = np.random.default_rng(0)
    for _ in range(50):
        M = rng.normal(size=(2, 2))
        P = M @ M.T + 0.1 * np.eye(2)
        E = principal_sqrt(P)
        np.testing.assert_allclose(E, E.T, atol=1e-14)
        assert np.all(np.linalg.eigvalsh(E) > 0)
        np.testing.assert_allclose(E.T @ E, P, atol=1e-10)


def test_principal_sqrt_rejects_indefinite():
    with pytest.raises(BadShapeMatrix):
        principal_sqrt(np.diag([1.0, -1.0]))


def test_reduce_needs_ellipse(fig1a):
    with pytest.raises(ScenarioError):
        reduce(fig1a)


def test_unknown_convention():
    with pytest.raises(ValueError):
        reduce(_ellipse_scenario(np.eye(2), [3.0, 2.0]), "other")


def test_spectrum_and_stabilizability_preserved():
    for sc in corpus(2, 40, ellipse=True):
        red = reduce(sc)
        np.testing.assert_allclose(np.sort_complex(red.scenario.eigvals),
                                   np.sort_complex(sc.eigvals), atol=1e-9)


def test_transported_field_is_conjugate():
    rng = np.random.default_rng(1)
    for sc in corpus(3, 20, ellipse=True):
        red = reduce(sc, TRANSPORTED)
        X = rng.uniform(-5, 5, size=(100, 2))
        F = vector_field(sc, X)
        Fh = vector_field(red.scenario, red.to_reduced(X))
        np.testing.assert_allclose(Fh, F @ red.E.T, rtol=1e-9, atol=1e-9)


def test_map_back_identity():
    sc = _ellipse_scenario(np.eye(2), [3.0, 2.0])
    rep = find_equilibria(reduce(sc).scenario).reports[0]
    back = map_back(rep, np.eye(2))
    np.testing.assert_array_equal(back.location, rep.location)
    np.testing.assert_array_equal(back.jacobian, rep.jacobian)


def test_mapped_spectrum_unchanged():
    for sc in corpus(4, 30, ellipse=True):
        red = reduce(sc)
        for rep in find_equilibria(red.scenario).reports:
            back = map_back(rep, red.E)
            w = np.sort_complex(np.linalg.eigvals(back.jacobian))
            np.testing.assert_allclose(w, np.sort_complex(rep.eigenvalues), atol=1e-9)
            assert back.kind is rep.kind


def test_round_trip_against_direct_scan():
    for sc in corpus(5, 30, ellipse=True):
        red = reduce(sc)
        mapped = [map_back(r, red.E).location for r in general_case(red.scenario).reports]
        direct = boundary_equilibrium_scan(sc).locations
        assert match_multisets(mapped, direct, 1e-6)


def test_fixed_convention_matches_for_single_input():
    sc = _ellipse_scenario(np.array([[2.0, 0.5], [0.5, 1.0]]), [3.0, 1.0], m=1)
    a = find_equilibria(reduce(sc, TRANSPORTED).scenario).locations
    b = find_equilibria(reduce(sc, FIXED).scenario).locations
    assert match_multisets(a, b, 1e-9)


def test_fixed_convention_differs_for_two_inputs():
    """With two inputs the re-derived weighting changes the filter, so the
    reduced equilibria generally move; the transported weighting does not."""
    sc = _ellipse_scenario(np.array([[3.0, 1.0], [1.0, 1.0]]), [2.0, 1.5])
    transported = reduce(sc, TRANSPORTED)
    fixed = reduce(sc, FIXED)
    np.testing.assert_allclose(fixed.scenario.D, np.eye(2), atol=1e-12)
    assert not np.allclose(transported.scenario.D, np.eye(2))
    a = [transported.to_original(p) for p in find_equilibria(transported.scenario).locations]
    b = [fixed.to_original(p) for p in find_equilibria(fixed.scenario).locations]
    direct = boundary_equilibrium_scan(sc).locations
    assert match_multisets(a, direct, 1e-6)
    assert not match_multisets(b, direct, 1e-6)


def test_forward_invariance_on_both_sides():
    cfg = IntegratorConfig(t_max=10.0)
    rng = np.random.default_rng(6)
    for sc in corpus(7, 4, ellipse=True):
        red = reduce(sc)
        for _ in range(3):
            x0 = rng.uniform(-6, 6, size=2)
            if sc.obstacle.h(x0) <= 0:
                continue
            tr = integrate(sc, x0, cfg, equilibria=[])
            trh = integrate(red.scenario, red.to_reduced(x0), cfg, equilibria=[])
            assert (tr.h.min() >= -1e-6) == (trh.h.min() >= -1e-6)

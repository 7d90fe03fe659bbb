import numpy as np
import pytest

from cbf_lab.corpus import corpus
from cbf_lab.errors import DegenerateGradient
from cbf_lab.model import Circle, make_scenario
from cbf_lab.oracle import finite_difference_jacobian, qp_reference_solver, reference_field
from cbf_lab.safety_filter import (
    eta,
    indicator,
    jacobian_at_boundary,
    make_scalar_field,
    safety_filter,
    vector_field,
)


def test_eta_on_fig1b(fig1b):
    assert eta(fig1b, [3.0, 0.0]) == -30.0
    assert eta(fig1b, [0.0, 0.0]) == 10.0 * 3.0


def test_eta_positive_far_along_gradient(fig1b):
    # grad h = (0, 10), At x = (-10, -5), h = 24: eta = -50 + 240
    assert eta(fig1b, [2.0, 5.0]) == 190.0


def test_filter_fig1b_at_saddle(fig1b):
    ev = safety_filter(fig1b, [3.0, 0.0])
    assert ev.eta == -30.0
    np.testing.assert_allclose(ev.v, [15.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(ev.F, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(qp_reference_solver(fig1b, [3.0, 0.0]), [15.0, 0.0], atol=1e-12)


def test_filter_fig1a_equilibrium(fig1a):
    np.testing.assert_allclose(safety_filter(fig1a, [2.0, 2.0]).F, [0.0, 0.0], atol=1e-12)


def test_inactive_filter_is_nominal(fig1a):
    x = np.array([0.1, -0.2])
    ev = safety_filter(fig1a, x)
    assert ev.eta >= 0
    np.testing.assert_array_equal(ev.v, [0.0])
    np.testing.assert_array_equal(ev.F, fig1a.Atilde @ x)


def test_indicator_values(fig1a, fig1b):
    assert indicator(fig1a, [2.0, 2.0]) == pytest.approx(-10 / 3, abs=1e-14)
    assert indicator(fig1b, [3.0, 0.0]) == -7.5


def test_indicator_zero_when_orthogonal():
    At = np.array([[-1.0, 0.0], [0.0, -1.0]])
    sc = make_scenario(At, np.eye(2), np.zeros((2, 2)), Circle([0, 2], 2 ** 0.5), 1.0)
    p = np.array([1.0, 1.0])  # h = 0, grad = (2, -2), A p = (-1, -1)
    assert sc.obstacle.h(p) == pytest.approx(0.0, abs=1e-12)
    assert indicator(sc, p) == pytest.approx(0.0, abs=1e-15)


def test_degenerate_gradient():
    # single input b = (1, 0); at x = (3, 1) on circle (3,0) r=1, grad h = (0, 2) so b^T grad = 0
    A = np.array([[-1.0, 0.0], [0.0, -1.0]])
    sc = make_scenario(A, [[1.0], [0.0]], [[0.0, 0.0]], Circle([3, 0], 1), 0.1)
    x = np.array([3.0, 1.0])
    assert eta(sc, x) < 0
    with pytest.raises(DegenerateGradient):
        safety_filter(sc, x)
    assert np.all(np.isnan(vector_field(sc, x[None, :])))


def test_closed_form_matches_kkt_on_random_states():
    rng = np.random.default_rng(0)
    total = 0
    worst = 0.0
    for sc in corpus(3, 40) + corpus(4, 10, ellipse=True):
        X = rng.uniform(-8, 8, size=(200, 2))
        F = vector_field(sc, X)
        R = reference_field(sc, X)
        ok = np.all(np.isfinite(F), axis=1)
        total += ok.sum()
        worst = max(worst, float(np.max(np.abs(F[ok] - R[ok]) / np.maximum(1, np.abs(R[ok])))))
    assert total >= 10_000
    assert worst <= 1e-8


def test_constraint_satisfied_everywhere():
    rng = np.random.default_rng(1)
    for sc in corpus(5, 20):
        for x in rng.uniform(-6, 6, size=(50, 2)):
            try:
                ev = safety_filter(sc, x)
            except DegenerateGradient:
                continue
            g = sc.obstacle.grad(x)
            assert g @ ev.F + sc.alpha0 * sc.obstacle.h(x) >= -1e-10 * max(1, abs(g @ ev.F))
            if ev.eta >= 0:
                assert np.all(ev.v == 0)


def test_active_kkt_constraint_tight():
    rng = np.random.default_rng(2)
    for sc in corpus(6, 20):
        X = rng.uniform(-6, 6, size=(100, 2))
        for x in X:
            if eta(sc, x) >= 0:
                continue
            th = qp_reference_solver(sc, x)
            g = sc.obstacle.grad(x)
            lhs = g @ (sc.Atilde @ x + sc.B @ th) + sc.alpha0 * sc.obstacle.h(x)
            assert abs(lhs) <= 1e-10 * max(1.0, np.linalg.norm(g) * np.linalg.norm(sc.Atilde @ x))


def test_continuity_across_switching_surface():
    rng = np.random.default_rng(3)
    for sc in corpus(8, 20):
        L = 3 * np.linalg.norm(sc.Atilde, 2) + 3 * sc.alpha0
        for _ in range(20):
            a, b = rng.uniform(-6, 6, size=(2, 2))
            ea, eb = eta(sc, a), eta(sc, b)
            if np.sign(ea) == np.sign(eb):
                continue
            for _ in range(60):
                m = 0.5 * (a + b)
                if np.sign(eta(sc, m)) == np.sign(ea):
                    a = m
                else:
                    b = m
            Fa, Fb = vector_field(sc, np.array([a, b]))
            if np.all(np.isfinite([Fa, Fb])):
                assert np.linalg.norm(Fa - Fb) <= L * max(np.linalg.norm(a - b), 1e-15) * 10 + 1e-9


def test_scalar_field_matches_vector_field(fig1a):
    f = make_scalar_field(fig1a)
    rng = np.random.default_rng(4)
    for x in rng.uniform(-5, 5, size=(50, 2)):
        if fig1a.obstacle.h(x) < 0:
            continue
        f1, f2, h, e = f(*x)
        np.testing.assert_allclose([f1, f2], vector_field(fig1a, x[None, :])[0], rtol=1e-12, atol=1e-12)
        assert e == pytest.approx(eta(fig1a, x))


def test_jacobian_left_eigenvector(figure):
    sc = figure.scenario()
    for p, _ in figure.expected:
        J = jacobian_at_boundary(sc, p)
        g = sc.obstacle.grad(np.array(p))
        np.testing.assert_allclose(J.T @ g, -sc.alpha0 * g, atol=1e-8 * np.linalg.norm(g))


def test_fig1b_jacobian_spectrum(fig1b):
    w = np.sort(np.linalg.eigvals(jacobian_at_boundary(fig1b, [3.0, 0.0])).real)
    assert w[0] == pytest.approx(-10.0)
    assert w[1] > 0


def test_jacobian_matches_finite_differences(figure):
    sc = figure.scenario()
    for p, _ in figure.expected:
        J = jacobian_at_boundary(sc, p)
        Jfd = finite_difference_jacobian(sc, p, 1e-6)
        assert np.max(np.abs(J - Jfd)) <= 1e-4


def test_second_eigenvalue_independent_of_alpha(figure):
    sc = figure.scenario()
    sc10 = sc.with_alpha0(10 * sc.alpha0)
    for p, _ in figure.expected:
        w1 = np.sort(np.linalg.eigvals(jacobian_at_boundary(sc, p)).real)
        w2 = np.sort(np.linalg.eigvals(jacobian_at_boundary(sc10, p)).real)
        other1 = w1[np.argmax(np.abs(w1 + sc.alpha0))]
        other2 = w2[np.argmax(np.abs(w2 + sc10.alpha0))]
        assert abs(other1 - other2) < 1e-8

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbf_lab.errors import RootFindingFailed
from cbf_lab.roots import cauchy_bound, cubic_discriminant, real_roots, trim


def _from_roots(roots, lead=1.0):
    return np.polynomial.polynomial.polyfromroots(roots) * lead


def test_simple_quartic():
    r = real_roots(_from_roots([-3.0, -1.0, 0.5, 2.0]))
    np.testing.assert_allclose(r, [-3.0, -1.0, 0.5, 2.0], atol=1e-12)


def test_no_real_roots():
    assert real_roots([1.0, 0.0, 1.0]) == []


def test_double_root_found_at_critical_point():
    r = real_roots(_from_roots([1.0, 1.0, -2.0]))
    np.testing.assert_allclose(r, [-2.0, 1.0], atol=1e-7)


def test_interval_restriction():
    r = real_roots(_from_roots([-3.0, -1.0, 0.5, 2.0]), lo=-2.0, hi=0.0)
    np.testing.assert_allclose(r, [-1.0], atol=1e-12)


def test_trailing_zero_coefficients_trimmed():
    np.testing.assert_array_equal(trim([1.0, 2.0, 0.0, 0.0]), [1.0, 2.0])
    assert real_roots([2.0, -1.0, 0.0]) == [2.0]


def test_zero_polynomial_rejected():
    with pytest.raises(RootFindingFailed):
        real_roots([0.0, 0.0])


def test_cauchy_bound_contains_roots():
    c = _from_roots([-7.0, 0.1, 3.0, 12.0])
    assert cauchy_bound(c) >= 12.0


def test_cubic_discriminant_sign():
    # (x-1)(x-2)(x-3): three real roots; x^3 + x: one real root
    assert cubic_discriminant(1, -6, 11, -6) > 0
    assert cubic_discriminant(1, 0, 1, 0) < 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=4, unique=True)
       .filter(lambda v: min((abs(a - b) for a in v for b in v if a != b), default=1) > 1e-2),
       st.floats(0.1, 10))
def test_recovers_well_separated_roots(roots, lead):
    found = real_roots(_from_roots(roots, lead))
    np.testing.assert_allclose(found, sorted(roots), atol=1e-7 * max(1, max(map(abs, roots))))

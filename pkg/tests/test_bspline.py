import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spanrl.bspline import SplineBasis
from spanrl.errors import DomainError

DEGREES = (1, 2, 3, 4)
ELEMS = (1, 2, 4, 8)

basis_params = st.tuples(st.sampled_from(ELEMS), st.sampled_from(DEGREES))


def test_knot_layout_is_clamped_uniform():
    b = SplineBasis(nelems=4, degree=2)
    assert np.allclose(b.knots[:3], 0.0)
    assert np.allclose(b.knots[-3:], 1.0)
    assert np.allclose(b.knots[3:6], [0.25, 0.5, 0.75])
    assert b.nbasis == 6


def test_endpoint_interpolation_degree1():
    b = SplineBasis(nelems=2, degree=1)
    assert np.allclose(b.eval(0.0), [1.0, 0.0, 0.0])
    assert np.allclose(b.eval(1.0), [0.0, 0.0, 1.0])


def test_hand_value_quarter_point():
    # two linear hats over [0, 0.5] and [0.5, 1]: x = 0.25 sits halfway up
    b = SplineBasis(nelems=2, degree=1)
    assert np.allclose(b.eval(0.25), [0.5, 0.5, 0.0])


def test_hand_derivative_quarter_point():
    b = SplineBasis(nelems=2, degree=1)
    assert np.allclose(b.eval_deriv(0.25), [-2.0, 2.0, 0.0])


def test_domain_error_outside_unit_interval():
    b = SplineBasis(nelems=2, degree=2)
    with pytest.raises(DomainError):
        b.eval(-0.01)
    with pytest.raises(DomainError):
        b.eval_deriv(1.01)


@given(basis_params, st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_partition_of_unity_and_nonnegativity(params, x):
    n, k = params
    values = SplineBasis(n, k).eval(x)
    assert abs(values.sum() - 1.0) < 1e-12
    assert np.all(values >= 0.0)


@given(basis_params, st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_local_support(params, x):
    n, k = params
    values = SplineBasis(n, k).eval(x)
    assert np.count_nonzero(values) <= k + 1


@given(basis_params, st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_derivative_sums_to_zero(params, x):
    n, k = params
    assert abs(SplineBasis(n, k).eval_deriv(x).sum()) < 1e-12


@pytest.mark.parametrize("nelems", ELEMS)
@pytest.mark.parametrize("degree", DEGREES)
def test_derivative_matches_finite_difference(nelems, degree):
    b = SplineBasis(nelems, degree)
    rng = np.random.default_rng(degree * 100 + nelems)
    x = rng.uniform(0.0, 1.0, size=1000)
    # keep clear of knots, where degree-1 derivatives are one-sided
    for knot in np.unique(b.knots):
        x = x[np.abs(x - knot) > 1e-4]
    h = 1e-6
    fd = (b.eval(x + h) - b.eval(x - h)) / (2.0 * h)
    assert np.max(np.abs(fd - b.eval_deriv(x))) < 1e-5


def test_batch_shape_follows_input_shape():
    b = SplineBasis(3, 2)
    x = np.random.default_rng(0).uniform(0, 1, size=(4, 5))
    v = b.eval(x)
    assert v.shape == (4, 5, b.nbasis)
    assert np.allclose(v[1, 2], b.eval(x[1, 2]))

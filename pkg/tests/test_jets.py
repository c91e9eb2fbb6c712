import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_nullity import jets
from finsler_nullity.errors import DomainError, OrderBudgetError
from finsler_nullity.jets import Jet, SupportElement, evaluate_jet, finite_difference_partial, taylor_jet

coord = st.floats(-0.8, 0.8, allow_nan=False)
speed = st.floats(0.3, 2.0, allow_nan=False)


def poly(x, v):
    return x[0] ** 2 * v[1] + 3 * x[1] * v[0] ** 3 - v[0] * v[1] + 2.0


def test_support_element_validation():
    with pytest.raises(DomainError):
        SupportElement.of([0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        SupportElement.of([0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        SupportElement.of([np.nan, 0.0], [1.0, 0.0])
    z = SupportElement.of([1, 2], [3, 4])
    assert z.n == 2 and z.x == (1.0, 2.0)


def test_polynomial_partials_exact():
    z = SupportElement.of([0.5, -1.0], [2.0, 0.25])
    jv = evaluate_jet(poly, z, 2, 3)
    x, v = z.xa, z.va
    assert jv.value == pytest.approx(poly(x, v))
    assert jv.partial((0,), (1,)) == pytest.approx(2 * x[0])
    assert jv.partial((1,), (0, 0)) == pytest.approx(18 * v[0])
    assert jv.partial((1,), (0, 0, 0)) == pytest.approx(18.0)
    assert jv.partial((0, 0), (1,)) == pytest.approx(2.0)
    assert jv.partial((), (0, 1)) == pytest.approx(-1.0)
    assert jv.partial((0, 0), ()) == pytest.approx(2 * v[1])


def test_order_budget():
    z = SupportElement.of([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(OrderBudgetError):
        taylor_jet(poly, z, jets.MAX_ORDER_X + 1, 1)
    with pytest.raises(OrderBudgetError):
        finite_difference_partial(poly, z, ((0, 0, 0), (0, 0)))
    with pytest.raises(ValueError):
        finite_difference_partial(poly, z, ((0,), ()), step=1e-12)


def test_domain_checked():
    z = SupportElement.of([2.0, 0.0], [1.0, 0.0])
    with pytest.raises(DomainError):
        taylor_jet(poly, z, 1, 1, domain=lambda x: x @ x < 1)


def test_univariate_rules_match_closed_forms():
    z = SupportElement.of([0.3], [1.7])
    sp = jets.jet_space(1, 0, 4)
    _, v = Jet.variables(sp, z.xa, z.va)
    s = v[0]
    t = 1.7
    c = jets.sqrt(s).c
    # coefficients are d^m/dt^m / m!
    assert c[1] == pytest.approx(0.5 * t**-0.5)
    assert c[2] == pytest.approx(-0.125 * t**-1.5)
    assert c[4] == pytest.approx(-5 / 128 * t**-3.5)
    assert (1.0 / s).c[3] == pytest.approx(-(t**-4))
    assert jets.power(s, -2.0).c[2] == pytest.approx(3 * t**-4)


@settings(max_examples=30, deadline=None)
@given(a=coord, b=coord, p=speed, q=speed)
def test_product_and_quotient_rules(a, b, p, q):
    z = SupportElement.of([a, b], [p, q])

    def f(x, v):
        return jets.sqrt(v[0] * v[0] + v[1] * v[1]) * (1.0 + x[0] * x[1])

    def h(x, v):
        return (x[0] + 2.0) / (v[0] + v[1] * v[1])

    for fun in (f, h):
        jv = evaluate_jet(fun, z, 2, 2)
        for key, val in jv.partials.items():
            if 0 < len(key[0]) + len(key[1]) <= 3:
                fd = finite_difference_partial(fun, z, key)
                assert abs(val - fd) <= 1e-6 * max(1.0, abs(val))


@settings(max_examples=20, deadline=None)
@given(a=coord, p=speed, q=speed)
def test_inverse_matrix_jet(a, p, q):
    z = SupportElement.of([a, 0.1], [p, q])
    sp = jets.jet_space(2, 1, 2)
    x, v = Jet.variables(sp, z.xa, z.va)
    m = jets.stack([jets.stack([2.0 + v[0] * v[0], x[0] * v[1]]), jets.stack([x[0] * v[1], 3.0 + v[1] * x[1]])])
    mi = jets.inv(m)
    prod = jets.einsum("ij,jk->ik", m, mi)
    assert np.allclose(prod.c[..., 0], np.eye(2))
    assert np.max(np.abs(prod.c[..., 1:])) < 1e-12


def test_derivative_is_index_shift():
    z = SupportElement.of([0.2, 0.4], [1.0, -0.5])
    J = taylor_jet(poly, z, 2, 3)
    d = J.dx(0).dv(1)
    assert float(d.value) == pytest.approx(2 * z.xa[0])
    assert d.space.order_x == 1 and d.space.order_v == 2


def test_fd_disagreement_small_on_smooth_function():
    z = SupportElement.of([0.1, -0.3], [0.8, 0.6])

    def f(x, v):
        return jets.sqrt(v[0] * v[0] + 2.0 * v[1] * v[1] + x[0] * v[0] * v[1]) * (1.0 + x[1] * x[1])

    assert jets.jet_fd_disagreement(f, z, 3) < 1e-7


def test_arrays_and_jets_share_formula():
    x, v = np.array([0.2, 0.1]), np.array([0.7, -0.4])
    z = SupportElement.of(x, v)
    assert float(taylor_jet(poly, z, 1, 1).value) == pytest.approx(poly(x, v))
    assert math.isclose(jets.sqrt(4.0), 2.0)

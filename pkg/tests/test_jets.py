import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equiaffine import jets
from equiaffine.dsl import eval_jet
from equiaffine.jets import DivisionByZeroJet, DomainError, Jet, jet_variable, slot

from conftest import mp_partial, random_expr


def test_variable_jets():
    u = jet_variable("u", 0.0, 3)
    assert u.value == 0.0 and u.derivative(1, 0) == 1.0
    assert all(u.coeffs[slot(a, b)] == 0 for a in range(4) for b in range(4 - a) if (a, b) != (1, 0))
    v = jet_variable("v", 2.5, 3)
    assert v.value == 2.5 and v.derivative(0, 1) == 1.0 and v.derivative(1, 0) == 0.0
    w = jet_variable("u", 1.0, 1)
    assert len(w.coeffs) == 3 and w.derivative(1, 0) == 1.0


def test_arithmetic_examples():
    u = jet_variable("u", 0.0, 3)
    sq = u * u
    assert sq.derivative(2, 0) == 2.0  # raw partials, factorials applied on read
    assert sq.coeffs[slot(2, 0)] == 1.0  # normalized storage
    s = jet_variable("u", 1.0, 3) + jet_variable("v", 1.0, 3)
    assert s.value == 2.0 and s.derivative(1, 0) == 1.0 and s.derivative(0, 1) == 1.0
    r = Jet.constant(1.0, 3) / jet_variable("u", 2.0, 3)
    for k in range(4):
        exact = (-1) ** k * math.factorial(k) / 2.0 ** (k + 1)
        assert r.derivative(k, 0) == pytest.approx(exact, rel=1e-14)


def test_elementary_examples():
    s = jets.sin(jet_variable("u", 0.0, 3))
    assert [s.derivative(k, 0) for k in range(4)] == pytest.approx([0, 1, 0, -1], abs=1e-15)
    e = jets.exp(Jet.constant(0.0, 3))
    assert e.value == 1.0 and np.all(e.coeffs[1:] == 0)
    c = jets.cosh(jet_variable("v", 0.3, 4))
    for k in range(5):
        exact = math.cosh(0.3) if k % 2 == 0 else math.sinh(0.3)
        assert abs(c.derivative(0, k) - exact) <= 1e-14


def test_poles_and_domains():
    with pytest.raises(DivisionByZeroJet):
        Jet.constant(1.0, 2) / jet_variable("u", 0.0, 2)
    with pytest.raises(DomainError):
        jets.log(jet_variable("u", 0.0, 2))
    with pytest.raises(DomainError):
        jets.log(jet_variable("u", -1.0, 2))
    with pytest.raises(DomainError):
        jets.sqrt(jet_variable("u", -1.0, 2))


def test_truncation_mixes_orders():
    a = jet_variable("u", 0.5, 4)
    b = jet_variable("v", 0.5, 2)
    assert (a * b).order == 2


def test_matrix_helpers():
    u, v = jet_variable("u", 0.3, 3), jet_variable("v", -0.2, 3)
    m = jets.stack([jets.stack([2 + u, v]), jets.stack([u * v, 3 - v])])
    det = jets.det2(m)
    direct = (2 + u) * (3 - v) - v * (u * v)
    assert np.allclose(det.coeffs, direct.coeffs, atol=1e-14)
    ident = jets.inv(m) @ m
    assert np.allclose(ident.value, np.eye(2), atol=1e-14)
    assert np.allclose(ident.coeffs[1:], 0.0, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_pythagorean_identity(u0, v0):
    x = jet_variable("u", u0, 5) * jet_variable("v", v0, 5)
    one = jets.sin(x) ** 2 + jets.cos(x) ** 2
    assert abs(one.value - 1.0) <= 1e-12
    assert np.abs(one.coeffs[1:]).max() <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3), st.floats(-2, 2))
def test_exp_log_inverse(u0, v0):
    x = jet_variable("u", u0, 4) + jet_variable("v", v0, 4) ** 2
    back = jets.exp(jets.log(x))
    assert np.allclose(back.coeffs, x.coeffs, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 2), st.sampled_from([-1.0 / 3.0, 0.5, 1.5, -2.0]))
def test_pow_const_matches_closed_form(u0, p):
    y = jets.pow_const(jet_variable("u", u0, 4), p)
    for k in range(5):
        exact = math.prod(p - i for i in range(k)) * u0 ** (p - k)
        assert y.derivative(k, 0) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_random_expressions_against_mpmath():
    rng = random.Random(5)
    for _ in range(40):
        node = random_expr(rng)
        u0, v0 = rng.uniform(-1, 1), rng.uniform(-1, 1)
        j = eval_jet(node, jet_variable("u", u0, 3), jet_variable("v", v0, 3))
        for a, b in [(1, 0), (0, 1), (1, 1), (0, 3)]:
            ref = mp_partial(node, u0, v0, a, b)
            assert abs(j.derivative(a, b) - ref) <= 1e-9 * max(1.0, abs(ref))

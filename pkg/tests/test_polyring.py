"""Oracle tests for exact polynomial arithmetic.

Provenance tags: [DERIVED] = checked against an independent oracle
(property laws, quadrature, sympy-free closed forms); [TRIVIAL] = direct
consequence of the definitions.
"""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from piesos.polyring import Poly, as_fraction, canonical_vars

VARS = ("s", "theta_1", "theta_2")


def sp(text):
    return Poly.parse(text)


@st.composite
def polys(draw, max_terms=5, max_exp=3):
    nterms = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(nterms):
        e = tuple(draw(st.integers(0, max_exp)) for _ in VARS)
        num = draw(st.integers(-6, 6))
        den = draw(st.integers(1, 4))
        terms[e] = terms.get(e, Fraction(0)) + Fraction(num, den)
    return Poly.from_terms(VARS, terms)


rationals = st.fractions(
    min_value=-10, max_value=10, max_denominator=8
)

# ----------------------------------------------------------------------
# ring axioms  [DERIVED: algebraic laws checked pointwise by construction]
# ----------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), polys())
def test_ring_axioms(p, q, r):
    assert (p + q) + r == p + (q + r)
    assert p + q == q + p
    assert (p * q) * r == p * (q * r)
    assert p * q == q * p
    assert p * (q + r) == p * q + p * r
    assert p + Poly.zero() == p
    assert p * Poly.one() == p
    assert p - p == Poly.zero()
    assert p * Poly.zero() == Poly.zero()


@settings(max_examples=40, deadline=None)
@given(polys(), st.integers(0, 4))
def test_power_is_repeated_product(p, n):
    expected = Poly.one()
    for _ in range(n):
        expected = expected * p
    assert p**n == expected


# ----------------------------------------------------------------------
# evaluation consistency  [DERIVED: exact vs float evaluation agree]
# ----------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(polys(), rationals, rationals, rationals)
def test_eval_exact_matches_float(p, x, y, z):
    subs = dict(zip(VARS, (x, y, z)))
    exact = p.eval_exact(subs)
    approx = p.eval_float({v: float(c) for v, c in subs.items()})
    assert abs(float(exact) - float(approx)) <= 1e-9 * (1 + abs(float(exact)))


def test_eval_float_broadcasts_arrays():
    p = sp("s^2*theta_1 - theta_1")
    s = np.linspace(0, 1, 5)
    out = p.eval_float({"s": s, "theta_1": 2.0})
    assert np.allclose(out, 2 * s**2 - 2)


# ----------------------------------------------------------------------
# calculus  [DERIVED: fundamental theorem vs Gauss-Legendre quadrature]
# ----------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(polys())
def test_derivative_of_antiderivative(p):
    assert p.antiderivative("s").diff("s") == p


@settings(max_examples=30, deadline=None)
@given(polys(max_terms=4, max_exp=4))
def test_definite_integral_matches_quadrature(p):
    # integrate over s on [0, 1] with the other variables fixed
    exact = p.integrate("s", 0, 1).eval_float({"theta_1": 0.3, "theta_2": 0.7})
    nodes, weights = np.polynomial.legendre.leggauss(16)
    x = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    vals = p.eval_float({"s": x, "theta_1": 0.3, "theta_2": 0.7})
    quad = float(np.dot(w, np.broadcast_to(vals, x.shape)))
    assert abs(float(exact) - quad) < 1e-10


def test_integral_with_variable_bounds():
    # [TRIVIAL] int_0^s theta dtheta = s^2/2 ; int_s^1 1 dtheta = 1 - s
    assert sp("theta_1").integrate("theta_1", 0, "s") == sp("s^2/2")
    assert Poly.one().integrate("theta_1", "s", 1) == sp("1 - s")


def test_diff_unknown_variable_is_zero():
    assert sp("s^2").diff("theta_1") == Poly.zero()


# ----------------------------------------------------------------------
# substitution and renaming  [TRIVIAL]
# ----------------------------------------------------------------------


def test_substitution_expands_binomial():
    p = sp("s^2")
    assert p.substitute({"s": sp("s + 1")}) == sp("s^2 + 2*s + 1")


def test_substitution_is_simultaneous():
    p = sp("s*theta_1")
    q = p.substitute({"s": sp("theta_1"), "theta_1": sp("s")})
    assert q == sp("s*theta_1")
    r = sp("s - theta_1").substitute({"s": sp("theta_1"), "theta_1": sp("s")})
    assert r == sp("theta_1 - s")


def test_rename_merges_variables():
    p = sp("s*theta_1^2")
    assert p.rename({"theta_1": "s"}) == sp("s^3")


@settings(max_examples=30, deadline=None)
@given(polys(), rationals, rationals, rationals)
def test_substitute_commutes_with_eval(p, x, y, z):
    # p(s -> s+1) evaluated at s=x equals p evaluated at s=x+1
    shifted = p.substitute({"s": sp("s + 1")})
    subs = {"s": x, "theta_1": y, "theta_2": z}
    subs_shift = {"s": x + 1, "theta_1": y, "theta_2": z}
    assert shifted.eval_exact(subs) == p.eval_exact(subs_shift)


# ----------------------------------------------------------------------
# canonical form, ordering, text round-trip
# ----------------------------------------------------------------------


def test_canonical_variable_order():
    # [TRIVIAL] spatial variable first, then dummies by index
    assert canonical_vars(["theta_2", "s", "eta_1", "theta_1"]) == (
        "s",
        "theta_1",
        "theta_2",
        "eta_1",
    )


def test_graded_lex_render_order():
    # [TRIVIAL] higher total degree first; ties broken lexicographically
    p = sp("1 + s^2 + theta_1^2 + s*theta_1 + s")
    assert p.render() == "s^2 + s*theta_1 + theta_1^2 + s + 1"


def test_render_examples():
    assert Poly.zero().render() == "0"
    assert sp("-s + 3/4").render() == "-s + (3/4)"
    assert sp("(s-1)*theta_1").render() == "s*theta_1 - theta_1"


@settings(max_examples=60, deadline=None)
@given(polys())
def test_parse_render_round_trip(p):
    assert Poly.parse(p.render()) == p


def test_parse_rejects_malformed():
    for bad in ["", "s +", "s^-2", "(s", "s / theta_1", "2 ** s", "é"]:
        with pytest.raises(ValueError):
            Poly.parse(bad)


def test_parse_decimal_is_exact():
    assert Poly.parse("0.125*s") == sp("s/8")
    assert as_fraction(0.1) == Fraction(1, 10)


# ----------------------------------------------------------------------
# misc queries  [TRIVIAL]
# ----------------------------------------------------------------------


def test_degrees_and_coefficients():
    p = sp("2*s^3*theta_1 - s*theta_1 + 5")
    assert p.total_degree() == 4
    assert p.degree("s") == 3
    assert p.degree("theta_2") == 0
    assert p.coefficient({"s": 3, "theta_1": 1}) == 2
    assert p.coefficient({"s": 1, "theta_1": 1}) == -1
    assert p.coefficient({}) == 5
    assert p.coefficient({"theta_2": 1}) == 0


def test_constant_queries():
    assert Poly.const("3/4").constant_value() == Fraction(3, 4)
    with pytest.raises(ValueError):
        sp("s").constant_value()


def test_zero_coefficients_prune_variables():
    p = sp("s + theta_1") - sp("theta_1")
    assert p.vars == ("s",)
    assert p == sp("s")

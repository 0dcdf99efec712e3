"""Oracle tests for PDE -> PIE compilation."""

import json
from fractions import Fraction

import numpy as np
import pytest

from piesos.polyring import Poly
from piesos.pi_ops import (
    BcSpec,
    Domain,
    build_T,
    pi_identity,
    pi_scale,
)
from piesos.compile import (
    PdeModel,
    PdeTerm,
    build_g_r,
    compile_pde,
    example_burgers_reaction,
    example_fisher,
    load_model,
    pde_from_dict,
    pde_to_dict,
    pie_from_dict,
    pie_to_dict,
    save_model,
)

DOM = Domain(0, 1)
P = Poly.parse


def test_fisher_linear_component_golden():
    # [PAPER] C_1 = Id + 5T for u_t = u_ss + 5u - u^2 under Dirichlet
    pie = compile_pde(example_fisher())
    (c1_term,) = pie.C[1].terms
    c1 = c1_term[0]
    assert c1.R0[0][0] == Poly.one()
    assert c1.R1[0][0] == P("5*(s-1)*theta_1")
    assert c1.R2[0][0] == P("5*s*(theta_1-1)")


def test_fisher_quadratic_component_golden():
    # [PAPER] C_2 = -(T (x) T)
    pie = compile_pde(example_fisher())
    T = build_T(BcSpec.dirichlet(), DOM)
    assert pie.C[2].terms == ((pi_scale(T, -1), T),)
    assert pie.degree == 2


def test_burgers_components():
    # [DERIVED] -u u_s becomes -(T (x) R_1); growth term joins C_1
    pie = compile_pde(example_burgers_reaction(growth=Fraction(3)))
    T = build_T(BcSpec.dirichlet(), DOM)
    (c2_term,) = pie.C[2].terms
    assert c2_term[0] == pi_scale(T, -1)
    # second factor is the first-derivative map
    assert c2_term[1].R1[0][0] == P("theta_1")
    assert c2_term[1].R2[0][0] == P("theta_1 - 1")
    (c1_term,) = pie.C[1].terms
    assert c1_term[0].R0[0][0] == Poly.one()  # from u_ss
    assert c1_term[0].R1[0][0] == P("3*(s-1)*theta_1")


def test_first_order_transport():
    # [DERIVED] n=1, u(0)=0: T is the running integral, u_s maps to the identity
    pde = PdeModel(
        DOM, 1, [PdeTerm(-1, (0, 1))], BcSpec(1, [[1, 0]])
    )
    pie = compile_pde(pde)
    assert pie.T.R1[0][0] == Poly.one()
    assert pie.T.R2[0][0] == Poly.zero()
    (c1_term,) = pie.C[1].terms
    assert c1_term[0] == pi_scale(pi_identity(1, DOM), -1)


def test_ball_polynomial():
    # [DERIVED] g_r(1) = r^2 - int (T 1)^2 = r^2 - 1/120 for Dirichlet T
    T = build_T(BcSpec.dirichlet(), DOM)
    g = build_g_r(T, Fraction(1, 2))
    assert g.constant == Fraction(1, 4)
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    assert abs(g.evaluate(one) - (0.25 - 1 / 120)) < 1e-12


def test_degree_zero_term_rejected():
    with pytest.raises(ValueError, match="equilibrium"):
        PdeTerm(1, (0, 0, 0))


def test_exponent_length_enforced():
    with pytest.raises(ValueError, match="length"):
        PdeModel(DOM, 2, [PdeTerm(1, (0, 1))], BcSpec.dirichlet())


def test_coefficient_variable_restriction():
    with pytest.raises(ValueError, match="polynomial in s"):
        PdeTerm(P("theta_1"), (1, 0, 0))


def test_pde_round_trip(tmp_path):
    pde = example_fisher()
    d = pde_to_dict(pde)
    back = pde_from_dict(json.loads(json.dumps(d)))
    assert back.terms == pde.terms
    assert back.order == pde.order
    path = tmp_path / "fisher.json"
    save_model(pde, str(path))
    again = load_model(str(path))
    assert again.terms == pde.terms


def test_pie_round_trip(tmp_path):
    pie = compile_pde(example_fisher())
    back = pie_from_dict(pie_to_dict(pie))
    assert back.T == pie.T
    assert back.C[1] == pie.C[1]
    assert back.C[2] == pie.C[2]
    path = tmp_path / "fisher_pie.json"
    save_model(pie, str(path))
    again = load_model(str(path))
    assert again.T == pie.T


def test_unknown_format_rejected():
    with pytest.raises(ValueError, match="format"):
        pde_from_dict({"format": "pde-v9"})
    with pytest.raises(ValueError, match="format"):
        pie_from_dict({"format": "nope"})

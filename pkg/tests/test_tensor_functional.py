"""Oracle tests for tensor-PI operators and functional-PI kernels.

Provenance tags as elsewhere: [DERIVED] independent oracle, [PAPER]
reference value, [TRIVIAL] immediate consequence of definitions.
"""

from fractions import Fraction

import numpy as np
import pytest

from piesos.polyring import Poly
from piesos.pi_ops import (
    BcSpec,
    Domain,
    PiOp,
    SampledFunction,
    build_T,
    pi_from_kernels,
    pi_identity,
    pi_multiplier,
)
from piesos.tensor_ops import (
    TensorPiOp,
    build_U_hat,
    monomials_bivariate,
    n_monomials,
    pi_op_row,
    tp_append_factor,
    tp_apply,
    tp_from_factors,
    tp_scale,
    tp_scale_compose,
)
from piesos.functional import (
    DistPoly,
    FPiOp,
    canonicalize,
    distpoly_mul,
    fpi_eval,
    fpi_tensor,
    simplex_rule,
    split_integral_check,
    vec_tensor_pi,
)

DOM = Domain(0, 1)
P = Poly.parse


def rand_pi(rng, with_multiplier=False):
    def rand_poly(vars, deg=2):
        terms = {}
        for _ in range(rng.integers(1, 4)):
            e = tuple(int(rng.integers(0, deg + 1)) for _ in vars)
            terms[e] = terms.get(e, 0) + int(rng.integers(-2, 3))
        return Poly.from_terms(vars, terms)

    r0 = rand_poly(("s",)) if with_multiplier else Poly.zero()
    return PiOp(
        [[r0]], [[rand_poly(("s", "theta_1"))]], [[rand_poly(("s", "theta_1"))]], DOM
    )


def smooth_x(pts):
    pts = np.asarray(pts, dtype=float)
    return np.sin(2.1 * pts) + 0.4 * pts**2 + 0.3


# ----------------------------------------------------------------------
# simplex quadrature rule
# ----------------------------------------------------------------------


def test_simplex_rule_volume_and_exactness():
    # [DERIVED] sum of weights = |simplex| = 1/d!; moments match exact
    # symbolic integration of the kernel over the ordered simplex
    import math

    for d in (1, 2, 3):
        pts, wts = simplex_rule(DOM, d, nodes=10)
        assert abs(wts.sum() - 1.0 / math.factorial(d)) < 1e-12
        assert np.all(np.diff(pts, axis=1) >= -1e-14)
    kern = P("theta_1*theta_2^2")
    exact = kern.integrate("theta_1", 0, "theta_2").integrate("theta_2", 0, 1)
    pts, wts = simplex_rule(DOM, 2, nodes=12)
    quad = float(np.dot(wts, pts[:, 0] * pts[:, 1] ** 2))
    assert abs(quad - float(exact.constant_value())) < 1e-13


# ----------------------------------------------------------------------
# vec on pure integral operators
# ----------------------------------------------------------------------


def test_vec_degree_one_full_integral():
    # [TRIVIAL] kernels 1/1 integrate x over the whole interval: kernel b-a
    op = pi_from_kernels([[Poly.one()]], [[Poly.one()]], DOM)
    k = vec_tensor_pi(tp_from_factors(op))
    assert k.kernel == Poly.one()
    # and on [0, 3] the kernel is the constant 3
    dom3 = Domain(0, 3)
    op3 = pi_from_kernels([[Poly.one()]], [[Poly.one()]], dom3)
    assert vec_tensor_pi(tp_from_factors(op3)).kernel == Poly.const(3)


def test_vec_fisher_energy_kernel_value():
    # [PAPER] with T the Dirichlet double-integrator map, the energy
    # functional at x == 1 is int_0^1 (s(s-1)/2)^2 ds = 1/120
    T = build_T(BcSpec.dirichlet(), DOM)
    k = vec_tensor_pi(tp_from_factors(T, T))
    exact = (
        k.kernel.integrate("theta_1", 0, "theta_2").integrate("theta_2", 0, 1)
    )
    assert exact == Poly.const(Fraction(1, 120))
    val = fpi_eval(k, lambda t: np.ones_like(np.asarray(t, dtype=float)))
    assert abs(val - 1 / 120) < 1e-12


def test_vec_matches_split_integral_pure_kernels():
    # [DERIVED] quadrature identity int (H x (x) x ... )(s) ds == k[x]
    rng = np.random.default_rng(23)
    for d in (1, 2, 3):
        for _ in (0, 1):
            h = TensorPiOp(d, [tuple(rand_pi(rng) for _ in range(d))], DOM)
            direct, via, diff = split_integral_check(h, smooth_x)
            assert diff < 1e-7 * (1 + abs(direct))


def test_vec_matches_split_integral_with_multiplier():
    # [DERIVED] same identity with one multiplier factor per term
    rng = np.random.default_rng(29)
    for d in (1, 2, 3):
        factors = [rand_pi(rng, with_multiplier=(j == 0)) for j in range(d)]
        h = TensorPiOp(d, [tuple(factors)], DOM)
        direct, via, diff = split_integral_check(h, smooth_x)
        assert diff < 1e-7 * (1 + abs(direct))


def test_vec_identity_slot_hand_kernel():
    # [DERIVED] term (Id, T): kernel T1(th2, th1) + T2(th1, th2) by direct
    # region decomposition; for the Dirichlet T this is 2*th1*(th2 - 1)
    T = build_T(BcSpec.dirichlet(), DOM)
    h = tp_from_factors(pi_identity(1, DOM), T)
    k = vec_tensor_pi(h)
    assert k.kernel == P("2*theta_1*theta_2 - 2*theta_1")


def test_vec_two_multipliers_rejected():
    h = tp_from_factors(pi_identity(1, DOM), pi_multiplier(P("s"), DOM))
    with pytest.raises(ValueError, match="multiplier"):
        vec_tensor_pi(h)


def test_vec_multiset_invariance():
    # [DERIVED] vec depends only on the multiset of factors
    rng = np.random.default_rng(31)
    p, q, r = (rand_pi(rng) for _ in range(3))
    k1 = vec_tensor_pi(tp_from_factors(p, q, r))
    k2 = vec_tensor_pi(tp_from_factors(r, p, q))
    assert k1 == k2


# ----------------------------------------------------------------------
# canonicalize
# ----------------------------------------------------------------------


def test_canonicalize_folds_square_integral():
    # [DERIVED] the full-square functional int int F x x dtheta dtheta
    # equals the canonical functional with kernel F(t1,t2) + F(t2,t1)
    F = P("theta_1^2*theta_2 + theta_1")
    k = canonicalize(2, {(1, 2): F, (2, 1): F}, DOM)
    sym = F + F.rename({"theta_1": "eta_9"}).rename(
        {"theta_2": "theta_1"}
    ).rename({"eta_9": "theta_2"})
    assert k.kernel == sym
    # quadrature cross-check on the square
    n = 48
    x0, w0 = np.polynomial.legendre.leggauss(n)
    g = 0.5 + 0.5 * x0
    w = 0.5 * w0
    xx = smooth_x(g)
    Fv = F.eval_float({"theta_1": g[:, None], "theta_2": g[None, :]})
    direct = float(w @ (Fv * np.outer(xx, xx)) @ w)
    via = fpi_eval(k, smooth_x)
    assert abs(direct - via) < 1e-10


def test_canonicalize_rejects_non_permutation():
    with pytest.raises(ValueError, match="permutation"):
        canonicalize(2, {(1, 1): Poly.one()}, DOM)


# ----------------------------------------------------------------------
# interleaving products
# ----------------------------------------------------------------------


def test_fpi_tensor_unit_kernels():
    # [TRIVIAL] two degree-1 units interleave to the constant kernel 2
    k1 = FPiOp(1, Poly.one(), DOM)
    assert fpi_tensor(k1, k1).kernel == Poly.const(2)


def test_fpi_tensor_matches_product_of_values():
    # [DERIVED] k1[x]*k2[x] == (k1 (x) k2)[x] by quadrature
    rng = np.random.default_rng(37)

    def rand_kernel(d):
        terms = {}
        for _ in range(3):
            e = tuple(int(rng.integers(0, 3)) for _ in range(d))
            terms[e] = terms.get(e, 0) + int(rng.integers(-3, 4))
        return FPiOp(
            d, Poly.from_terms(tuple(f"theta_{i+1}" for i in range(d)), terms), DOM
        )

    for d1, d2 in [(1, 1), (1, 2), (2, 2), (2, 1)]:
        k1, k2 = rand_kernel(d1), rand_kernel(d2)
        prod = fpi_tensor(k1, k2)
        lhs = fpi_eval(k1, smooth_x) * fpi_eval(k2, smooth_x)
        rhs = fpi_eval(prod, smooth_x)
        assert abs(lhs - rhs) < 1e-7 * (1 + abs(lhs))


def test_distpoly_product_evaluates_pointwise():
    # [DERIVED] (c + k)[x] * (e + g)[x] == product distributed polynomial
    rng = np.random.default_rng(41)
    k = FPiOp(1, P("theta_1 + 1"), DOM)
    g = FPiOp(2, P("theta_1*theta_2"), DOM)
    p = DistPoly(Fraction(1, 2), {1: k}, DOM)
    q = DistPoly(2, {2: g}, DOM)
    prod = distpoly_mul(p, q)
    lhs = p.evaluate(smooth_x) * q.evaluate(smooth_x)
    rhs = prod.evaluate(smooth_x)
    assert abs(lhs - rhs) < 1e-8 * (1 + abs(lhs))
    assert prod.constant == 1
    assert sorted(prod.components) == [1, 2, 3]


# ----------------------------------------------------------------------
# tensor operators
# ----------------------------------------------------------------------


def test_tp_apply_is_pointwise_product():
    # [DERIVED] single term: product of individual applications
    rng = np.random.default_rng(43)
    p, q = rand_pi(rng), rand_pi(rng)
    grid = np.linspace(0, 1, 101)
    xf = SampledFunction.from_callable(smooth_x, np.linspace(0, 1, 257))
    h = tp_from_factors(p, q)
    from piesos.pi_ops import pi_apply

    expect = pi_apply(p, xf, grid).values * pi_apply(q, xf, grid).values
    got = tp_apply(h, [xf, xf], grid).values
    assert np.max(np.abs(got - expect)) < 1e-12


def test_tp_scale_and_scale_compose():
    rng = np.random.default_rng(47)
    p, q = rand_pi(rng), rand_pi(rng)
    h = tp_from_factors(p, q)
    grid = np.linspace(0, 1, 81)
    xf = SampledFunction.from_callable(smooth_x, np.linspace(0, 1, 257))
    base = tp_apply(h, [xf, xf], grid).values
    doubled = tp_apply(tp_scale(h, 2), [xf, xf], grid).values
    assert np.max(np.abs(doubled - 2 * base)) < 1e-12
    cs = tp_scale_compose(P("s"), h)
    scaled = tp_apply(cs, [xf, xf], grid).values
    assert np.max(np.abs(scaled - grid * base)) < 1e-12
    with pytest.raises(ValueError, match="multiplier"):
        tp_scale_compose(rand_pi(rng), h)  # integral operator: not allowed


def test_tp_append_factor():
    rng = np.random.default_rng(53)
    p, q, r = (rand_pi(rng) for _ in range(3))
    h = tp_append_factor(tp_from_factors(p, q), r)
    assert h.degree == 3
    assert h.terms == ((p, q, r),)


def test_tensor_shape_validation():
    rng = np.random.default_rng(59)
    with pytest.raises(ValueError, match="length"):
        TensorPiOp(2, [(rand_pi(rng),)], DOM)
    with pytest.raises(ValueError, match="scalar"):
        TensorPiOp(1, [(build_U_hat(1, DOM),)], DOM)


# ----------------------------------------------------------------------
# monomial row operators
# ----------------------------------------------------------------------


def test_monomial_basis_order_and_count():
    # [TRIVIAL] pinned order: ascending degree, s-major within a degree
    mons = monomials_bivariate(2)
    assert [m.render() for m in mons] == ["1", "s", "theta_1", "s^2", "s*theta_1", "theta_1^2"]
    assert n_monomials(4) == 15
    assert len(monomials_bivariate(4)) == n_monomials(4)


def test_U_hat_shape_and_row_action():
    # [DERIVED] row mu + j integrates monomial j over (s, b)
    U = build_U_hat(2, DOM)
    assert U.rows == 12 and U.cols == 1
    mu = 6
    xf = SampledFunction.from_callable(smooth_x, np.linspace(0, 1, 257))
    grid = np.linspace(0, 1, 41)
    from piesos.pi_ops import pi_apply

    out = pi_apply(U, xf, grid)
    # row 1 is the monomial s in the below-diagonal slot:
    # int_0^s s * x(theta) dtheta = s * int_0^s x
    import scipy.integrate as si

    fine = np.linspace(0, 1, 2001)
    cum = si.cumulative_trapezoid(smooth_x(fine), fine, initial=0.0)
    interp = np.interp(grid, fine, cum)
    assert np.max(np.abs(out.values[:, 1] - grid * interp)) < 1e-6
    # row mu is the constant monomial in the above-diagonal slot
    total = si.trapezoid(smooth_x(fine), fine)
    assert np.max(np.abs(out.values[:, mu] - (total - interp))) < 1e-6
    r = pi_op_row(U, 1)
    assert r.R1[0][0] == P("s")
    assert r.R2[0][0] == Poly.zero()

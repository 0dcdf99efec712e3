"""Tensor products of PI operators.

A degree-d tensor-PI operator maps a d-fold tensor argument to a function
of one variable: each term is a tuple of d scalar 3-PI factors, the j-th
factor acting on the j-th tensor slot, outputs multiplied pointwise:

    (H x1 (x) ... (x) xd)(s) = sum_terms  prod_j (F_j x_j)(s).

Applied on the diagonal (all slots equal) these are the building blocks of
distributed polynomial functionals of degree d.

Also provided: the stacked monomial operator U_hat used as the row basis
of sum-of-squares Gram parametrizations, with a pinned deterministic
monomial order (ascending total degree, then s-major lexicographic).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .polyring import Poly, as_fraction
from .pi_ops import (
    Domain,
    PiOp,
    SampledFunction,
    pi_apply,
    pi_compose,
    pi_multiplier,
    pi_scale,
)

__all__ = [
    "TensorPiOp",
    "tp_from_factors",
    "tp_add",
    "tp_scale",
    "tp_scale_compose",
    "tp_append_factor",
    "tp_apply",
    "monomials_bivariate",
    "n_monomials",
    "build_U_hat",
    "pi_op_row",
]


class TensorPiOp:
    """Sum of d-fold tensor products of scalar 3-PI operators."""

    __slots__ = ("degree", "terms", "domain")

    def __init__(self, degree: int, terms: Iterable[Sequence[PiOp]], domain: Domain):
        if degree < 1:
            raise ValueError("tensor degree must be >= 1")
        tt = []
        for term in terms:
            term = tuple(term)
            if len(term) != degree:
                raise ValueError("term length differs from tensor degree")
            for f in term:
                if not isinstance(f, PiOp) or f.rows != 1 or f.cols != 1:
                    raise ValueError("factors must be scalar PI operators")
                if f.domain != domain:
                    raise ValueError("factor domain differs from tensor domain")
            tt.append(term)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "terms", tuple(tt))
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("TensorPiOp is immutable")

    def __eq__(self, other):
        if not isinstance(other, TensorPiOp):
            return NotImplemented
        return (
            self.degree == other.degree
            and self.domain == other.domain
            and self.terms == other.terms
        )

    def __repr__(self):
        return f"TensorPiOp(degree={self.degree}, nterms={len(self.terms)})"


def tp_from_factors(*factors: PiOp) -> TensorPiOp:
    """Single-term tensor product of the given scalar operators."""
    if not factors:
        raise ValueError("need at least one factor")
    return TensorPiOp(len(factors), [tuple(factors)], factors[0].domain)


def tp_add(h: TensorPiOp, g: TensorPiOp) -> TensorPiOp:
    if h.degree != g.degree or h.domain != g.domain:
        raise ValueError("tensor operators are incompatible")
    return TensorPiOp(h.degree, h.terms + g.terms, h.domain)


def tp_scale(h: TensorPiOp, c) -> TensorPiOp:
    """Scale by an exact rational constant (applied to each first factor)."""
    c = as_fraction(c)
    if c == 0:
        raise ValueError("scaling a tensor operator to zero drops its terms")
    terms = [(pi_scale(t[0], c),) + t[1:] for t in h.terms]
    return TensorPiOp(h.degree, terms, h.domain)


def tp_scale_compose(c, h: TensorPiOp) -> TensorPiOp:
    """Left-multiply the output by a polynomial c(s) (multiplier composition).

    Valid because the output is a pointwise product: c(s) prod_j (F_j x)(s)
    equals ((M_c . F_1) x)(s) prod_{j>=2} (F_j x)(s).
    """
    if isinstance(c, PiOp):
        m = c
        if not m.is_multiplier():
            raise ValueError("only multiplier operators distribute over tensor terms")
    else:
        m = pi_multiplier(c if isinstance(c, Poly) else Poly.const(c), h.domain)
    terms = [(pi_compose(m, t[0]),) + t[1:] for t in h.terms]
    return TensorPiOp(h.degree, terms, h.domain)


def tp_append_factor(h: TensorPiOp, op: PiOp) -> TensorPiOp:
    """Append one factor slot to every term (degree grows by one)."""
    terms = [t + (op,) for t in h.terms]
    return TensorPiOp(h.degree + 1, terms, h.domain)


def tp_apply(h: TensorPiOp, xs: Sequence[SampledFunction], grid: np.ndarray | None = None,
             nodes: int = 32) -> SampledFunction:
    """Evaluate (H x1 (x) ... (x) xd) on a grid by quadrature."""
    if len(xs) != h.degree:
        raise ValueError(f"expected {h.degree} slot functions, got {len(xs)}")
    if grid is None:
        grid = xs[0].grid
    total = np.zeros(len(grid))
    for term in h.terms:
        prod = np.ones(len(grid))
        for f, x in zip(term, xs):
            prod = prod * pi_apply(f, x, grid, nodes=nodes).values
        total += prod
    return SampledFunction(grid, total)


# ----------------------------------------------------------------------
# monomial row operators
# ----------------------------------------------------------------------


def n_monomials(dbar: int) -> int:
    """Number of bivariate monomials of total degree <= dbar."""
    return (dbar + 1) * (dbar + 2) // 2


def monomials_bivariate(dbar: int) -> list[Poly]:
    """Monomials s^i theta^j with i+j <= dbar in the pinned order.

    Ascending total degree; within a degree, s-major lexicographic
    (s^2 before s*theta before theta^2).
    """
    out = []
    for deg in range(dbar + 1):
        for i in range(deg, -1, -1):
            j = deg - i
            out.append(
                Poly.from_terms(("s", "theta_1"), {(i, j): Fraction(1)})
            )
    return out


def build_U_hat(dbar: int, domain: Domain) -> PiOp:
    """Stacked monomial 2-PI operator with 2*n_monomials(dbar) rows.

    The first block carries each monomial in the below-diagonal kernel
    slot, the second block the same monomials in the above-diagonal slot.
    Row p of (U_hat x) evaluates int m_p(s,theta) x(theta) dtheta over
    (a,s) for p < mu and over (s,b) for p >= mu.
    """
    mons = monomials_bivariate(dbar)
    mu = len(mons)
    z = Poly.zero()
    R1 = [[m] for m in mons] + [[z] for _ in mons]
    R2 = [[z] for _ in mons] + [[m] for m in mons]
    R0 = [[z] for _ in range(2 * mu)]
    return PiOp(R0, R1, R2, domain)


def pi_op_row(op: PiOp, i: int) -> PiOp:
    """Extract row i of a column-matrix operator as a scalar operator."""
    if op.cols != 1:
        raise ValueError("row extraction expects a column operator")
    return PiOp([[op.R0[i][0]]], [[op.R1[i][0]]], [[op.R2[i][0]]], op.domain)

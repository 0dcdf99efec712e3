"""Compile 1-D polynomial PDEs into partial integral equations (PIEs).

A PDE model describes

    u_t = sum_i  c_i(s) * prod_{j=0}^{n} (d^j u / ds^j)^(alpha_ij)

on [a, b] with n independent linear boundary conditions B.  Substituting
u = T v (v = d^n u / ds^n the fundamental state, T from the boundary
conditions) and d^j u/ds^j = R_j v turns each term into a tensor product
of PI operators acting on copies of v, giving the boundary-condition-free
evolution

    T v_t = sum_k  C_k  v^(x)k ,

which is the PIE form used by the stability machinery.  States are
scalar-valued; terms of degree zero (constant sources) are rejected since
stability analysis is about the origin equilibrium.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Mapping, Sequence

from .polyring import Poly, as_fraction
from .pi_ops import (
    BcSpec,
    Domain,
    PiOp,
    build_Rj,
    build_T,
    op_from_dict,
    op_to_dict,
    pi_add,
    pi_compose,
    pi_multiplier,
)
from .tensor_ops import TensorPiOp, tp_scale_compose
from .functional import DistPoly, FPiOp, fpi_scale, vec_tensor_pi
from .tensor_ops import tp_from_factors

__all__ = [
    "PdeTerm",
    "PdeModel",
    "PieModel",
    "compile_pde",
    "build_g_r",
    "pde_to_dict",
    "pde_from_dict",
    "pie_to_dict",
    "pie_from_dict",
    "load_model",
    "save_model",
    "example_fisher",
    "example_burgers_reaction",
]

PDE_FORMAT = "pde-v1"
PIE_FORMAT = "pie-v1"


class PdeTerm:
    """One right-hand-side term c(s) * prod_j (d^j u)^(alpha_j)."""

    __slots__ = ("coef", "exponents")

    def __init__(self, coef, exponents: Sequence[int]):
        coef = coef if isinstance(coef, Poly) else Poly.const(coef)
        if not set(coef.vars) <= {"s"}:
            raise ValueError("term coefficient must be a polynomial in s only")
        exps = tuple(int(e) for e in exponents)
        if any(e < 0 for e in exps):
            raise ValueError("negative derivative multiplicities")
        if sum(exps) == 0:
            raise ValueError(
                "degree-zero (constant source) terms are not allowed: the "
                "origin must be an equilibrium"
            )
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "exponents", exps)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("PdeTerm is immutable")

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def __eq__(self, other):
        if not isinstance(other, PdeTerm):
            return NotImplemented
        return self.coef == other.coef and self.exponents == other.exponents


class PdeModel:
    """Scalar polynomial PDE with linear boundary conditions."""

    __slots__ = ("domain", "order", "terms", "bc")

    def __init__(self, domain: Domain, order: int, terms: Sequence[PdeTerm], bc: BcSpec):
        if bc.n != order:
            raise ValueError("boundary condition order differs from PDE order")
        if not terms:
            raise ValueError("PDE needs at least one right-hand-side term")
        for t in terms:
            if len(t.exponents) != order + 1:
                raise ValueError(
                    f"term exponent tuple must have length {order + 1} "
                    f"(multiplicity for u, u', ..., u^({order}))"
                )
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "terms", tuple(terms))
        object.__setattr__(self, "bc", bc)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("PdeModel is immutable")

    @property
    def degree(self) -> int:
        return max(t.degree for t in self.terms)


class PieModel:
    """PIE form T v_t = sum_k C_k v^(x)k."""

    __slots__ = ("domain", "T", "C")

    def __init__(self, domain: Domain, T: PiOp, C: Mapping[int, TensorPiOp]):
        for k, ck in C.items():
            if ck.degree != k:
                raise ValueError("component keyed by wrong degree")
            if ck.domain != domain:
                raise ValueError("component domain differs")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "C", dict(sorted(C.items())))

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("PieModel is immutable")

    @property
    def degree(self) -> int:
        return max(self.C, default=0)


def compile_pde(pde: PdeModel) -> PieModel:
    """Substitute derivative maps for state derivatives, term by term."""
    derivative_maps = [build_Rj(pde.bc, pde.domain, j) for j in range(pde.order + 1)]
    T = derivative_maps[0]
    per_degree: dict[int, list[tuple[PiOp, ...]]] = {}
    for term in pde.terms:
        factors: list[PiOp] = []
        for j, mult in enumerate(term.exponents):
            factors.extend([derivative_maps[j]] * mult)
        h = tp_from_factors(*factors)
        if not (term.coef == Poly.one()):
            h = tp_scale_compose(term.coef, h)
        per_degree.setdefault(term.degree, []).extend(h.terms)
    C: dict[int, TensorPiOp] = {}
    for k, terms in sorted(per_degree.items()):
        if k == 1:
            # merge linear terms into a single operator
            total = terms[0][0]
            for t in terms[1:]:
                total = pi_add(total, t[0])
            C[k] = TensorPiOp(1, [(total,)], pde.domain)
        else:
            C[k] = TensorPiOp(k, terms, pde.domain)
    return PieModel(pde.domain, T, C)


def build_g_r(T: PiOp, r) -> DistPoly:
    """Ball indicator polynomial g_r(v) = r^2 - |T v|^2 (nonnegative on the
    ball of radius r in the state norm)."""
    if T.rows != 1 or T.cols != 1:
        raise ValueError("expected a scalar fundamental-state map")
    r = as_fraction(r)
    ktt = vec_tensor_pi(tp_from_factors(T, T))
    return DistPoly(r * r, {2: fpi_scale(ktt, -1)}, T.domain)


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------


def pde_to_dict(pde: PdeModel) -> dict:
    return {
        "format": PDE_FORMAT,
        "domain": [str(pde.domain.a), str(pde.domain.b)],
        "order": pde.order,
        "terms": [
            {"coef": t.coef.render(), "exponents": list(t.exponents)}
            for t in pde.terms
        ],
        "B": [[str(x) for x in row] for row in pde.bc.B],
    }


def pde_from_dict(d: dict) -> PdeModel:
    if d.get("format") != PDE_FORMAT:
        raise ValueError(
            f"unsupported PDE file format {d.get('format')!r}; expected {PDE_FORMAT!r}"
        )
    dom = Domain(Fraction(d["domain"][0]), Fraction(d["domain"][1]))
    order = int(d["order"])
    terms = [
        PdeTerm(Poly.parse(t["coef"]), t["exponents"]) for t in d["terms"]
    ]
    bc = BcSpec(order, [[Fraction(x) for x in row] for row in d["B"]])
    return PdeModel(dom, order, terms, bc)


def pie_to_dict(pie: PieModel) -> dict:
    return {
        "format": PIE_FORMAT,
        "domain": [str(pie.domain.a), str(pie.domain.b)],
        "T": op_to_dict(pie.T),
        "C": [
            {
                "degree": k,
                "terms": [[op_to_dict(f) for f in term] for term in ck.terms],
            }
            for k, ck in pie.C.items()
        ],
    }


def pie_from_dict(d: dict) -> PieModel:
    if d.get("format") != PIE_FORMAT:
        raise ValueError(
            f"unsupported PIE file format {d.get('format')!r}; expected {PIE_FORMAT!r}"
        )
    dom = Domain(Fraction(d["domain"][0]), Fraction(d["domain"][1]))
    T = op_from_dict(d["T"])
    C = {}
    for entry in d["C"]:
        k = int(entry["degree"])
        terms = [
            tuple(op_from_dict(f) for f in term) for term in entry["terms"]
        ]
        C[k] = TensorPiOp(k, terms, dom)
    return PieModel(dom, T, C)


def save_model(model, path: str) -> None:
    if isinstance(model, PdeModel):
        d = pde_to_dict(model)
    elif isinstance(model, PieModel):
        d = pie_to_dict(model)
    else:
        raise TypeError("expected a PdeModel or PieModel")
    with open(path, "w") as f:
        json.dump(d, f, indent=2, sort_keys=True)
        f.write("\n")


def load_model(path: str):
    with open(path) as f:
        d = json.load(f)
    fmt = d.get("format")
    if fmt == PDE_FORMAT:
        return pde_from_dict(d)
    if fmt == PIE_FORMAT:
        return pie_from_dict(d)
    raise ValueError(f"unsupported model file format {fmt!r}")


# ----------------------------------------------------------------------
# stock examples
# ----------------------------------------------------------------------


def example_fisher(domain: Domain | None = None) -> PdeModel:
    """Fisher-type reaction-diffusion u_t = u_ss + 5u - u^2, Dirichlet on [0,1]."""
    dom = domain or Domain(0, 1)
    terms = [
        PdeTerm(1, (0, 0, 1)),
        PdeTerm(5, (1, 0, 0)),
        PdeTerm(-1, (2, 0, 0)),
    ]
    return PdeModel(dom, 2, terms, BcSpec.dirichlet())


def example_burgers_reaction(growth=1) -> PdeModel:
    """Forced Burgers u_t = u_ss - u u_s + growth * u, Dirichlet on [0,1]."""
    terms = [
        PdeTerm(1, (0, 0, 1)),
        PdeTerm(-1, (1, 1, 0)),
        PdeTerm(as_fraction(growth), (1, 0, 0)),
    ]
    return PdeModel(Domain(0, 1), 2, terms, BcSpec.dirichlet())

"""Functional-PI operators: polynomial functionals on L2 via simplex kernels.

A degree-d functional-PI operator is the scalar functional

    k[x] = int_{a <= theta_1 <= ... <= theta_d <= b}
               Ktilde(theta_1, ..., theta_d) x(theta_1) ... x(theta_d) dtheta,

with every permutation region of the hypercube folded onto the ordered
simplex, so Ktilde is the *canonical* kernel: functionals agree iff their
canonical kernels agree (the diagonal has measure zero).

A distributed polynomial combines a constant with one functional-PI
component per degree.  The key constructions:

* ``vec_tensor_pi`` — the degree-d kernel of x -> int (H x^(x)d)(s) ds for a
  tensor-PI operator H (the bridge from operator algebra to functionals);
* ``fpi_tensor`` — the canonical kernel of a product of two functionals
  (sum over order-preserving interleavings of the two variable groups);
* ``distpoly_mul`` — products of distributed polynomials.

Pointwise multiplier factors are supported inside ``vec_tensor_pi`` as long
as at most one factor of any term acts by multiplication: that factor pins
its tensor slot to the output variable.  Terms with two or more multiplier
factors would need distributional kernels and are rejected.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Union

import numpy as np

from .polyring import Poly, as_fraction
from .pi_ops import Domain, PiOp, SampledFunction
from .tensor_ops import TensorPiOp, tp_apply

__all__ = [
    "FPiOp",
    "DistPoly",
    "theta_var",
    "fpi_zero",
    "fpi_add",
    "fpi_scale",
    "canonicalize",
    "vec_tensor_pi",
    "fpi_tensor",
    "fpi_eval",
    "split_integral_check",
    "simplex_rule",
    "distpoly_mul",
]


def theta_var(i: int) -> str:
    return f"theta_{i}"


class FPiOp:
    """Canonical simplex kernel of a degree-d polynomial functional."""

    __slots__ = ("degree", "kernel", "domain")

    def __init__(self, degree: int, kernel: Poly, domain: Domain):
        if degree < 1:
            raise ValueError("functional degree must be >= 1")
        allowed = {theta_var(i) for i in range(1, degree + 1)}
        if not set(kernel.vars) <= allowed:
            raise ValueError(
                f"kernel variables {kernel.vars} outside theta_1..theta_{degree}"
            )
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("FPiOp is immutable")

    def __eq__(self, other):
        if not isinstance(other, FPiOp):
            return NotImplemented
        return (
            self.degree == other.degree
            and self.domain == other.domain
            and self.kernel == other.kernel
        )

    def __repr__(self):
        return f"FPiOp(degree={self.degree}, kernel={self.kernel.render()})"

    def is_zero(self) -> bool:
        return self.kernel.is_zero()


def fpi_zero(degree: int, domain: Domain) -> FPiOp:
    return FPiOp(degree, Poly.zero(), domain)


def fpi_add(k1: FPiOp, k2: FPiOp) -> FPiOp:
    if k1.degree != k2.degree or k1.domain != k2.domain:
        raise ValueError("functional operators are incompatible")
    return FPiOp(k1.degree, k1.kernel + k2.kernel, k1.domain)


def fpi_scale(k: FPiOp, c) -> FPiOp:
    return FPiOp(k.degree, k.kernel * as_fraction(c), k.domain)


# ----------------------------------------------------------------------
# canonicalization of region maps
# ----------------------------------------------------------------------


def canonicalize(degree: int, regions: Mapping[tuple[int, ...], Poly], domain: Domain) -> FPiOp:
    """Fold per-ordering kernels onto the ordered simplex.

    ``regions`` maps a permutation ``perm`` of ``(1..d)`` — meaning the
    region theta_perm[0] <= theta_perm[1] <= ... <= theta_perm[d-1] — to
    the kernel valid there.  Folding renames theta_perm[k] to the k-th
    ordered variable and sums.
    """
    total = Poly.zero()
    for perm, kern in regions.items():
        if sorted(perm) != list(range(1, degree + 1)):
            raise ValueError(f"{perm} is not a permutation of 1..{degree}")
        mapping = {
            theta_var(v): theta_var(k + 1) for k, v in enumerate(perm)
        }
        total = total + kern.rename(mapping)
    return FPiOp(degree, total, domain)


# ----------------------------------------------------------------------
# vec: tensor-PI -> functional-PI
# ----------------------------------------------------------------------


def _scalar_parts(f: PiOp) -> tuple[Poly, Poly, Poly]:
    r0, r1, r2 = f.scalar_params()
    return r0, r1, r2


def vec_tensor_pi(h: TensorPiOp) -> FPiOp:
    """Canonical kernel of x -> int_a^b (H x^(x)d)(s) ds.

    Each term is expanded over the multiplier/integral split of its
    factors; the pure-integral part folds the region decomposition of the
    iterated integrals onto the ordered simplex (the s-integral runs over
    each gap between consecutive ordered variables, factors below s use
    their below-diagonal kernel); a single multiplier factor pins s to its
    slot variable.  Two or more multiplier factors in one term: rejected.
    """
    d = h.degree
    a, b = h.domain.a, h.domain.b
    total = Poly.zero()
    for term in h.terms:
        parts = [_scalar_parts(f) for f in term]
        mult_idx = [i for i, (r0, _, _) in enumerate(parts) if not r0.is_zero()]
        int_idx = [
            i for i, (_, r1, r2) in enumerate(parts)
            if not (r1.is_zero() and r2.is_zero())
        ]
        # expand the product over each factor's nonzero parts
        for chosen_mults in _subsets(mult_idx):
            rest = [i for i in range(d) if i not in chosen_mults]
            if not all(i in int_idx for i in rest):
                continue  # some factor contributes nothing in this split
            if len(chosen_mults) >= 2:
                raise ValueError(
                    "term with more than one multiplier factor has no "
                    "polynomial simplex kernel"
                )
            if len(chosen_mults) == 1:
                total = total + _vec_single_multiplier(
                    d, parts, chosen_mults[0], rest
                )
            else:
                total = total + _vec_all_integral(d, parts, a, b)
    return FPiOp(d, total, h.domain)


def _subsets(idx: list[int]):
    for r in range(len(idx) + 1):
        yield from itertools.combinations(idx, r)


def _vec_all_integral(d: int, parts, a: Fraction, b: Fraction) -> Poly:
    """Sum over factor-to-position assignments and s-gaps."""
    total = Poly.zero()
    kern1 = [p[1].rename({"theta_1": "eta_9"}) for p in parts]  # placeholder var
    kern2 = [p[2].rename({"theta_1": "eta_9"}) for p in parts]
    for sigma in itertools.permutations(range(d)):
        # sigma[k] = factor occupying ordered position k+1
        for j in range(d + 1):
            integrand = Poly.one()
            for k in range(d):
                src = kern1 if (k + 1) <= j else kern2
                kern = src[sigma[k]].rename({"eta_9": theta_var(k + 1)})
                if kern.is_zero():
                    integrand = Poly.zero()
                    break
                integrand = integrand * kern
            if integrand.is_zero():
                continue
            lo = Poly.const(a) if j == 0 else Poly.var(theta_var(j))
            hi = Poly.const(b) if j == d else Poly.var(theta_var(j + 1))
            total = total + integrand.integrate("s", lo, hi)
    return total


def _vec_single_multiplier(d: int, parts, mult_i: int, rest: list[int]) -> Poly:
    """Multiplier factor pins its slot variable to s (no s-integral)."""
    total = Poly.zero()
    c = parts[mult_i][0]
    positions = list(range(1, d + 1))
    for k in positions:
        others = [p for p in positions if p != k]
        for assign in itertools.permutations(rest):
            # assign[m] = factor index placed at position others[m]
            piece = c.rename({"s": theta_var(k)})
            for pos, fi in zip(others, assign):
                kern = parts[fi][1] if pos < k else parts[fi][2]
                piece = piece * kern.rename(
                    {"s": theta_var(k), "theta_1": "eta_9"}
                ).rename({"eta_9": theta_var(pos)})
                if piece.is_zero():
                    break
            total = total + piece
    return total


# ----------------------------------------------------------------------
# products of functionals
# ----------------------------------------------------------------------


def fpi_tensor(k1: FPiOp, k2: FPiOp) -> FPiOp:
    """Canonical kernel of the product functional k1[x] * k2[x].

    Sums over the order-preserving interleavings of the two ordered
    variable groups into the combined ordered tuple.
    """
    if k1.domain != k2.domain:
        raise ValueError("operator domains differ")
    d1, d2 = k1.degree, k2.degree
    d = d1 + d2
    total = Poly.zero()
    for picks in itertools.combinations(range(1, d + 1), d1):
        comp = [i for i in range(1, d + 1) if i not in picks]
        m1 = {theta_var(i + 1): theta_var(p) for i, p in enumerate(picks)}
        m2 = {theta_var(i + 1): theta_var(p) for i, p in enumerate(comp)}
        total = total + k1.kernel.rename(m1) * k2.kernel.rename(m2)
    return FPiOp(d, total, k1.domain)


# ----------------------------------------------------------------------
# quadrature evaluation
# ----------------------------------------------------------------------


@lru_cache(maxsize=64)
def _simplex_rule_cached(a: float, b: float, d: int, n: int):
    x0, w0 = np.polynomial.legendre.leggauss(n)
    pts = np.zeros((1, 0))
    wts = np.ones(1)
    upper = np.full(1, b)
    for _ in range(d):
        mid = 0.5 * (upper + a)
        half = 0.5 * (upper - a)
        new_t = mid[:, None] + half[:, None] * x0[None, :]
        new_w = wts[:, None] * (half[:, None] * w0[None, :])
        pts = np.repeat(pts, n, axis=0)
        pts = np.concatenate([new_t.reshape(-1, 1), pts], axis=1)
        wts = new_w.reshape(-1)
        upper = new_t.reshape(-1)
    return pts, wts


def simplex_rule(domain: Domain, degree: int, nodes: int = 24):
    """Gauss-Legendre product rule on the ordered simplex.

    Returns points of shape (N, degree) with columns (theta_1..theta_d),
    ascending within each row, and the matching weights.
    """
    return _simplex_rule_cached(float(domain.a), float(domain.b), degree, nodes)


def fpi_eval(
    k: FPiOp, x: Union[SampledFunction, Callable], nodes: int = 24
) -> float:
    """Quadrature value of k[x] over the ordered simplex."""
    pts, wts = simplex_rule(k.domain, k.degree, nodes)
    kern = k.kernel.eval_float(
        {theta_var(i + 1): pts[:, i] for i in range(k.degree)}
    )
    kern = np.broadcast_to(np.asarray(kern, dtype=float), wts.shape)
    xs = np.ones_like(wts)
    for i in range(k.degree):
        xs = xs * np.asarray(x(pts[:, i]), dtype=float)
    return float(np.dot(wts, kern * xs))


def split_integral_check(
    h: TensorPiOp, x: Union[SampledFunction, Callable], s_nodes: int = 64,
    simplex_nodes: int = 24,
) -> tuple[float, float, float]:
    """Compare int (H x^(x)d)(s) ds against the canonical-kernel value.

    Returns (direct, via_kernel, abs difference); the two sides agree for
    every tensor-PI operator, which is the correctness contract of
    ``vec_tensor_pi``.
    """
    a, b = float(h.domain.a), float(h.domain.b)
    x0, w0 = np.polynomial.legendre.leggauss(s_nodes)
    sg = 0.5 * (b + a) + 0.5 * (b - a) * x0
    sw = 0.5 * (b - a) * w0
    idx = np.argsort(sg)
    sg, sw = sg[idx], sw[idx]
    if isinstance(x, SampledFunction):
        xf = x
    else:
        grid = np.linspace(a, b, 257)
        xf = SampledFunction.from_callable(x, grid)
    vals = tp_apply(h, [xf] * h.degree, sg).values
    direct = float(np.dot(sw, vals))
    via = fpi_eval(vec_tensor_pi(h), xf, nodes=simplex_nodes)
    return direct, via, abs(direct - via)


# ----------------------------------------------------------------------
# distributed polynomials
# ----------------------------------------------------------------------


class DistPoly:
    """Constant plus one functional-PI component per degree."""

    __slots__ = ("constant", "components", "domain")

    def __init__(self, constant, components: Mapping[int, FPiOp], domain: Domain):
        comps = {}
        for deg, k in components.items():
            if k.degree != deg:
                raise ValueError("component keyed by wrong degree")
            if k.domain != domain:
                raise ValueError("component domain differs")
            if not k.is_zero():
                comps[deg] = k
        object.__setattr__(self, "constant", as_fraction(constant))
        object.__setattr__(self, "components", dict(sorted(comps.items())))
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("DistPoly is immutable")

    def max_degree(self) -> int:
        return max(self.components, default=0)

    def __eq__(self, other):
        if not isinstance(other, DistPoly):
            return NotImplemented
        return (
            self.constant == other.constant
            and self.domain == other.domain
            and self.components == other.components
        )

    def __repr__(self):
        degs = ", ".join(str(dg) for dg in self.components)
        return f"DistPoly(constant={self.constant}, degrees=[{degs}])"

    def evaluate(self, x, nodes: int = 24) -> float:
        return float(self.constant) + sum(
            fpi_eval(k, x, nodes) for k in self.components.values()
        )

    def __add__(self, other):
        if not isinstance(other, DistPoly):
            other = DistPoly(other, {}, self.domain)
        if self.domain != other.domain:
            raise ValueError("domains differ")
        comps = dict(self.components)
        for deg, k in other.components.items():
            comps[deg] = fpi_add(comps[deg], k) if deg in comps else k
        return DistPoly(self.constant + other.constant, comps, self.domain)

    def __mul__(self, other):
        if isinstance(other, DistPoly):
            return distpoly_mul(self, other)
        c = as_fraction(other)
        return DistPoly(
            self.constant * c,
            {dg: fpi_scale(k, c) for dg, k in self.components.items()},
            self.domain,
        )

    __rmul__ = __mul__


def distpoly_mul(p: DistPoly, q: DistPoly) -> DistPoly:
    """Product of distributed polynomials (interleaving on each pair)."""
    if p.domain != q.domain:
        raise ValueError("domains differ")
    comps: dict[int, FPiOp] = {}

    def acc(deg: int, k: FPiOp):
        comps[deg] = fpi_add(comps[deg], k) if deg in comps else k

    for dg, k in p.components.items():
        if q.constant != 0:
            acc(dg, fpi_scale(k, q.constant))
    for dg, k in q.components.items():
        if p.constant != 0:
            acc(dg, fpi_scale(k, p.constant))
    for d1, k1 in p.components.items():
        for d2, k2 in q.components.items():
            acc(d1 + d2, fpi_tensor(k1, k2))
    return DistPoly(p.constant * q.constant, comps, p.domain)

"""Partial-integral (PI) operators on a compact interval.

A 3-PI operator acts on x in L2[a,b]^m by

    (R x)(s) = R0(s) x(s) + int_a^s R1(s,theta) x(theta) dtheta
                           + int_s^b R2(s,theta) x(theta) dtheta,

with matrix-valued polynomial parameters {R0, R1, R2}.  Operators with
R0 = 0 are called 2-PI.  The class of 3-PI operators is closed under
addition, composition, and adjoints, with closed-form polynomial results;
everything here is exact rational arithmetic on the kernels.

The module also builds the fundamental-state map T for an n-th order
scalar differential state subject to n independent boundary conditions
B [u(a); u'(a); ...; u(b); u'(b); ...] = 0: u = T v where v = d^n u / ds^n,
together with the derivative maps R_j = d^j/ds^j . T (so R_n is the
identity).  Kernel variables are named ``s`` and ``theta_1``; composition
uses the dummy ``eta_1`` internally.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.integrate import simpson

from .polyring import Poly, as_fraction

__all__ = [
    "Domain",
    "PiOp",
    "SampledFunction",
    "BcSpec",
    "pi_zero",
    "pi_identity",
    "pi_multiplier",
    "pi_from_kernels",
    "pi_add",
    "pi_scale",
    "pi_compose",
    "pi_adjoint",
    "pi_apply",
    "differentiate_pi",
    "build_T",
    "build_Rj",
    "op_to_dict",
    "op_from_dict",
]

S = "s"
TH = "theta_1"
XI = "eta_1"

PolyMatrix = tuple[tuple[Poly, ...], ...]


class Domain:
    """Closed interval [a, b] with exact rational endpoints."""

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        object.__setattr__(self, "a", as_fraction(a))
        object.__setattr__(self, "b", as_fraction(b))
        if not self.a < self.b:
            raise ValueError(f"empty domain [{self.a}, {self.b}]")

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("Domain is immutable")

    def __eq__(self, other):
        return isinstance(other, Domain) and (self.a, self.b) == (other.a, other.b)

    def __hash__(self):
        return hash((self.a, self.b))

    def __repr__(self):
        return f"Domain({self.a}, {self.b})"

    @property
    def length(self) -> Fraction:
        return self.b - self.a

    def grid(self, n: int) -> np.ndarray:
        """Uniform grid of n+1 points including both endpoints."""
        return np.linspace(float(self.a), float(self.b), n + 1)


# ----------------------------------------------------------------------
# polynomial matrices
# ----------------------------------------------------------------------


def _as_poly(x) -> Poly:
    return x if isinstance(x, Poly) else Poly.const(x)


def _mat(entries: Iterable[Iterable]) -> PolyMatrix:
    rows = tuple(tuple(_as_poly(e) for e in row) for row in entries)
    if rows:
        w = len(rows[0])
        if any(len(r) != w for r in rows):
            raise ValueError("ragged matrix")
    return rows


def _mat_zero(r: int, c: int) -> PolyMatrix:
    z = Poly.zero()
    return tuple(tuple(z for _ in range(c)) for _ in range(r))


def _mat_shape(m: PolyMatrix) -> tuple[int, int]:
    return (len(m), len(m[0]) if m else 0)


def _mat_add(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix:
    return tuple(
        tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b)
    )


def _mat_scale(a: PolyMatrix, c) -> PolyMatrix:
    return tuple(tuple(x * c for x in row) for row in a)


def _mat_map(a: PolyMatrix, f: Callable[[Poly], Poly]) -> PolyMatrix:
    return tuple(tuple(f(x) for x in row) for row in a)


def _mat_mul(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix:
    ra, ca = _mat_shape(a)
    rb, cb = _mat_shape(b)
    if ca != rb:
        raise ValueError("matrix shape mismatch")
    out = []
    for i in range(ra):
        row = []
        for j in range(cb):
            acc = Poly.zero()
            for k in range(ca):
                acc = acc + a[i][k] * b[k][j]
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def _mat_transpose(a: PolyMatrix) -> PolyMatrix:
    r, c = _mat_shape(a)
    return tuple(tuple(a[i][j] for i in range(r)) for j in range(c))


def _fraction_matrix_inverse(m: list[list[Fraction]]) -> list[list[Fraction]]:
    """Exact inverse by Gauss-Jordan elimination; raises on singular input."""
    n = len(m)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ValueError("matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _fraction_matrix_rank(m: list[list[Fraction]]) -> int:
    rows = [list(r) for r in m]
    if not rows:
        return 0
    ncols = len(rows[0])
    rank = 0
    col = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pv = rows[rank][col]
        rows[rank] = [x / pv for x in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


# ----------------------------------------------------------------------
# the operator class
# ----------------------------------------------------------------------

_ALLOWED_R0 = frozenset({S})
_ALLOWED_K = frozenset({S, TH})


class PiOp:
    """3-PI operator with matrix polynomial parameters {R0, R1, R2}."""

    __slots__ = ("rows", "cols", "R0", "R1", "R2", "domain")

    def __init__(self, R0, R1, R2, domain: Domain):
        R0, R1, R2 = _mat(R0), _mat(R1), _mat(R2)
        shape = _mat_shape(R0)
        if _mat_shape(R1) != shape or _mat_shape(R2) != shape:
            raise ValueError("parameter matrices must share one shape")
        if shape[0] == 0 or shape[1] == 0:
            raise ValueError("empty operator")
        for entry in (e for row in R0 for e in row):
            if not set(entry.vars) <= _ALLOWED_R0:
                raise ValueError(f"multiplier parameter uses {entry.vars}, wants only ({S},)")
        for mtx in (R1, R2):
            for entry in (e for row in mtx for e in row):
                if not set(entry.vars) <= _ALLOWED_K:
                    raise ValueError(f"kernel uses {entry.vars}, wants subset of ({S}, {TH})")
        object.__setattr__(self, "R0", R0)
        object.__setattr__(self, "R1", R1)
        object.__setattr__(self, "R2", R2)
        object.__setattr__(self, "rows", shape[0])
        object.__setattr__(self, "cols", shape[1])
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("PiOp is immutable")

    def __eq__(self, other):
        if not isinstance(other, PiOp):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.R0 == other.R0
            and self.R1 == other.R1
            and self.R2 == other.R2
        )

    def __hash__(self):
        return hash((self.R0, self.R1, self.R2, self.domain))

    def __repr__(self):
        if self.rows == self.cols == 1:
            return (
                f"PiOp(R0={self.R0[0][0].render()}, R1={self.R1[0][0].render()}, "
                f"R2={self.R2[0][0].render()}, domain={self.domain!r})"
            )
        return f"PiOp({self.rows}x{self.cols} on {self.domain!r})"

    # convenience accessors for the (common) scalar case
    def scalar_params(self) -> tuple[Poly, Poly, Poly]:
        if self.rows != 1 or self.cols != 1:
            raise ValueError("operator is not scalar")
        return self.R0[0][0], self.R1[0][0], self.R2[0][0]

    def is_multiplier(self) -> bool:
        """True when both integral kernels vanish."""
        return all(e.is_zero() for row in self.R1 for e in row) and all(
            e.is_zero() for row in self.R2 for e in row
        )

    def is_integral(self) -> bool:
        """True when the multiplier part vanishes (a 2-PI operator)."""
        return all(e.is_zero() for row in self.R0 for e in row)

    def max_kernel_degree(self) -> int:
        return max(
            [e.total_degree() for m in (self.R0, self.R1, self.R2) for row in m for e in row]
        )

    def __add__(self, other):
        return pi_add(self, other)

    def __sub__(self, other):
        return pi_add(self, pi_scale(other, -1))

    def __neg__(self):
        return pi_scale(self, -1)

    def __matmul__(self, other):
        return pi_compose(self, other)


# ----------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------


def pi_zero(rows: int, cols: int, domain: Domain) -> PiOp:
    z = _mat_zero(rows, cols)
    return PiOp(z, z, z, domain)


def pi_identity(m: int, domain: Domain) -> PiOp:
    eye = tuple(
        tuple(Poly.const(int(i == j)) for j in range(m)) for i in range(m)
    )
    z = _mat_zero(m, m)
    return PiOp(eye, z, z, domain)


def pi_multiplier(c, domain: Domain) -> PiOp:
    """Multiplication operator x(s) -> c(s) x(s); c is a Poly or matrix of Poly."""
    if isinstance(c, Poly) or not isinstance(c, (list, tuple)):
        c = [[c]]
    c = _mat(c)
    r, k = _mat_shape(c)
    z = _mat_zero(r, k)
    return PiOp(c, z, z, domain)


def pi_from_kernels(R1, R2, domain: Domain) -> PiOp:
    """2-PI operator from the two integral kernels."""
    R1, R2 = _mat(R1), _mat(R2)
    z = _mat_zero(*_mat_shape(R1))
    return PiOp(z, R1, R2, domain)


# ----------------------------------------------------------------------
# algebra
# ----------------------------------------------------------------------


def pi_add(p: PiOp, q: PiOp) -> PiOp:
    if (p.rows, p.cols) != (q.rows, q.cols):
        raise ValueError("operator shapes differ")
    if p.domain != q.domain:
        raise ValueError("operator domains differ")
    return PiOp(
        _mat_add(p.R0, q.R0), _mat_add(p.R1, q.R1), _mat_add(p.R2, q.R2), p.domain
    )


def pi_scale(p: PiOp, c) -> PiOp:
    """Scale by a rational constant (exact)."""
    c = as_fraction(c)
    return PiOp(_mat_scale(p.R0, c), _mat_scale(p.R1, c), _mat_scale(p.R2, c), p.domain)


def pi_adjoint(p: PiOp) -> PiOp:
    """L2 adjoint: parameters {R0^T, R2(theta,s)^T, R1(theta,s)^T}."""
    swap = {S: TH, TH: S}
    sw = lambda m: _mat_map(_mat_transpose(m), lambda e: e.rename(swap))
    return PiOp(_mat_transpose(p.R0), sw(p.R2), sw(p.R1), p.domain)


def pi_compose(p: PiOp, q: PiOp) -> PiOp:
    """Composition p . q, closed-form polynomial kernels.

    Derived by swapping the order of integration in (p(q x))(s) and
    collecting the kernel against x(theta) on each side of theta = s;
    validated against quadrature oracles in the test-suite.
    """
    if p.cols != q.rows:
        raise ValueError("operator shapes do not compose")
    if p.domain != q.domain:
        raise ValueError("operator domains differ")
    a, b = p.domain.a, p.domain.b

    # kernels with the integration dummy in place
    p1_xi = _mat_map(p.R1, lambda e: e.rename({TH: XI}))  # P1(s, xi)
    p2_xi = _mat_map(p.R2, lambda e: e.rename({TH: XI}))
    q0_th = _mat_map(q.R0, lambda e: e.rename({S: TH}))  # Q0(theta)
    q1_xi = _mat_map(q.R1, lambda e: e.rename({S: XI}))  # Q1(xi, theta)
    q2_xi = _mat_map(q.R2, lambda e: e.rename({S: XI}))

    def int_prod(A, B, lo, hi) -> PolyMatrix:
        prod = _mat_mul(A, B)
        return _mat_map(prod, lambda e: e.integrate(XI, lo, hi))

    s_var = Poly.var(S)
    th_var = Poly.var(TH)

    R0 = _mat_mul(p.R0, q.R0)
    R1 = _mat_add(
        _mat_add(_mat_mul(p.R0, q.R1), _mat_mul(p.R1, q0_th)),
        _mat_add(
            _mat_add(
                int_prod(p1_xi, q1_xi, th_var, s_var),
                int_prod(p1_xi, q2_xi, Poly.const(a), th_var),
            ),
            int_prod(p2_xi, q1_xi, s_var, Poly.const(b)),
        ),
    )
    R2 = _mat_add(
        _mat_add(_mat_mul(p.R0, q.R2), _mat_mul(p.R2, q0_th)),
        _mat_add(
            _mat_add(
                int_prod(p2_xi, q2_xi, s_var, th_var),
                int_prod(p2_xi, q1_xi, th_var, Poly.const(b)),
            ),
            int_prod(p1_xi, q2_xi, Poly.const(a), s_var),
        ),
    )
    return PiOp(R0, R1, R2, p.domain)


def differentiate_pi(p: PiOp) -> PiOp:
    """Differentiate the output of a PI operator in s.

    Returns the operator with parameters

        R0' = dR0/ds + (R1 - R2)|_{theta=s},  R1' = dR1/ds,  R2' = dR2/ds.

    This equals d/ds . p on smooth inputs whenever no derivative of the
    input survives, i.e. for 2-PI operators (and for iterated derivative
    maps of T, whose boundary multiplier stays constant); applying it to
    a genuine multiplier treats d/ds[R0 x] as R0' x, which is only valid
    en route to a vanishing multiplier.
    """
    diag = {TH: S}
    bdry = _mat_map(
        tuple(
            tuple(r1 - r2 for r1, r2 in zip(row1, row2))
            for row1, row2 in zip(p.R1, p.R2)
        ),
        lambda e: e.rename(diag),
    )
    R0 = _mat_add(_mat_map(p.R0, lambda e: e.diff(S)), bdry)
    return PiOp(
        R0,
        _mat_map(p.R1, lambda e: e.diff(S)),
        _mat_map(p.R2, lambda e: e.diff(S)),
        p.domain,
    )


# ----------------------------------------------------------------------
# boundary conditions and the fundamental-state map
# ----------------------------------------------------------------------


class BcSpec:
    """n independent homogeneous boundary conditions for an n-th order state.

    ``B`` is an n x 2n exact matrix acting on the boundary value stack
    [u(a), u'(a), ..., u^(n-1)(a), u(b), u'(b), ..., u^(n-1)(b)].
    """

    __slots__ = ("n", "B")

    def __init__(self, n: int, B: Sequence[Sequence]):
        if n < 1:
            raise ValueError("differential order must be >= 1")
        rows = [list(map(as_fraction, row)) for row in B]
        if len(rows) != n or any(len(r) != 2 * n for r in rows):
            raise ValueError(f"B must be {n} x {2 * n}")
        if _fraction_matrix_rank(rows) < n:
            raise ValueError("boundary condition matrix is rank-deficient")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "B", tuple(tuple(r) for r in rows))

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("BcSpec is immutable")

    @staticmethod
    def dirichlet() -> "BcSpec":
        """u(a) = u(b) = 0 for a second-order state."""
        return BcSpec(2, [[1, 0, 0, 0], [0, 0, 1, 0]])

    def b1_b2(self) -> tuple[list[list[Fraction]], list[list[Fraction]]]:
        n = self.n
        B1 = [list(row[:n]) for row in self.B]
        B2 = [list(row[n:]) for row in self.B]
        return B1, B2


def _lemma_matrices(bc: BcSpec, domain: Domain):
    """Shared pieces of the fundamental-state construction."""
    n = bc.n
    a, b = domain.a, domain.b
    s_minus_a = Poly.var(S) - Poly.const(a)
    # G(s): upper-triangular with (s-a)^(j-i)/(j-i)!
    G = tuple(
        tuple(
            (s_minus_a ** (j - i)) / math.factorial(j - i) if j >= i else Poly.zero()
            for j in range(n)
        )
        for i in range(n)
    )
    # H(s): column of h_i(s) = s^(n-i-1)/(n-i-1)!
    H = tuple(
        (Poly.var(S) ** (n - i - 1) / math.factorial(n - i - 1),) for i in range(n)
    )
    B1, B2 = bc.b1_b2()
    Gb = [[G[i][j].eval_exact({S: b}) if G[i][j].vars else G[i][j].constant_value() for j in range(n)] for i in range(n)]
    M = [
        [B1[i][j] + sum(B2[i][k] * Gb[k][j] for k in range(n)) for j in range(n)]
        for i in range(n)
    ]
    try:
        Minv = _fraction_matrix_inverse(M)
    except ValueError:
        raise ValueError(
            "boundary conditions do not determine a unique fundamental-state map "
            "(B1 + B2*G(b) is singular)"
        ) from None
    return G, H, B2, Minv


def build_T(bc: BcSpec, domain: Domain) -> PiOp:
    """Map from the fundamental state v = u^(n) back to u, as a 2-PI operator.

    For u with n-th derivative v and boundary conditions B |u| = 0,
    u(s) = int_a^s T1(s,theta) v(theta) dtheta + int_s^b T2(s,theta) v(theta) dtheta
    with

        T1(s,theta) = h0(s - theta) - G[0,:](s) F(theta),
        T2(s,theta) = -G[0,:](s) F(theta),
        F(theta)    = (B1 + B2 G(b))^{-1} B2 H(b - theta),

    where h0(x) = x^(n-1)/(n-1)! and G is the polynomial fundamental matrix
    of the pure n-th order integrator.
    """
    n = bc.n
    G, H, B2, Minv = _lemma_matrices(bc, domain)
    b = domain.b
    # H(b - theta): column vector in theta
    h_shift = {S: Poly.const(b) - Poly.var(TH)}
    Hb = tuple((H[i][0].substitute(h_shift),) for i in range(n))
    B2H = _mat_mul(_mat(B2), Hb)
    F = _mat_mul(_mat(Minv), B2H)  # n x 1, polynomials in theta
    Grow = (G[0],)  # 1 x n in s
    GF = _mat_mul(Grow, F)[0][0]
    h0 = (Poly.var(S) - Poly.var(TH)) ** (n - 1) / math.factorial(n - 1)
    T1 = h0 - GF
    T2 = -GF
    return pi_from_kernels([[T1]], [[T2]], domain)


def build_Rj(bc: BcSpec, domain: Domain, j: int) -> PiOp:
    """The j-th derivative map R_j = d^j/ds^j . T for j = 0..n.

    R_0 = T, R_n = identity; intermediate maps arise by repeated
    differentiation (their boundary multipliers vanish identically, so
    the differentiation rule stays exact).
    """
    n = bc.n
    if not 0 <= j <= n:
        raise ValueError(f"derivative order {j} outside 0..{n}")
    if j == n:
        return pi_identity(1, domain)
    op = build_T(bc, domain)
    for _ in range(j):
        op = differentiate_pi(op)
    return op


# ----------------------------------------------------------------------
# sampled functions and quadrature application
# ----------------------------------------------------------------------


class SampledFunction:
    """Function values on a strictly increasing grid, cubic-spline interpolated."""

    __slots__ = ("grid", "values", "_spline")

    def __init__(self, grid: np.ndarray, values: np.ndarray):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or len(grid) < 4:
            raise ValueError("grid must be 1-D with at least 4 points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if values.shape[0] != grid.shape[0]:
            raise ValueError("values length must match grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_spline", None)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("SampledFunction is immutable")

    @classmethod
    def from_callable(cls, f: Callable, grid: np.ndarray) -> "SampledFunction":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.asarray(f(grid), dtype=float))

    def spline(self) -> CubicSpline:
        sp = object.__getattribute__(self, "_spline")
        if sp is None:
            sp = CubicSpline(self.grid, self.values)
            object.__setattr__(self, "_spline", sp)
        return sp

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.spline()(points)

    def l2_norm(self) -> float:
        v2 = self.values**2
        if v2.ndim > 1:
            v2 = v2.sum(axis=1)
        return float(np.sqrt(simpson(v2, x=self.grid)))


def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def pi_apply(
    op: PiOp, v: Union[SampledFunction, Callable], grid: np.ndarray | None = None,
    nodes: int = 32,
) -> SampledFunction:
    """Apply a PI operator by Gauss-Legendre quadrature, split at theta = s.

    ``v`` is a SampledFunction (or callable, with ``grid`` supplied for the
    output).  Only scalar operators (1 x 1) act on plain samples; matrix
    operators act on ``(npoints, cols)`` sample arrays.
    """
    if isinstance(v, SampledFunction):
        out_grid = v.grid if grid is None else np.asarray(grid, dtype=float)
        v_eval = v
    else:
        if grid is None:
            raise ValueError("grid required when v is a callable")
        out_grid = np.asarray(grid, dtype=float)
        v_eval = v

    a, b = float(op.domain.a), float(op.domain.b)
    x, w = _gl_nodes(nodes)
    spts = out_grid[:, None]

    def panel(lo, hi):
        # quadrature nodes/weights for [lo, hi] per output point (arrays)
        mid = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        return mid + half * x[None, :], half * w[None, :]

    th_left, w_left = panel(np.full_like(spts, a), spts)
    th_right, w_right = panel(spts, np.full_like(spts, b))

    def eval_v(pts: np.ndarray) -> np.ndarray:
        vals = v_eval(pts)
        return np.asarray(vals, dtype=float)

    vL = eval_v(th_left)  # (np, nodes) or (np, nodes, cols)
    vR = eval_v(th_right)
    v0 = eval_v(out_grid)

    # normalize a trailing component axis of length cols
    if v0.ndim == 1:
        if op.cols != 1:
            raise ValueError(f"operator expects {op.cols} components, input has 1")
        v0, vL, vR = v0[:, None], vL[:, :, None], vR[:, :, None]
    elif v0.shape[-1] != op.cols:
        raise ValueError(
            f"operator expects {op.cols} components, input has {v0.shape[-1]}"
        )

    out = np.zeros((len(out_grid), op.rows))
    for i in range(op.rows):
        acc = np.zeros(len(out_grid))
        for j in range(op.cols):
            vj0 = v0[..., j]
            vjL = vL[..., j]
            vjR = vR[..., j]
            r0 = op.R0[i][j]
            if not r0.is_zero():
                acc += r0.eval_float({S: out_grid}) * vj0
            r1 = op.R1[i][j]
            if not r1.is_zero():
                k = r1.eval_float({S: spts, TH: th_left})
                acc += np.sum(w_left * np.broadcast_to(k, th_left.shape) * vjL, axis=1)
            r2 = op.R2[i][j]
            if not r2.is_zero():
                k = r2.eval_float({S: spts, TH: th_right})
                acc += np.sum(w_right * np.broadcast_to(k, th_right.shape) * vjR, axis=1)
        out[:, i] = acc
    if op.rows == 1:
        out = out[:, 0]
    return SampledFunction(out_grid, out)


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------


def op_to_dict(op: PiOp) -> dict:
    return {
        "rows": op.rows,
        "cols": op.cols,
        "domain": [str(op.domain.a), str(op.domain.b)],
        "R0": [[e.render() for e in row] for row in op.R0],
        "R1": [[e.render() for e in row] for row in op.R1],
        "R2": [[e.render() for e in row] for row in op.R2],
    }


def op_from_dict(d: dict) -> PiOp:
    dom = Domain(Fraction(d["domain"][0]), Fraction(d["domain"][1]))
    parse_mat = lambda m: [[Poly.parse(e) for e in row] for row in m]
    op = PiOp(parse_mat(d["R0"]), parse_mat(d["R1"]), parse_mat(d["R2"]), dom)
    if (op.rows, op.cols) != (d["rows"], d["cols"]):
        raise ValueError("declared shape disagrees with parameter matrices")
    return op

"""Distributed sum-of-squares machinery and the stability feasibility program.

A distributed SOS polynomial is a functional q(x) = <Z(x), Q Z(x)> where Z
stacks integral operators with monomial kernels applied to x, and Q >= 0.
Linearizing q against the canonical simplex-kernel basis turns "q is SOS"
into linear equalities between Gram entries and kernel coefficients, which
is what makes the Lyapunov conditions finitely checkable:

  (1)  V(v) - eps^2 ||Tv||^2        is SOS,
  (2)  C^2 ||Tv||^2 - V(v) - p1 g_r is SOS,
  (3)  -LV(v) - 2 lambda V(v) - p2 g_r is SOS,

with p1, p2 SOS multipliers and g_r(v) = r^2 - ||Tv||^2 the ball indicator.
V is a quadratic form <Tv, P Tv> with P = U* Q_V U + eps^2 I, so every
condition is affine in the decision Grams and the program is a single SDP.

Internally the conditions are posed in unit-ball coordinates (state scaled
by 1/r and the identities divided by r^2), which keeps coefficients and
eigenvalue margins O(1) at every radius; the certificate converts back.
Slack Gram bases stack degree-1 monomial-kernel rows with degree-2 rows
formed as symmetric pairs of factor rows sharing the outer integration
variable.  The pair factors are the moment functionals m_a(v) = int t^a v
(constant in the outer variable) together with the state map T itself;
this is the smallest factor set that makes the localization multipliers
act: pairing two moments with (T, T) realizes m_a(v) m_b(v) ||Tv||^2,
exactly the shape of the multiplier-times-ball product p * ||Tv||^2
(a product of two separate integrals), while (slack, (T, T)) cross terms
cover the cubic Lie-derivative kernels.  A full tensor basis of monomial
pair rows spans more but its Gram dimension (hundreds) is prohibitive.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .compile import PieModel, build_g_r
from .functional import (
    DistPoly,
    FPiOp,
    fpi_add,
    fpi_eval,
    fpi_scale,
    fpi_tensor,
    fpi_zero,
    simplex_rule,
    vec_tensor_pi,
)
from .pi_ops import (
    Domain,
    PiOp,
    SampledFunction,
    pi_adjoint,
    pi_compose,
    pi_from_kernels,
    pi_identity,
)
from .polyring import Poly
from .tensor_ops import TensorPiOp, build_U_hat, pi_op_row, tp_from_factors

__all__ = [
    "SosBlock",
    "SosPoly",
    "Degrees",
    "PsdBlock",
    "ScalarVar",
    "SdpProblem",
    "StabilityCertificate",
    "gram_basis_rows",
    "linearize_quadratic",
    "linearize_sos",
    "lie_derivative",
    "Theorem1Program",
    "assemble_theorem1",
    "solve",
    "verify_certificate",
    "bisect",
]


# ----------------------------------------------------------------------
# basis handling
# ----------------------------------------------------------------------


def gram_basis_rows(basis) -> list[tuple[PiOp, ...]]:
    """Normalize a Gram row basis to a list of factor tuples.

    Accepted forms: a column PiOp (each row becomes a degree-1 entry), a
    TensorPiOp (each term becomes one row), or an explicit list of scalar
    PiOps / tuples of scalar PiOps.
    """
    if isinstance(basis, PiOp):
        if basis.cols != 1:
            raise ValueError("basis operator must be a column (cols == 1)")
        if basis.rows == 1:
            return [(basis,)]
        return [(pi_op_row(basis, i),) for i in range(basis.rows)]
    if isinstance(basis, TensorPiOp):
        return [tuple(term) for term in basis.terms]
    rows: list[tuple[PiOp, ...]] = []
    for entry in basis:
        if isinstance(entry, PiOp):
            rows.append((entry,))
        else:
            rows.append(tuple(entry))
    if not rows:
        raise ValueError("empty Gram basis")
    deg = len(rows[0])
    if any(len(rw) != deg for rw in rows):
        raise ValueError("all Gram basis rows must have the same tensor degree")
    return rows


def _pair_kernel(left_row: tuple[PiOp, ...], right_row: tuple[PiOp, ...]) -> FPiOp:
    return vec_tensor_pi(tp_from_factors(*(left_row + right_row)))


def linearize_quadratic(left, gram, right) -> DistPoly:
    """Canonical kernels of <Z_L(x), Q Z_R(x)> for numeric Gram Q.

    The result is a DistPoly of degree deg(L) + deg(R), linear in the
    entries of ``gram``.
    """
    lrows = gram_basis_rows(left)
    rrows = gram_basis_rows(right)
    G = np.asarray(gram, dtype=float)
    if G.ndim == 0:
        G = G.reshape(1, 1)
    if G.shape != (len(lrows), len(rrows)):
        raise ValueError(
            f"gram shape {G.shape} does not match bases "
            f"({len(lrows)} x {len(rrows)})"
        )
    dom = lrows[0][0].domain
    deg = len(lrows[0]) + len(rrows[0])
    total = fpi_zero(deg, dom)
    for i, lr in enumerate(lrows):
        for j, rr in enumerate(rrows):
            c = G[i, j]
            if c == 0.0:
                continue
            total = fpi_add(total, fpi_scale(_pair_kernel(lr, rr), Fraction(c)))
    return DistPoly(0, {deg: total} if not total.is_zero() else {}, dom)


@dataclass(frozen=True)
class SosBlock:
    """One Gram block of a distributed SOS polynomial."""

    i: int
    j: int
    gram: np.ndarray
    dbar: int


class SosPoly:
    """Distributed SOS polynomial with explicit Gram blocks.

    Row bases are tensor powers of the monomial-kernel stack U_hat(dbar);
    block (i, j) couples degree-i rows with degree-j rows.
    """

    def __init__(self, domain: Domain, d: int, dbar: int):
        if d < 1:
            raise ValueError("SOS degree d must be >= 1")
        self.domain = domain
        self.d = d
        self.dbar = dbar
        U = build_U_hat(dbar, domain)
        base = [pi_op_row(U, i) for i in range(U.rows)]
        self._powers: dict[int, list[tuple[PiOp, ...]]] = {1: [(r,) for r in base]}
        for k in range(2, d + 1):
            self._powers[k] = [
                prev + (r,) for prev in self._powers[k - 1] for r in base
            ]
        self.blocks: dict[tuple[int, int], SosBlock] = {}

    def rows(self, k: int) -> list[tuple[PiOp, ...]]:
        return self._powers[k]

    def block_dim(self, k: int) -> int:
        return len(self._powers[k])

    def set_block(self, i: int, j: int, gram) -> None:
        if not (1 <= i <= self.d and 1 <= j <= self.d):
            raise ValueError("block indices out of range")
        G = np.asarray(gram, dtype=float)
        if G.shape != (self.block_dim(i), self.block_dim(j)):
            raise ValueError("gram shape does not match row bases")
        self.blocks[(i, j)] = SosBlock(i, j, G, self.dbar)

    def full_gram(self) -> np.ndarray:
        """The assembled symmetric Gram over the stacked degree-1..d rows."""
        dims = [self.block_dim(k) for k in range(1, self.d + 1)]
        offs = np.concatenate([[0], np.cumsum(dims)])
        G = np.zeros((offs[-1], offs[-1]))
        for (i, j), blk in self.blocks.items():
            G[offs[i - 1] : offs[i], offs[j - 1] : offs[j]] += blk.gram
        return 0.5 * (G + G.T)


def linearize_sos(q: SosPoly) -> DistPoly:
    """Canonical per-degree kernels of a distributed SOS polynomial."""
    out = DistPoly(0, {}, q.domain)
    for (i, j), blk in q.blocks.items():
        out = out + linearize_quadratic(q.rows(i), blk.gram, q.rows(j))
    return out


# ----------------------------------------------------------------------
# Lie derivative
# ----------------------------------------------------------------------


def lie_derivative(pie: PieModel, P: PiOp) -> DistPoly:
    """Kernels of d/dt <Tv, P Tv> along T v_t = sum_k C_k v^(x)k.

    Requires P self-adjoint; the degree-(k+1) kernel is
    2 vec(C_k (x) (P o T)).
    """
    if pi_adjoint(P) != P:
        raise ValueError("P must be self-adjoint")
    PT = pi_compose(P, pie.T)
    comps: dict[int, FPiOp] = {}
    for k, ck in sorted(pie.C.items()):
        total = fpi_zero(k + 1, pie.domain)
        for term in ck.terms:
            total = fpi_add(total, vec_tensor_pi(tp_from_factors(*term, PT)))
        total = fpi_scale(total, 2)
        if not total.is_zero():
            comps[k + 1] = total
    return DistPoly(0, comps, pie.domain)


# ----------------------------------------------------------------------
# SDP problem container
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PsdBlock:
    name: str
    dim: int


@dataclass(frozen=True)
class ScalarVar:
    name: str
    nonneg: bool = True


class SdpProblem:
    """Feasibility program: symmetric PSD blocks + scalars + equalities.

    An equality row reads  sum_b <F_row^b, X_b> + sum_s c_s x_s = rhs_row,
    with F stored by upper-triangle entries (i <= j); the pairing is the
    symmetric inner product <F, X> = sum_i F_ii X_ii + 2 sum_{i<j} F_ij X_ij.
    """

    def __init__(
        self,
        blocks: Sequence[PsdBlock],
        scalars: Sequence[ScalarVar],
        row_keys: Sequence[tuple],
        entries: Mapping[tuple, Mapping[tuple, float]],
        rhs: Mapping[tuple, float],
        meta: dict | None = None,
    ):
        self.blocks = tuple(blocks)
        self.scalars = tuple(scalars)
        self.row_keys = tuple(row_keys)
        self.entries = {k: dict(v) for k, v in entries.items()}
        self.rhs = dict(rhs)
        self.meta = dict(meta or {})
        self._block_index = {b.name: i for i, b in enumerate(self.blocks)}
        self._scalar_index = {s.name: i for i, s in enumerate(self.scalars)}

    @property
    def n_rows(self) -> int:
        return len(self.row_keys)

    def block(self, name: str) -> PsdBlock:
        return self.blocks[self._block_index[name]]

    def scalar_index(self, name: str) -> int:
        return self._scalar_index[name]

    def matrix_hash(self) -> str:
        """Deterministic digest of the full constraint data."""
        h = hashlib.sha256()
        for b in self.blocks:
            h.update(f"B:{b.name}:{b.dim};".encode())
        for s in self.scalars:
            h.update(f"S:{s.name}:{int(s.nonneg)};".encode())
        for key in self.row_keys:
            h.update(repr(key).encode())
            row = self.entries.get(key, {})
            for col in sorted(row):
                h.update(f"{col}={row[col]!r};".encode())
            h.update(f"rhs={self.rhs.get(key, 0.0)!r}|".encode())
        return h.hexdigest()

    def stats(self) -> dict:
        nnz = sum(len(r) for r in self.entries.values())
        return {
            "n_rows": self.n_rows,
            "n_blocks": len(self.blocks),
            "block_dims": [b.dim for b in self.blocks],
            "n_scalars": len(self.scalars),
            "nnz": nnz,
        }


# ----------------------------------------------------------------------
# kernel bookkeeping
# ----------------------------------------------------------------------


def _theta_positions(p: Poly) -> list[tuple[int, int]]:
    """(variable position, theta index) pairs for the kernel variables."""
    out = []
    for pos, v in enumerate(p.vars):
        if v.startswith("theta_"):
            out.append((pos, int(v.split("_", 1)[1])))
        else:
            raise ValueError(f"kernel contains a non-simplex variable: {v}")
    return out


def kernel_coeffs(k: FPiOp) -> dict[tuple[int, ...], float]:
    """Float coefficients of a canonical kernel, keyed by theta exponents."""
    deg = k.degree
    out: dict[tuple[int, ...], float] = {}
    pos = _theta_positions(k.kernel)
    for exps, c in k.kernel.terms.items():
        key = [0] * deg
        for p, idx in pos:
            key[idx - 1] = exps[p]
        out[tuple(key)] = out.get(tuple(key), 0.0) + float(c)
    return {k2: v for k2, v in out.items() if v != 0.0}


def _eval_kernel_dict(
    coeffs: Mapping[tuple[int, ...], float],
    deg: int,
    x: SampledFunction,
    domain: Domain,
    nodes: int = 24,
) -> float:
    """Quadrature of sum_m c_m integral_simplex theta^m prod x(theta_i)."""
    if not coeffs:
        return 0.0
    pts, wts = simplex_rule(domain, deg, nodes)
    vals = np.ones(len(pts))
    for i in range(deg):
        vals = vals * x(pts[:, i])
    kern = np.zeros(len(pts))
    for mono, c in coeffs.items():
        term = np.full(len(pts), c)
        for i, e in enumerate(mono):
            if e:
                term = term * pts[:, i] ** e
        kern += term
    return float(np.sum(wts * kern * vals))


# ----------------------------------------------------------------------
# Theorem-1 style assembly
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Degrees:
    """Degree configuration for the feasibility program.

    d       SOS degree of the slack memberships (d = dp + 1),
    dp      SOS degree of the ball multipliers,
    dbar    monomial kernel degree of the Lyapunov Gram basis,
    dbar_slack  monomial kernel degree of the degree-1 slack rows,
    dbar2   maximal moment degree among the degree-2 pair factors,
    dbar_p  monomial kernel degree of the multiplier bases (default dbar).
    """

    d: int = 2
    dp: int = 1
    dbar: int = 4
    dbar_slack: int = 6
    dbar2: int = 2
    dbar_p: int | None = None

    def __post_init__(self):
        if self.d != self.dp + 1:
            raise ValueError("degree inconsistency: need d = dp + 1")
        if self.dbar < 1 or self.dbar_slack < 1 or self.dbar2 < 1:
            raise ValueError("kernel degrees must be >= 1")

    @property
    def p_dbar(self) -> int:
        return self.dbar if self.dbar_p is None else self.dbar_p


class Theorem1Program:
    """Cached assembly of the stability feasibility program for one PIE.

    All symbolic kernel computations (exact simplex kernels of every Gram
    basis pair) happen once in the constructor; ``problem(r, lam)`` then
    combines cached float coefficient tables, so bisection loops pay only
    for solves.
    """

    def __init__(
        self,
        pie: PieModel,
        eps2: float = 1e-4,
        degrees: Degrees | None = None,
        v_mode: str = "free",
    ):
        if eps2 <= 0:
            raise ValueError("eps2 must be positive")
        if v_mode not in ("free", "energy"):
            raise ValueError("v_mode must be 'free' or 'energy'")
        dmax = max(pie.C.keys(), default=1)
        if degrees is None:
            degrees = Degrees()
        if degrees.d < dmax:
            raise ValueError(
                f"slack degree d={degrees.d} cannot represent the "
                f"degree-{dmax + 1} Lie derivative terms"
            )
        self.pie = pie
        self.eps2 = float(eps2)
        self.degrees = degrees
        self.v_mode = v_mode
        self.domain = pie.domain
        t0 = time.time()
        self._build_bases()
        self._build_kernels()
        self.assembly_seconds = time.time() - t0

    # -- bases ---------------------------------------------------------

    def _build_bases(self) -> None:
        dom, dg = self.domain, self.degrees
        T = self.pie.T
        U_v = build_U_hat(dg.dbar, dom)
        self.rows_v = [pi_op_row(U_v, i) for i in range(U_v.rows)]
        self.rows_vt = [pi_compose(r, T) for r in self.rows_v]
        U_s = build_U_hat(dg.dbar_slack, dom)
        self.rows_slack = [pi_op_row(U_s, i) for i in range(U_s.rows)]
        U_p = build_U_hat(dg.p_dbar, dom)
        self.rows_p = [pi_op_row(U_p, i) for i in range(U_p.rows)]
        # pair factor rows: moment functionals m_a(v) = int t^a v(t) dt
        # (kernel t^a on both triangles, so the value is independent of the
        # outer variable) plus the state reconstruction map T
        self.rows_m = [
            pi_from_kernels(
                [[Poly.from_terms(("theta_1",), {(a,): Fraction(1)})]],
                [[Poly.from_terms(("theta_1",), {(a,): Fraction(1)})]],
                dom,
            )
            for a in range(dg.dbar2 + 1)
        ] + [T]
        self.n_v = len(self.rows_v)
        self.n_s = len(self.rows_slack)
        self.n_p = len(self.rows_p)
        self.n_m = len(self.rows_m)
        # degree-2 rows: unordered pairs of factor rows
        self.pairs = [
            (p, q) for p in range(self.n_m) for q in range(p, self.n_m)
        ]
        self.n2 = len(self.pairs)
        self.rho = self._state_scale(T)
        # typical factor magnitudes on the unit state ball: moment rows see
        # the raw state (~rho), the T row the reconstructed state (~1)
        self.fac_m = [self.rho] * (dg.dbar2 + 1) + [1.0]

    def _state_scale(self, T: PiOp) -> float:
        """Typical fundamental-state magnitude on the unit state ball.

        ||Tv|| <= sigma_max(T) ||v||, so states reaching the unit ball have
        ||v|| >= 1/sigma_max(T) (about pi^2 for Dirichlet on [0,1]).  Gram
        rows of state degree k are therefore rho^k in size; balancing them
        keeps eigenvalue margins comparable across degrees.
        """
        from .simulate import op_matrix

        grid = self.domain.grid(64)
        M = op_matrix(T, grid)
        h = grid[1] - grid[0]
        w = np.full(len(grid), h)
        w[0] = w[-1] = h / 2.0
        B = np.sqrt(w)
        sig = np.linalg.svd((B[:, None] * M) / B[None, :], compute_uv=False)
        smax = float(sig[0])
        if smax <= 0:
            return 1.0
        return max(1.0, 1.0 / smax)

    # -- kernels -------------------------------------------------------

    @staticmethod
    def _sym_pairs(n: int):
        for i in range(n):
            for j in range(i, n):
                yield i, j

    def _vec(self, *ops: PiOp) -> dict[tuple[int, ...], float]:
        return kernel_coeffs(vec_tensor_pi(tp_from_factors(*ops)))

    def _build_kernels(self) -> None:
        pie, dom = self.pie, self.domain
        T = pie.T
        Id = pi_identity(1, dom)
        free = self.v_mode == "free"

        # fixed kernels
        self.K_TT = self._vec(T, T)
        # Lie derivative of the energy part of V: 2 vec(C_k (x) T)
        self.L_fix: dict[int, dict] = {}
        for k, ck in sorted(pie.C.items()):
            acc: dict[tuple[int, ...], float] = {}
            for term in ck.terms:
                _acc_into(acc, self._vec(*term, T), 2.0)
            self.L_fix[k + 1] = acc

        # multiplier Gram pair kernels (degree-2)
        self.K_p = {
            (i, j): self._vec(self.rows_p[i], self.rows_p[j])
            for i, j in self._sym_pairs(self.n_p)
        }
        # slack Gram pair kernels (degree-2)
        self.K_s = {
            (i, j): self._vec(self.rows_slack[i], self.rows_slack[j])
            for i, j in self._sym_pairs(self.n_s)
        }
        # cross kernels: degree-1 slack rows against degree-2 pair rows
        # (degree-3 functionals, the only source of odd-degree slack terms)
        self.K_c3 = {
            (a, k): self._vec(
                self.rows_slack[a], self.rows_m[p], self.rows_m[q]
            )
            for a in range(self.n_s)
            for k, (p, q) in enumerate(self.pairs)
        }
        # Degree-4 kernels.  Pair-pair Gram entries integrate four factor
        # rows through one shared variable; they depend only on the factor
        # multiset, so the canonical kernels are cached by sorted index.
        # The multiplier-times-ball term p * ||Tv||^2 is instead a product
        # of two separate integrals (kernels K_prod4); the equality rows
        # couple the two families degree by degree.
        cache4: dict[tuple[int, ...], dict] = {}

        def _quad(p: int, q: int, p2: int, q2: int) -> dict:
            key = tuple(sorted((p, q, p2, q2)))
            if key not in cache4:
                cache4[key] = self._vec(*(self.rows_m[t] for t in key))
            return cache4[key]

        self.K_44 = {}
        for k in range(self.n2):
            p, q = self.pairs[k]
            for l in range(k, self.n2):
                p2, q2 = self.pairs[l]
                self.K_44[(k, l)] = _quad(p, q, p2, q2)
        G_TT = vec_tensor_pi(tp_from_factors(T, T))
        self.K_prod4 = {}
        for i, j in self._sym_pairs(self.n_p):
            F = vec_tensor_pi(tp_from_factors(self.rows_p[i], self.rows_p[j]))
            self.K_prod4[(i, j)] = kernel_coeffs(fpi_tensor(F, G_TT))

        # row-balancing scales: state degree k rows are typically rho^k
        deg_s = [len(next(iter(self.K_s[(a, a)]))) // 2 for a in range(self.n_s)]
        deg_p = [len(next(iter(self.K_p[(i, i)]))) // 2 for i in range(self.n_p)]
        sig_s = [self.rho**d for d in deg_s]
        sig_p = [self.rho**d for d in deg_p]
        sig_slack = sig_s + [self.fac_m[p] * self.fac_m[q] for p, q in self.pairs]
        self.sigma: dict[str, list[float]] = {
            "W2": sig_slack,
            "P1": sig_p,
            "P2": sig_p,
            "W3": sig_slack,
            "QV": [1.0] * self.n_v,
            "W1": [1.0] * self.n_v,
        }

        if free:
            # V Gram pair kernels over U T rows (degree-2)
            self.K_vt = {
                (p, q): self._vec(self.rows_vt[p], self.rows_vt[q])
                for p, q in self._sym_pairs(self.n_v)
            }
            # symmetrized P-operator pieces:  S_pq = u_p* u_q T + u_q* u_p T
            self.S_ops: dict[tuple[int, int], PiOp] = {}
            adj = [pi_adjoint(r) for r in self.rows_v]
            for p, q in self._sym_pairs(self.n_v):
                op = pi_compose(adj[p], pi_compose(self.rows_v[q], T))
                if p != q:
                    op = op + pi_compose(adj[q], pi_compose(self.rows_v[p], T))
                self.S_ops[(p, q)] = op
            # Lie-derivative kernels linear in the V Gram:
            # degree-(k+1) coefficient of Q_pq is 2 vec(C_k (x) S_pq)
            self.L_v: dict[tuple[int, int], dict[int, dict]] = {}
            for pq, S in self.S_ops.items():
                per_deg: dict[int, dict] = {}
                for k, ck in sorted(pie.C.items()):
                    acc: dict[tuple[int, ...], float] = {}
                    for term in ck.terms:
                        _acc_into(acc, self._vec(*term, S), 2.0)
                    per_deg[k + 1] = acc
                self.L_v[pq] = per_deg

    # -- assembly ------------------------------------------------------

    def _blocks_scalars(self):
        blocks = []
        if self.v_mode == "free":
            blocks.append(PsdBlock("QV", self.n_v))
            blocks.append(PsdBlock("W1", self.n_v))
        blocks.append(PsdBlock("W2", self.n_s + self.n2))
        blocks.append(PsdBlock("P1", self.n_p))
        blocks.append(PsdBlock("P2", self.n_p))
        blocks.append(PsdBlock("W3", self.n_s + self.n2))
        scalars = [ScalarVar("Csq", nonneg=True)]
        return blocks, scalars

    def problem(self, r: float, lam: float) -> SdpProblem:
        """Assemble the feasibility SDP at radius r and decay rate lam.

        The program is posed in unit-ball coordinates (state scaled by 1/r):
        every monomial row of state degree k picks up a factor r^k, which
        moves r off the multiplier Grams and onto the fixed right-hand
        sides and the nonlinear Lie-derivative columns.  This keeps all
        functional magnitudes O(1) on the constraint ball regardless of r,
        so eigenvalue margins mean the same thing at every radius.
        """
        if r <= 0:
            raise ValueError("radius must be positive")
        if lam < 0:
            raise ValueError("decay rate must be nonnegative")
        r = float(r)
        free = self.v_mode == "free"
        entries: dict[tuple, dict[tuple, float]] = {}
        rhs: dict[tuple, float] = {}

        def put(row_key, col, val):
            if val == 0.0:
                return
            entries.setdefault(row_key, {})[col] = (
                entries.get(row_key, {}).get(col, 0.0) + val
            )

        def put_kernel(cond, block, i, j, coeffs, scale):
            # columns address the row-balanced Gram entries
            scale = scale / (self.sigma[block][i] * self.sigma[block][j])
            for mono, c in coeffs.items():
                put((cond, len(mono), mono), ("B", block, i, j), scale * c)

        def put_scalar(cond, name, coeffs, scale):
            for mono, c in coeffs.items():
                put((cond, len(mono), mono), ("x", name), scale * c)

        def put_rhs(cond, coeffs, scale):
            # fixed kernels describe the unscaled state; substituting
            # v -> r*v and dividing the whole identity by r^2 leaves a
            # degree-k monomial with the factor r^(k-2)
            for mono, c in coeffs.items():
                key = (cond, len(mono), mono)
                rhs[key] = rhs.get(key, 0.0) + scale * c * r ** (len(mono) - 2)

        # condition 1:  [V - eps^2||Tv||^2]/eps^2 = W1-form
        if free:
            for (p, q), K in self.K_vt.items():
                put_kernel(1, "QV", p, q, K, 1.0)
                put_kernel(1, "W1", p, q, K, -1.0)

        # condition 2:  [C^2||Tv||^2 - V - p1 g_r]/eps^2 = W2-form
        # In unit-ball coordinates g_1 = 1 - ||Tv||^2 and p1 g_1 carries a
        # uniform r^2 absorbed into the solved multiplier Gram, so the
        # multiplier columns carry no explicit radius factor.
        put_scalar(2, "Csq", self.K_TT, 1.0)
        put_rhs(2, self.K_TT, 1.0)  # fixed energy part of -V
        if free:
            for (p, q), K in self.K_vt.items():
                put_kernel(2, "QV", p, q, K, -1.0)
        for (i, j), K in self.K_p.items():
            put_kernel(2, "P1", i, j, K, -1.0)
        for (i, j), K in self.K_prod4.items():
            put_kernel(2, "P1", i, j, K, 1.0)
        for (i, j), K in self.K_s.items():
            put_kernel(2, "W2", i, j, K, -1.0)
        for (a, k), K in self.K_c3.items():
            put_kernel(2, "W2", a, self.n_s + k, K, -1.0)
        for (k, l), K in self.K_44.items():
            put_kernel(2, "W2", self.n_s + k, self.n_s + l, K, -1.0)

        # condition 3:  [-LV - 2 lam V - p2 g_1 = W3-form] in unit-ball
        # coordinates; a degree-k Lie-derivative kernel scales by r^(k-2).
        for deg, K in self.L_fix.items():
            put_rhs(3, K, 1.0)  # fixed -LV part moved to the rhs
        put_rhs(3, self.K_TT, 2.0 * lam)  # fixed -2*lam*||Tv||^2 part
        if free:
            for pq, per_deg in self.L_v.items():
                p, q = pq
                for deg, K in per_deg.items():
                    w = -1.0 if p == q else -0.5
                    put_kernel(3, "QV", p, q, K, w * r ** (deg - 2))
                put_kernel(3, "QV", p, q, self.K_vt[pq], -2.0 * lam)
        for (i, j), K in self.K_p.items():
            put_kernel(3, "P2", i, j, K, -1.0)
        for (i, j), K in self.K_prod4.items():
            put_kernel(3, "P2", i, j, K, 1.0)
        for (i, j), K in self.K_s.items():
            put_kernel(3, "W3", i, j, K, -1.0)
        for (a, k), K in self.K_c3.items():
            put_kernel(3, "W3", a, self.n_s + k, K, -1.0)
        for (k, l), K in self.K_44.items():
            put_kernel(3, "W3", self.n_s + k, self.n_s + l, K, -1.0)

        blocks, scalars = self._blocks_scalars()
        row_keys = sorted(set(entries) | set(rhs))
        meta = {
            "r": float(r),
            "lambda": float(lam),
            "eps2": self.eps2,
            "v_mode": self.v_mode,
            "degrees": {
                "d": self.degrees.d,
                "dp": self.degrees.dp,
                "dbar": self.degrees.dbar,
                "dbar_slack": self.degrees.dbar_slack,
                "dbar2": self.degrees.dbar2,
                "dbar_p": self.degrees.p_dbar,
            },
            "basis_sizes": {
                "v": self.n_v,
                "slack": self.n_s,
                "p": self.n_p,
                "pairs": self.n2,
            },
            "state_scale": self.rho,
            "row_scales": {k: list(v) for k, v in self.sigma.items()},
        }
        return SdpProblem(blocks, scalars, row_keys, entries, rhs, meta)

    # -- certificate reconstruction -----------------------------------

    def value_kernels(self, blocks: Mapping[str, np.ndarray], r: float = 1.0):
        """Numeric kernels of V-bar and LV-bar for a solved Gram set.

        Quadratic forms are invariant under the unit-ball substitution
        (the r^2 picked up by the rows cancels against the r^-2 of the
        normalized identity), so the solved Lyapunov Gram acts on the
        unscaled state directly.
        """
        v2: dict[tuple[int, ...], float] = dict(self.K_TT)
        lv: dict[int, dict[tuple[int, ...], float]] = {
            deg: dict(K) for deg, K in self.L_fix.items()
        }
        if self.v_mode == "free" and "QV" in blocks:
            Q = np.asarray(blocks["QV"], dtype=float)
            for (p, q), K in self.K_vt.items():
                w = Q[p, q] if p == q else 2.0 * Q[p, q]
                _acc_into(v2, K, w)
            for (p, q), per_deg in self.L_v.items():
                w = Q[p, q] if p == q else Q[p, q]  # S_pq already symmetrized
                for deg, K in per_deg.items():
                    _acc_into(lv.setdefault(deg, {}), K, w)
        return v2, lv


def _acc_into(acc: dict, coeffs: Mapping, scale: float) -> None:
    for mono, c in coeffs.items():
        acc[mono] = acc.get(mono, 0.0) + scale * c


def assemble_theorem1(
    pie: PieModel,
    r: float,
    lam: float,
    eps2: float = 1e-4,
    degrees: Degrees | None = None,
    v_mode: str = "free",
) -> SdpProblem:
    """One-shot assembly of the stability feasibility SDP."""
    return Theorem1Program(pie, eps2=eps2, degrees=degrees, v_mode=v_mode).problem(
        r, lam
    )


# ----------------------------------------------------------------------
# solving and certificates
# ----------------------------------------------------------------------


@dataclass
class StabilityCertificate:
    r: float
    lam: float
    eps: float
    C: float
    M: float
    status: str  # "feasible" | "infeasible" | "numerical-failure"
    residuals: dict = field(default_factory=dict)
    gram_blocks: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def report(self) -> dict:
        return {
            "r": self.r,
            "lambda": self.lam,
            "eps": self.eps,
            "C": self.C,
            "M": self.M,
            "status": self.status,
            "residuals": self.residuals,
            "timings": self.meta.get("timings", {}),
        }


def solve(problem: SdpProblem, backend=None) -> StabilityCertificate:
    """Solve the feasibility program and package a certificate."""
    from .solvers import get_backend

    if backend is None:
        backend = get_backend("internal")
    elif isinstance(backend, str):
        backend = get_backend(backend)
    t0 = time.time()
    raw = backend.solve_sdp(problem)
    wall = time.time() - t0
    eps2 = float(problem.meta.get("eps2", 1e-4))
    eps = math.sqrt(eps2)
    # undo the row balancing so the stored Grams act on raw functionals
    scales = problem.meta.get("row_scales", {})
    gram_blocks = {}
    for name, X in raw.block_values.items():
        s = np.asarray(scales.get(name, [1.0] * len(X)), dtype=float)
        gram_blocks[name] = np.asarray(X) / np.outer(s, s)
    C = float("nan")
    M = float("nan")
    if raw.scalar_values and "Csq" in raw.scalar_values:
        # the decision scalar is normalized by eps^2; the unit-ball radius
        # scaling cancels for quadratic forms, so no r factor remains
        csq = max(raw.scalar_values["Csq"], 0.0) * eps2
        C = math.sqrt(csq)
        M = C / eps
    cert = StabilityCertificate(
        r=float(problem.meta.get("r", float("nan"))),
        lam=float(problem.meta.get("lambda", float("nan"))),
        eps=eps,
        C=C,
        M=M,
        status=raw.status,
        residuals={
            "equality": raw.eq_residual,
            "min_eigenvalue": raw.margin,
            "per_block_min_eig": raw.min_eigs,
        },
        gram_blocks=gram_blocks,
        meta={
            "solver": raw.solver_name,
            "solver_status": raw.solver_status,
            "timings": {"solve_seconds": wall, "solver_seconds": raw.solve_time},
            "problem": dict(problem.meta),
            "matrix_hash": problem.matrix_hash(),
        },
    )
    return cert


def _random_states(domain: Domain, n: int, rng: np.random.Generator, grid_n=96):
    grid = domain.grid(grid_n)
    a, b = float(domain.a), float(domain.b)
    span = b - a
    xs = (grid - a) / span
    out = []
    for _ in range(n):
        coefs = rng.normal(size=5)
        vals = sum(
            c * np.sin((k + 1) * np.pi * xs) for k, c in enumerate(coefs)
        ) + rng.normal() * xs * (1 - xs)
        out.append(SampledFunction(grid, vals))
    return out


def verify_certificate(
    cert: StabilityCertificate,
    program: Theorem1Program,
    n_samples: int = 100,
    seed: int = 0,
    nodes: int = 16,
) -> dict:
    """Spot-check the certified inequalities on random states inside the ball.

    Checks, for each sampled v with ||Tv|| <= r:
      eps^2 ||Tv||^2 - 1e-6 <= V(v) <= C^2 ||Tv||^2 + 1e-6   and
      LV(v) <= -2 lam V(v) + 1e-5.
    """
    if not cert.feasible:
        raise ValueError("can only verify a feasible certificate")
    from .pi_ops import pi_apply

    rng = np.random.default_rng(seed)
    eps2 = cert.eps**2
    v2, lv = program.value_kernels(cert.gram_blocks, r=cert.r)
    dom = program.domain
    T = program.pie.T
    worst = {"lower": np.inf, "upper": np.inf, "decay": np.inf}
    for v in _random_states(dom, n_samples, rng):
        Tv = pi_apply(T, v)
        tnorm = Tv.l2_norm()
        if tnorm <= 1e-12:
            continue
        scale = cert.r * rng.uniform(0.2, 0.999) / tnorm
        v = SampledFunction(v.grid, scale * v.values)
        Tv = SampledFunction(Tv.grid, scale * Tv.values)
        t2 = Tv.l2_norm() ** 2
        vbar = _eval_kernel_dict(v2, 2, v, dom, nodes)
        lvbar = sum(
            _eval_kernel_dict(K, deg, v, dom, nodes) for deg, K in lv.items()
        )
        V = eps2 * vbar
        LV = eps2 * lvbar
        worst["lower"] = min(worst["lower"], V - eps2 * t2)
        worst["upper"] = min(worst["upper"], cert.C**2 * t2 - V)
        worst["decay"] = min(worst["decay"], -LV - 2.0 * cert.lam * V)
    ok = (
        worst["lower"] >= -1e-6
        and worst["upper"] >= -1e-6
        and worst["decay"] >= -1e-5
    )
    return {"ok": bool(ok), "worst_margins": worst, "n_samples": n_samples}


# ----------------------------------------------------------------------
# bisection
# ----------------------------------------------------------------------


def bisect(
    pie: PieModel,
    mode: str,
    fixed: float,
    tol: float = 0.01,
    budget: int = 40,
    eps2: float = 1e-4,
    degrees: Degrees | None = None,
    v_mode: str = "free",
    backend=None,
    lo: float | None = None,
    hi: float | None = None,
    progress=None,
) -> StabilityCertificate:
    """Largest feasible decay rate (mode='rate', fixed=r) or radius
    (mode='radius', fixed=lam), by monotone bisection.

    The returned certificate is the last feasible solve; its ``meta``
    records the bracket and every probed point.
    """
    if mode not in ("rate", "radius"):
        raise ValueError("mode must be 'rate' or 'radius'")
    prog = Theorem1Program(pie, eps2=eps2, degrees=degrees, v_mode=v_mode)

    def attempt(val: float) -> StabilityCertificate:
        if mode == "rate":
            p = prog.problem(fixed, val)
        else:
            p = prog.problem(val, fixed)
        cert = solve(p, backend)
        if progress is not None:
            progress(mode, val, cert.status)
        return cert

    history: list[tuple[float, str]] = []
    solves = 0

    def probe(val):
        nonlocal solves
        solves += 1
        cert = attempt(val)
        history.append((val, cert.status))
        return cert

    lo = 0.0 if lo is None else lo
    if mode == "rate" and lo == 0.0:
        lo_val = 0.0
        best = probe(lo_val)
    else:
        lo_val = lo if lo > 0 else (tol if mode == "radius" else lo)
        best = probe(lo_val)
    if not best.feasible:
        raise ValueError(
            f"no feasible point at the lower end of the bracket "
            f"({mode}={lo_val}, status={best.status})"
        )
    # expand upward until infeasible
    hi_val = hi if hi is not None else max(2.0 * lo_val, 1.0)
    while solves < budget:
        cert = probe(hi_val)
        if cert.feasible:
            best, lo_val = cert, hi_val
            hi_val *= 2.0
        else:
            break
    else:
        raise ValueError("bisection budget exhausted while bracketing")
    if cert.feasible:
        raise ValueError("no infeasible upper end found within the bracket")
    # bisect
    while hi_val - lo_val > tol and solves < budget:
        mid = 0.5 * (lo_val + hi_val)
        cert = probe(mid)
        if cert.feasible:
            best, lo_val = cert, mid
        else:
            hi_val = mid
    best.meta["bisection"] = {
        "mode": mode,
        "fixed": fixed,
        "value": lo_val,
        "bracket": [lo_val, hi_val],
        "tol": tol,
        "n_solves": solves,
        "history": history,
        "assembly_seconds": prog.assembly_seconds,
    }
    if mode == "rate":
        best.lam = lo_val
    else:
        best.r = lo_val
    return best

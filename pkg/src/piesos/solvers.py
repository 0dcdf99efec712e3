"""Solver backends for the stability feasibility programs.

The internal backend wraps Clarabel.  Feasibility programs over PSD cones
routinely have empty interior here (the certified functionals sit on the
boundary of representability), so instead of solving the raw feasibility
problem the backend maximizes a uniform eigenvalue margin t with
X_b - t I >= 0 for every Gram block: the optimum t* is the best achievable
minimum eigenvalue over the equality-constrained affine set.  A solve is
judged feasible when the equalities are met and t* clears a (configurable)
threshold; infeasible instances show t* dropping by orders of magnitude,
so the threshold separates cleanly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse

from .sos import SdpProblem

__all__ = [
    "RawSolution",
    "ClarabelBackend",
    "get_backend",
]


@dataclass
class RawSolution:
    status: str  # "feasible" | "infeasible" | "numerical-failure"
    solver_status: str
    block_values: dict = field(default_factory=dict)
    scalar_values: dict = field(default_factory=dict)
    eq_residual: float = float("nan")
    min_eigs: dict = field(default_factory=dict)
    margin: float = float("nan")
    solve_time: float = float("nan")
    solver_name: str = ""


def _svec_index(i: int, j: int) -> int:
    """Column-major upper-triangle position of entry (i <= j)."""
    return j * (j + 1) // 2 + i


def _independent_rows(A_eq: sparse.csc_matrix, b_eq: np.ndarray) -> np.ndarray:
    """Indices of a maximal independent subset of equality rows.

    The monomial-matching rows are heavily redundant (shared Gram blocks
    mean many coefficient rows repeat linear combinations of others) and
    interior-point factorizations fail on rank-deficient equality systems.
    Pivoted QR on the augmented transpose [A | b]^T picks rows spanning the
    full augmented row space, so an inconsistent system stays inconsistent
    after reduction.

    To keep this cheap on wide systems the rows are first compressed by a
    fixed-seed Gaussian sketch: dependent rows stay dependent under any
    linear map, and an independent set survives a generic sketch of width
    comfortably above the rank, so the selected subset is exact.  If the
    detected rank comes close to the sketch width the sketch is widened
    (finally falling back to the exact dense factorization).
    """
    m = A_eq.shape[0]
    if m == 0:
        return np.arange(0)
    aug = sparse.hstack([A_eq, sparse.csc_matrix(b_eq[:, None])]).tocsr()
    n = aug.shape[1]
    rng = np.random.default_rng(0x51EB851)
    k = min(m, n, 1536)
    while True:
        if k >= min(m, n):
            sketch = aug.toarray()
        else:
            sketch = aug @ rng.standard_normal((n, k))
        _, R, piv = linalg.qr(sketch.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        if diag.size == 0 or diag[0] == 0.0:
            return np.arange(0)
        rank = int((diag > 1e-10 * diag[0]).sum())
        if k >= min(m, n) or rank < 0.9 * k:
            return np.sort(piv[:rank])
        k = min(m, n, 4 * k)


def _mat_from_svec(x: np.ndarray, dim: int) -> np.ndarray:
    M = np.zeros((dim, dim))
    rt2 = np.sqrt(2.0)
    k = 0
    for j in range(dim):
        for i in range(j + 1):
            if i == j:
                M[i, j] = x[k]
            else:
                M[i, j] = M[j, i] = x[k] / rt2
            k += 1
    return M


class ClarabelBackend:
    """Interior-point solve via Clarabel with the eigenvalue-margin trick."""

    def __init__(
        self,
        eig_tol: float = 1e-2,
        res_tol: float = 1e-6,
        margin_cap: float = 1.0,
        max_iter: int = 200,
        verbose: bool = False,
        equilibrate: bool = False,
    ):
        self.eig_tol = eig_tol
        self.res_tol = res_tol
        self.margin_cap = margin_cap
        self.max_iter = max_iter
        self.verbose = verbose
        # The assembly already balances rows by state degree; Clarabel's
        # generic Ruiz equilibration interacts badly with the degree-4
        # coupling rows (KKT factorization stalls at the first step), so
        # it stays off unless explicitly requested.
        self.equilibrate = equilibrate

    def solve_sdp(self, problem: SdpProblem) -> RawSolution:
        import clarabel

        rt2 = np.sqrt(2.0)
        # column layout: svec coordinates per block, then scalars, then margin t
        offsets = {}
        off = 0
        for b in problem.blocks:
            offsets[b.name] = off
            off += b.dim * (b.dim + 1) // 2
        scalar_off = off
        off += len(problem.scalars)
        t_col = off
        nv = off + 1

        dims = {b.name: b.dim for b in problem.blocks}
        row_index = {key: i for i, key in enumerate(problem.row_keys)}
        m_eq = len(problem.row_keys)
        re_, ce_, ve_ = [], [], []
        for key, row in problem.entries.items():
            ri = row_index[key]
            for col, val in row.items():
                if col[0] == "B":
                    _, name, i, j = col
                    base = offsets[name]
                    if i > j:
                        i, j = j, i
                    cidx = base + _svec_index(i, j)
                    coeff = val if i == j else rt2 * val
                else:
                    cidx = scalar_off + problem.scalar_index(col[1])
                    coeff = val
                re_.append(ri)
                ce_.append(cidx)
                ve_.append(coeff)
        A_eq = sparse.csc_matrix((ve_, (re_, ce_)), shape=(m_eq, nv))
        b_eq = np.zeros(m_eq)
        for key, val in problem.rhs.items():
            b_eq[row_index[key]] = val

        keep = _independent_rows(A_eq, b_eq)
        A_red = A_eq[keep].tocsc()
        b_red = b_eq[keep]

        cones = [clarabel.ZeroConeT(len(keep))]
        A_parts = [A_red]
        b_parts = [b_red]

        # margin cap: t <= cap
        cap_row = sparse.csc_matrix(([1.0], ([0], [t_col])), shape=(1, nv))
        A_parts.append(cap_row)
        b_parts.append(np.array([self.margin_cap]))
        cones.append(clarabel.NonnegativeConeT(1))

        # nonnegative scalars: -x_s + s = 0, s >= 0
        nn = [i for i, s in enumerate(problem.scalars) if s.nonneg]
        if nn:
            rows = list(range(len(nn)))
            cols = [scalar_off + i for i in nn]
            A_parts.append(
                sparse.csc_matrix(
                    ([-1.0] * len(nn), (rows, cols)), shape=(len(nn), nv)
                )
            )
            b_parts.append(np.zeros(len(nn)))
            cones.append(clarabel.NonnegativeConeT(len(nn)))

        # PSD blocks with shared margin:  s = svec(X_b) - t svec(I) in cone
        for b in problem.blocks:
            nsv = b.dim * (b.dim + 1) // 2
            base = offsets[b.name]
            rows = list(range(nsv)) + [
                _svec_index(j, j) for j in range(b.dim)
            ]
            cols = [base + k for k in range(nsv)] + [t_col] * b.dim
            vals = [-1.0] * nsv + [1.0] * b.dim
            A_parts.append(sparse.csc_matrix((vals, (rows, cols)), shape=(nsv, nv)))
            b_parts.append(np.zeros(nsv))
            cones.append(clarabel.PSDTriangleConeT(b.dim))

        A = sparse.vstack(A_parts, format="csc")
        bvec = np.concatenate(b_parts)
        q = np.zeros(nv)
        q[t_col] = -1.0  # maximize the margin
        settings = clarabel.DefaultSettings()
        settings.verbose = self.verbose
        settings.max_iter = self.max_iter
        settings.equilibrate_enable = self.equilibrate
        t0 = time.time()
        solver = clarabel.DefaultSolver(
            sparse.csc_matrix((nv, nv)), q, A, bvec, cones, settings
        )
        sol = solver.solve()
        wall = time.time() - t0
        solver_status = str(sol.status)

        raw = RawSolution(
            status="numerical-failure",
            solver_status=solver_status,
            solver_name="clarabel",
            solve_time=wall,
        )
        if solver_status in ("PrimalInfeasible", "DualInfeasible"):
            raw.status = "infeasible"
            return raw
        if solver_status not in ("Solved", "AlmostSolved"):
            return raw
        x = np.asarray(sol.x)
        margin = float(x[t_col])
        blocks = {}
        eigs = {}
        for b in problem.blocks:
            base = offsets[b.name]
            nsv = b.dim * (b.dim + 1) // 2
            M = _mat_from_svec(x[base : base + nsv], b.dim)
            blocks[b.name] = M
            eigs[b.name] = float(np.linalg.eigvalsh(M)[0]) if b.dim else 0.0
        scalars = {
            s.name: float(x[scalar_off + i])
            for i, s in enumerate(problem.scalars)
        }
        res = float(np.max(np.abs(A_eq @ x - b_eq))) if m_eq else 0.0
        raw.block_values = blocks
        raw.scalar_values = scalars
        raw.eq_residual = res
        raw.min_eigs = eigs
        raw.margin = margin
        ok_status = solver_status in ("Solved", "AlmostSolved")
        if ok_status and res <= self.res_tol and margin >= -self.eig_tol:
            raw.status = "feasible"
        elif ok_status and margin < -self.eig_tol:
            raw.status = "infeasible"
        else:
            raw.status = "numerical-failure"
        return raw


_BACKENDS = {}


def get_backend(name: str):
    """Look up a registered solver backend by name."""
    if name == "internal":
        return ClarabelBackend()
    if name == "sdpa-file":
        from .sdpa import SdpaFileBackend

        return SdpaFileBackend()
    if name in _BACKENDS:
        return _BACKENDS[name]
    raise ValueError(f"unknown solver backend: {name}")


def register_backend(name: str, backend) -> None:
    _BACKENDS[name] = backend

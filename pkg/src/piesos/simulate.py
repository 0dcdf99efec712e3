"""Direct simulation of PDE models and their PIE forms.

The PDE side runs method-of-lines: second-order finite differences in
space (Fornberg weights on clipped stencils), boundary conditions enforced
by slaving a set of pivot grid values to the remaining free values, and
adaptive embedded Runge-Kutta in time.  The PIE side discretizes every PI
operator to a quadrature matrix on the same grid and integrates
T vdot = sum_k C_k v^(x)k by least-squares solves against the discretized
T (whose rows at boundary-pinned points vanish, so a pseudo-inverse is the
correct resolution; its conditioning is reported).

Cross-validating the two trajectories — norms agreeing to discretization
accuracy — is the end-to-end check that PDE -> PIE conversion preserved
the dynamics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.linalg import qr

from .pi_ops import Domain, PiOp, SampledFunction
from .compile import PdeModel, PieModel

__all__ = [
    "SimConfig",
    "Trajectory",
    "op_matrix",
    "simulate_pde",
    "simulate_pie",
    "check_decay_bound",
    "fit_initial_rate",
    "trajectory_to_csv",
]


@dataclass(frozen=True)
class SimConfig:
    """Discretization and integration controls."""

    n_intervals: int = 256
    t_final: float = 1.0
    n_save: int = 201
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "RK45"
    blowup_factor: float = 1e3
    keep_states: bool = False
    check_bc: bool = True

    def __post_init__(self):
        if self.n_intervals < 32:
            raise ValueError("grid must have at least 32 intervals")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class Trajectory:
    """Time series of a simulation run."""

    t: np.ndarray
    norms: np.ndarray
    grid: np.ndarray
    status: str  # "completed" | "blowup" | "failed"
    states: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def blew_up(self) -> bool:
        return self.status == "blowup"

    def final_norm(self) -> float:
        return float(self.norms[-1])


# ----------------------------------------------------------------------
# finite differences
# ----------------------------------------------------------------------


def _fd_weights(x0: float, xs: np.ndarray, k: int) -> np.ndarray:
    """Fornberg weights for the k-th derivative at x0 from nodes xs."""
    n = len(xs)
    if k >= n:
        raise ValueError("stencil too small for derivative order")
    c = np.zeros((n, k + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, n):
        mn = min(i, k)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for v in range(mn, 0, -1):
                    c[i, v] = c1 * (v * c[i - 1, v - 1] - c5 * c[i - 1, v]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for v in range(mn, 0, -1):
                c[j, v] = (c4 * c[j, v] - v * c[j, v - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, k]


def _derivative_matrix(grid: np.ndarray, k: int) -> np.ndarray:
    """Dense k-th derivative matrix, second-order stencils clipped at edges."""
    npts = len(grid)
    if k == 0:
        return np.eye(npts)
    width = k + 3 if (k % 2) else k + 3  # >= second-order everywhere
    width = min(width, npts)
    D = np.zeros((npts, npts))
    for i in range(npts):
        start = min(max(i - width // 2, 0), npts - width)
        idx = np.arange(start, start + width)
        D[i, idx] = _fd_weights(grid[i], grid[idx], k)
    return D


def _boundary_reduction(pde: PdeModel, grid: np.ndarray):
    """Constraint matrix, pivot selection, and embedding for the BCs.

    Returns (free_idx, embed) with embed mapping free values to the full
    grid vector consistent with B [boundary derivative stack] = 0.
    """
    n = pde.order
    npts = len(grid)
    mats = [_derivative_matrix(grid, j) for j in range(n)]
    B = np.array([[float(x) for x in row] for row in pde.bc.B])
    Cb = np.zeros((n, npts))
    for j in range(n):
        Cb += np.outer(B[:, j], mats[j][0, :]) + np.outer(B[:, n + j], mats[j][-1, :])
    # pivot among near-boundary columns only
    halo = min(npts, 2 * n + 4)
    cands = np.concatenate([np.arange(halo // 2), np.arange(npts - halo // 2, npts)])
    cands = np.unique(cands)
    _, R, piv = qr(Cb[:, cands], pivoting=True)
    if abs(R[n - 1, n - 1]) < 1e-9 * max(1.0, abs(R[0, 0])):
        raise ValueError("boundary conditions are numerically degenerate on the grid")
    piv_idx = np.sort(cands[piv[:n]])
    free_idx = np.array([i for i in range(npts) if i not in set(piv_idx)])
    G = -np.linalg.solve(Cb[:, piv_idx], Cb[:, free_idx])

    def embed(u_free: np.ndarray) -> np.ndarray:
        full = np.zeros(u_free.shape[:-1] + (npts,))
        full[..., free_idx] = u_free
        full[..., piv_idx] = u_free @ G.T
        return full

    return free_idx, embed, Cb


def _as_values(u0, grid: np.ndarray) -> np.ndarray:
    if isinstance(u0, SampledFunction):
        return np.asarray(u0(grid), dtype=float)
    if callable(u0):
        return np.asarray(u0(grid), dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != grid.shape:
        raise ValueError("initial data shape does not match the grid")
    return u0


def _l2(grid: np.ndarray, vals: np.ndarray) -> float:
    return float(np.sqrt(simpson(vals**2, x=grid)))


def _run_ode(rhs, y0, cfg: SimConfig, norm_of, t0=0.0):
    """solve_ivp wrapper with blow-up event and failure reporting."""
    norm0 = max(norm_of(y0), 1e-300)
    limit = cfg.blowup_factor * norm0

    def blowup_event(t, y):
        return limit - norm_of(y)

    blowup_event.terminal = True
    blowup_event.direction = -1

    t_eval = np.linspace(t0, cfg.t_final, cfg.n_save)
    sol = solve_ivp(
        rhs,
        (t0, cfg.t_final),
        y0,
        method=cfg.method,
        t_eval=t_eval,
        rtol=cfg.rtol,
        atol=cfg.atol,
        events=[blowup_event],
        dense_output=False,
    )
    if sol.status == 1:  # terminated by the blow-up event
        status = "blowup"
    elif sol.status == 0:
        status = "completed"
    else:
        status = "failed"
    ts = sol.t
    ys = sol.y.T
    if status == "blowup" and len(sol.t_events[0]):
        # include the escape sample itself, not just the last regular save
        ts = np.append(ts, sol.t_events[0][-1])
        ys = np.vstack([ys, sol.y_events[0][-1]])
    return ts, ys, status, sol.message, int(sol.nfev)


def simulate_pde(pde: PdeModel, u0, cfg: SimConfig | None = None) -> Trajectory:
    """Method-of-lines integration of the PDE itself.

    The initial condition must satisfy the boundary conditions; the
    discrete residual is checked up to quadrature accuracy (disable with
    ``cfg.check_bc=False`` for deliberately inconsistent experiments).
    """
    cfg = cfg or SimConfig()
    grid = pde.domain.grid(cfg.n_intervals)
    free_idx, embed, Cb = _boundary_reduction(pde, grid)
    mats = [_derivative_matrix(grid, j) for j in range(pde.order + 1)]
    coefs = [
        np.broadcast_to(
            np.asarray(t.coef.eval_float({"s": grid}), dtype=float), grid.shape
        )
        for t in pde.terms
    ]

    def rhs_full(full: np.ndarray) -> np.ndarray:
        ders = [m @ full for m in mats]
        out = np.zeros_like(full)
        for c, term in zip(coefs, pde.terms):
            piece = c.copy()
            for j, mult in enumerate(term.exponents):
                if mult:
                    piece = piece * ders[j] ** mult
            out += piece
        return out

    def rhs(t, y):
        return rhs_full(embed(y))[free_idx]

    u_init = _as_values(u0, grid)
    if cfg.check_bc:
        scale = 1.0 + float(np.max(np.abs(u_init)))
        h = float(np.max(np.diff(grid)))
        resid = float(np.max(np.abs(Cb @ u_init)))
        if resid > scale * max(1e-8, 10.0 * h * h):
            raise ValueError(
                "initial condition violates the boundary conditions "
                f"(discrete residual {resid:.3e})"
            )
    y0 = u_init[free_idx]

    def norm_of(y):
        return _l2(grid, embed(y))

    ts, ys, status, message, nfev = _run_ode(rhs, y0, cfg, norm_of)
    states = embed(ys)
    norms = np.array([_l2(grid, u) for u in states])
    info = {"solver_message": message, "n_rhs_evals": nfev}
    if status == "failed" and len(norms) and norms[-1] > 10.0 * max(norms[0], 1e-300):
        info["blowup_candidate"] = True
    return Trajectory(
        t=ts,
        norms=norms,
        grid=grid,
        status=status,
        states=states if cfg.keep_states else None,
        info=info,
    )


# ----------------------------------------------------------------------
# PIE side
# ----------------------------------------------------------------------


def op_matrix(op: PiOp, grid: np.ndarray) -> np.ndarray:
    """Quadrature matrix of a scalar PI operator on a grid.

    Composite trapezoid split exactly at theta = s (both kernels are
    smooth on their own side), plus the diagonal multiplier part.
    """
    if op.rows != 1 or op.cols != 1:
        raise ValueError("expected a scalar operator")
    npts = len(grid)
    M = np.zeros((npts, npts))
    r0, r1, r2 = op.scalar_params()
    ss = grid[:, None]
    tt = grid[None, :]
    if not r1.is_zero():
        K1 = np.broadcast_to(
            np.asarray(r1.eval_float({"s": ss, "theta_1": tt}), dtype=float),
            (npts, npts),
        )
        for i in range(1, npts):
            w = _trap_weights(grid[: i + 1])
            M[i, : i + 1] += w * K1[i, : i + 1]
    if not r2.is_zero():
        K2 = np.broadcast_to(
            np.asarray(r2.eval_float({"s": ss, "theta_1": tt}), dtype=float),
            (npts, npts),
        )
        for i in range(npts - 1):
            w = _trap_weights(grid[i:])
            M[i, i:] += w * K2[i, i:]
    if not r0.is_zero():
        M[np.arange(npts), np.arange(npts)] += np.broadcast_to(
            np.asarray(r0.eval_float({"s": grid}), dtype=float), grid.shape
        )
    return M


def _trap_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def simulate_pie(pie: PieModel, v0, cfg: SimConfig | None = None) -> Trajectory:
    """Integrate T vdot = sum_k C_k v^(x)k on a quadrature grid.

    The reported norm is |T v(t)| (the reconstructed state norm).  The
    discretized T has vanishing rows wherever boundary conditions pin the
    state, so the time derivative is recovered by pseudo-inverse; the
    ratio of retained singular values is reported as ``t_matrix_cond``.
    """
    cfg = cfg or SimConfig()
    grid = pie.domain.grid(cfg.n_intervals)
    TM = op_matrix(pie.T, grid)
    u_svd, sing, vt_svd = np.linalg.svd(TM)
    keep = sing > 1e-12 * sing[0]
    pinv = (vt_svd[keep].T / sing[keep]) @ u_svd[:, keep].T
    cond = float(sing[0] / sing[keep][-1])

    term_mats: list[tuple[int, list[np.ndarray]]] = []
    for k, ck in pie.C.items():
        for term in ck.terms:
            term_mats.append((k, [op_matrix(f, grid) for f in term]))

    def rhs(t, v):
        acc = np.zeros_like(v)
        for _, mats in term_mats:
            piece = np.ones_like(v)
            for m in mats:
                piece = piece * (m @ v)
            acc += piece
        return pinv @ acc

    v_init = _as_values(v0, grid)

    def norm_of(v):
        return _l2(grid, TM @ v)

    ts, vs, status, message, nfev = _run_ode(rhs, v_init, cfg, norm_of)
    norms = np.array([_l2(grid, TM @ v) for v in vs])
    states = np.array([TM @ v for v in vs])
    info = {
        "solver_message": message,
        "n_rhs_evals": nfev,
        "t_matrix_cond": cond,
    }
    if status == "failed" and len(norms) and norms[-1] > 10.0 * max(norms[0], 1e-300):
        info["blowup_candidate"] = True
    return Trajectory(
        t=ts,
        norms=norms,
        grid=grid,
        status=status,
        states=states if cfg.keep_states else None,
        info=info,
    )


# ----------------------------------------------------------------------
# reports
# ----------------------------------------------------------------------


def check_decay_bound(traj: Trajectory, M: float, lam: float) -> dict:
    """Margin of |u(t)| <= M exp(-lam t) |u(0)| along the trajectory."""
    norm0 = traj.norms[0]
    bound = M * np.exp(-lam * traj.t) * norm0
    excess = (traj.norms - bound) / max(norm0, 1e-300)
    i = int(np.argmax(excess))
    return {
        "max_violation": float(excess[i]),
        "at_time": float(traj.t[i]),
        "satisfied": bool(excess[i] <= 1e-6),
        "M": float(M),
        "lambda": float(lam),
    }


def fit_initial_rate(traj: Trajectory, window: float = 0.1) -> float:
    """Exponential decay rate over the initial window by log-linear fit."""
    mask = (traj.t <= window) & (traj.norms > 0)
    if mask.sum() < 3:
        raise ValueError("not enough samples in the fit window")
    slope, _ = np.polyfit(traj.t[mask], np.log(traj.norms[mask]), 1)
    return float(-slope)


def trajectory_to_csv(traj: Trajectory, path: str, include_states: bool = False) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        if include_states and traj.states is not None:
            writer.writerow(["t", "norm"] + [f"u@{x:.6g}" for x in traj.grid])
            for t, nv, row in zip(traj.t, traj.norms, traj.states):
                writer.writerow([f"{t:.12g}", f"{nv:.12g}"] + [f"{x:.12g}" for x in row])
        else:
            writer.writerow(["t", "norm"])
            for t, nv in zip(traj.t, traj.norms):
                writer.writerow([f"{t:.12g}", f"{nv:.12g}"])

"""Tests for the method-of-lines PDE simulator and its PIE counterpart.

Tags: [DERIVED] = checked against an independently computed oracle
      (closed-form heat decay, exact symbolic integrals, convergence order);
      [TRIVIAL] = structural/validation behavior.
"""

import io
import math

import numpy as np
import pytest

from piesos.compile import (
    PdeModel,
    PdeTerm,
    compile_pde,
    example_burgers_reaction,
    example_fisher,
)
from piesos.pi_ops import BcSpec, Domain, SampledFunction
from piesos.polyring import Poly
from piesos.simulate import (
    SimConfig,
    check_decay_bound,
    fit_initial_rate,
    op_matrix,
    simulate_pde,
    simulate_pie,
    trajectory_to_csv,
)

S = Poly.var("s")


def heat_model() -> PdeModel:
    """u_t = u_ss with Dirichlet ends on [0, 1]."""
    return PdeModel(Domain(0, 1), 2, [PdeTerm(1, (0, 0, 1))], BcSpec.dirichlet())


def sine(r: float = 1.0):
    """Radius-r multiple of the first Dirichlet eigenfunction (unit L2 norm x r)."""
    return lambda s: r * math.sqrt(2.0) * np.sin(np.pi * s)


def neg_sine(r: float):
    """Same norm r, opposite sign: the direction the quadratic term feeds."""
    return lambda s: -r * math.sqrt(2.0) * np.sin(np.pi * s)


# ----------------------------------------------------------------------
# PDE side
# ----------------------------------------------------------------------


def test_heat_decay_matches_eigenvalue():
    """[DERIVED] sin(pi s) decays like exp(-pi^2 t): norm ratio at t=0.1 within 1%."""
    cfg = SimConfig(n_intervals=128, t_final=0.1, n_save=11)
    traj = simulate_pde(heat_model(), sine(), cfg)
    assert traj.status == "completed"
    ratio = traj.final_norm() / traj.norms[0]
    exact = math.exp(-math.pi**2 * 0.1)
    assert abs(ratio - exact) / exact < 0.01


def test_heat_energy_identity():
    """[DERIVED] d/dt ||u||^2 = -2 ||u_s||^2 along the heat flow (quadrature accuracy)."""
    cfg = SimConfig(n_intervals=128, t_final=0.05, n_save=51, keep_states=True)
    traj = simulate_pde(heat_model(), sine(), cfg)
    grid, dt = traj.grid, traj.t[1] - traj.t[0]
    i = len(traj.t) // 2
    lhs = (traj.norms[i + 1] ** 2 - traj.norms[i - 1] ** 2) / (2 * dt)
    us = np.gradient(traj.states[i], grid)
    from scipy.integrate import simpson

    rhs = -2.0 * simpson(us**2, x=grid)
    assert abs(lhs - rhs) / abs(rhs) < 2e-2


def test_heat_grid_convergence_second_order():
    """[DERIVED] terminal norm converges at second order: halving h quarters the change."""
    cfg = lambda n: SimConfig(n_intervals=n, t_final=0.1, n_save=3)
    finals = [simulate_pde(heat_model(), sine(), cfg(n)).final_norm() for n in (32, 64, 128)]
    change_coarse = abs(finals[1] - finals[0])
    change_fine = abs(finals[2] - finals[1])
    assert change_fine < 0.5 * change_coarse  # second order gives ~0.25


def test_fisher_small_radius_log_slope():
    """[DERIVED] r=1 trajectories decay with initial log-slope <= -3.65 (both signs)."""
    cfg = SimConfig(n_intervals=96, t_final=0.1, n_save=41)
    for u0 in (sine(1.0), neg_sine(1.0)):
        traj = simulate_pde(example_fisher(), u0, cfg)
        assert traj.status == "completed"
        rate = fit_initial_rate(traj, window=0.1)
        assert rate >= 3.65


def test_fisher_large_negative_data_blows_up():
    """[DERIVED] r=4.2 in the escaping direction is flagged as blow-up, not an exception."""
    cfg = SimConfig(n_intervals=64, t_final=2.0, n_save=81, rtol=1e-7, atol=1e-9)
    traj = simulate_pde(example_fisher(), neg_sine(4.2), cfg)
    assert traj.status == "blowup"
    assert traj.blew_up
    assert traj.norms[-1] > 100.0 * traj.norms[0]


def test_fisher_positive_large_data_decays():
    """[DERIVED] the positive-sine direction stays in the basin even at r=4.2."""
    cfg = SimConfig(n_intervals=64, t_final=3.0, n_save=31, rtol=1e-7, atol=1e-9)
    traj = simulate_pde(example_fisher(), sine(4.2), cfg)
    assert traj.status == "completed"
    assert traj.final_norm() < 1e-3 * traj.norms[0]


def test_bc_violating_initial_condition_rejected():
    """[TRIVIAL] cos(pi s) violates Dirichlet ends and is refused up front."""
    with pytest.raises(ValueError, match="boundary"):
        simulate_pde(heat_model(), lambda s: np.cos(np.pi * s), SimConfig(t_final=0.01))


def test_simconfig_validation():
    """[TRIVIAL] undersized grids and nonpositive tolerances are rejected."""
    with pytest.raises(ValueError):
        SimConfig(n_intervals=16)
    with pytest.raises(ValueError):
        SimConfig(rtol=0.0)


# ----------------------------------------------------------------------
# PI operator discretization
# ----------------------------------------------------------------------


def test_op_matrix_against_exact_integral():
    """[DERIVED] discretized T applied to polynomials matches symbolic integration."""
    from piesos.pi_ops import build_T

    T = build_T(BcSpec.dirichlet(), Domain(0, 1))
    t1, t2 = T.R1[0][0], T.R2[0][0]
    grid = Domain(0, 1).grid(128)
    M = op_matrix(T, grid)
    for v_poly in (Poly.one(), S, S * S - S):
        v_theta = v_poly.rename({"s": "theta_1"})
        exact = (t1 * v_theta).integrate("theta_1", 0, "s") + (t2 * v_theta).integrate(
            "theta_1", "s", 1
        )
        want = np.broadcast_to(
            np.asarray(exact.eval_float({"s": grid}), dtype=float), grid.shape
        )
        v_vals = np.broadcast_to(
            np.asarray(v_poly.eval_float({"s": grid}), dtype=float), grid.shape
        )
        got = M @ v_vals
        assert np.max(np.abs(got - want)) < 1e-4


def test_op_matrix_multiplier_is_diagonal():
    """[TRIVIAL] a pure multiplier discretizes to the diagonal of its samples."""
    from piesos.pi_ops import pi_multiplier

    grid = Domain(0, 1).grid(40)
    M = op_matrix(pi_multiplier(S * 2, Domain(0, 1)), grid)
    assert np.allclose(M, np.diag(2 * grid))


# ----------------------------------------------------------------------
# PIE side and cross-validation
# ----------------------------------------------------------------------


def test_pie_zero_state_stays_zero():
    """[TRIVIAL] zero initial fundamental state gives the identically zero trajectory."""
    pie = compile_pde(example_fisher())
    cfg = SimConfig(n_intervals=48, t_final=0.5, n_save=21)
    traj = simulate_pie(pie, lambda s: 0.0 * s, cfg)
    assert traj.status == "completed"
    assert np.max(traj.norms) == 0.0


def test_heat_pde_vs_pie_cross_check():
    """[DERIVED] heat flow via the PIE (v = u_ss) reproduces the PDE norms to 1e-3."""
    pde = heat_model()
    pie = compile_pde(pde)
    cfg = SimConfig(n_intervals=128, t_final=0.2, n_save=21)
    traj_u = simulate_pde(pde, sine(), cfg)
    # fundamental state of sqrt(2) sin(pi s) is -sqrt(2) pi^2 sin(pi s)
    traj_v = simulate_pie(pie, lambda s: -math.pi**2 * math.sqrt(2) * np.sin(np.pi * s), cfg)
    assert traj_u.status == traj_v.status == "completed"
    scale = traj_u.norms[0]
    assert np.max(np.abs(traj_u.norms - traj_v.norms)) / scale < 1e-3


def test_fisher_pde_vs_pie_cross_check():
    """[DERIVED] nonlinear Fisher dynamics agree between the two simulators."""
    pde = example_fisher()
    pie = compile_pde(pde)
    cfg = SimConfig(n_intervals=96, t_final=0.5, n_save=21)
    traj_u = simulate_pde(pde, neg_sine(1.0), cfg)
    traj_v = simulate_pie(pie, lambda s: math.pi**2 * math.sqrt(2) * np.sin(np.pi * s), cfg)
    assert traj_u.status == traj_v.status == "completed"
    scale = traj_u.norms[0]
    assert np.max(np.abs(traj_u.norms - traj_v.norms)) / scale < 1e-3
    assert traj_v.info["t_matrix_cond"] < 1e9


def test_pie_initial_norm_matches_reconstruction():
    """[DERIVED] |T v(0)| equals the PDE norm of the matching initial state."""
    pie = compile_pde(example_fisher())
    cfg = SimConfig(n_intervals=128, t_final=0.01, n_save=3)
    traj = simulate_pie(pie, lambda s: math.pi**2 * math.sqrt(2) * np.sin(np.pi * s), cfg)
    assert abs(traj.norms[0] - 1.0) < 1e-3  # the sine has unit L2 norm


# ----------------------------------------------------------------------
# decay-bound reports
# ----------------------------------------------------------------------


def test_decay_bound_heat_lambda_zero():
    """[DERIVED] any decaying trajectory satisfies the M=1, lambda=0 envelope."""
    traj = simulate_pde(heat_model(), sine(), SimConfig(n_intervals=64, t_final=0.3, n_save=31))
    res = check_decay_bound(traj, M=1.0, lam=0.0)
    assert res["satisfied"]
    assert res["max_violation"] <= 1e-6


def test_decay_bound_fisher_certificate_rate():
    """[DERIVED] Fisher at r=1 meets exp(-3.650 t) within 1e-2 but fails lambda=6."""
    cfg = SimConfig(n_intervals=96, t_final=1.0, n_save=101)
    traj = simulate_pde(example_fisher(), neg_sine(1.0), cfg)
    res = check_decay_bound(traj, M=1.0, lam=3.650)
    assert res["max_violation"] <= 1e-2
    res6 = check_decay_bound(traj, M=1.0, lam=6.0)
    assert not res6["satisfied"]
    assert res6["max_violation"] > 1e-2


def test_fit_initial_rate_linear_regime():
    """[DERIVED] tiny-amplitude Fisher decays at the linearized rate pi^2 - 5 (2%)."""
    cfg = SimConfig(n_intervals=96, t_final=0.5, n_save=101)
    traj = simulate_pde(example_fisher(), sine(0.01), cfg)
    rate = fit_initial_rate(traj, window=0.5)
    lin = math.pi**2 - 5.0
    assert abs(rate - lin) / lin < 0.02


# ----------------------------------------------------------------------
# output
# ----------------------------------------------------------------------


def test_trajectory_csv_round_trip(tmp_path):
    """[TRIVIAL] CSV export carries the time/norm series faithfully."""
    traj = simulate_pde(heat_model(), sine(), SimConfig(n_intervals=32, t_final=0.05, n_save=6))
    path = tmp_path / "traj.csv"
    trajectory_to_csv(traj, str(path))
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "t,norm"
    assert len(rows) == 1 + len(traj.t)
    t_back = [float(r.split(",")[0]) for r in rows[1:]]
    n_back = [float(r.split(",")[1]) for r in rows[1:]]
    assert np.allclose(t_back, traj.t)
    assert np.allclose(n_back, traj.norms)


def test_trajectory_csv_with_states(tmp_path):
    """[TRIVIAL] state columns appear when requested and kept."""
    cfg = SimConfig(n_intervals=32, t_final=0.05, n_save=4, keep_states=True)
    traj = simulate_pde(heat_model(), sine(), cfg)
    path = tmp_path / "traj_states.csv"
    trajectory_to_csv(traj, str(path), include_states=True)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:2] == ["t", "norm"]
    assert len(header) == 2 + len(traj.grid)


def test_sampled_function_initial_data():
    """[TRIVIAL] SampledFunction initial data is accepted and interpolated."""
    base = Domain(0, 1).grid(200)
    sf = SampledFunction(base, np.sqrt(2.0) * np.sin(np.pi * base))
    traj = simulate_pde(heat_model(), sf, SimConfig(n_intervals=64, t_final=0.02, n_save=3))
    assert traj.status == "completed"
    assert abs(traj.norms[0] - 1.0) < 1e-3

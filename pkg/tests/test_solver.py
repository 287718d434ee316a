"""Coupled time stepping checked against the implicit equations it claims to solve."""

import math

import numpy as np
import pytest

from memostrange.config import RunConfig
from memostrange.grid import Field, Grid
from memostrange.params import derive_params
from memostrange.solver import (
    CoupledState,
    ProbeSpec,
    SourceSpec,
    StencilOperator,
    advance,
    default_probes,
    initial_state,
    probe_from_json,
    run_simulation,
    weak_residual,
)
from memostrange.sources import (
    ConstantSource,
    ExpRelaxTime,
    LinearTime,
    SeparableSine,
    SineTime,
    UniformInSpace,
    manufacture_sources,
)

CG_TOL = 1e-13


def _setup(alpha=1.0, beta=1.0, n=3, cells=8):
    params = derive_params(n=n, C0=1.0, lam=1.0, alpha=alpha, beta=beta)
    grid = Grid(dim=n, cells_per_axis=cells)
    src = SourceSpec(
        f=SeparableSine(modes=(1,) * n, amplitude=2.0, time=SineTime(omega=1.0)),
        g=UniformInSpace(LinearTime(0.5)),
    )
    return params, grid, src


def _bulk_residual(old, new, dt, src, params):
    # the backward difference equation the step claims to satisfy
    grid = new.u.grid
    op = StencilOperator(grid, 0.0)
    res = (
        params.alpha * (new.u.values - old.u.values) / dt
        + op.apply(new.u.values)
        + params.A_strange * (new.u.values - new.memory.v)
        - src.f.value(grid, new.t)
    )
    return np.max(np.abs(res))


@pytest.mark.parametrize("scheme", ["backward-euler", "trapezoid"])
def test_one_step_satisfies_bulk_equation(scheme):
    params, grid, src = _setup()
    state = initial_state(grid, params, src, cg_tol=CG_TOL)
    new = advance(state, 0.05, src, params, scheme=scheme, cg_tol=CG_TOL)
    assert _bulk_residual(state, new, 0.05, src, params) < 1e-10
    assert new.t == pytest.approx(0.05)
    assert new.step_index == 1


def test_step_satisfies_backward_euler_memory_equation():
    params, grid, src = _setup()
    dt = 0.05
    state = initial_state(grid, params, src, cg_tol=CG_TOL)
    new = advance(state, dt, src, params, scheme="backward-euler", cg_tol=CG_TOL)
    drive = params.kappa * new.u.values + src.g.value(grid, new.t)
    res = params.beta * (new.memory.v - state.memory.v) / dt + params.mu * new.memory.v - drive
    assert np.max(np.abs(res)) < 1e-12
    assert np.allclose(new.memory.drive, drive)


def test_step_satisfies_trapezoid_memory_equation():
    params, grid, src = _setup()
    dt = 0.05
    state = initial_state(grid, params, src, cg_tol=CG_TOL)
    mid = advance(state, dt, src, params, scheme="trapezoid", cg_tol=CG_TOL)
    new = advance(mid, dt, src, params, scheme="trapezoid", cg_tol=CG_TOL)
    drive_new = params.kappa * new.u.values + src.g.value(grid, new.t)
    res = (
        params.beta * (new.memory.v - mid.memory.v) / dt
        + params.mu * 0.5 * (new.memory.v + mid.memory.v)
        - 0.5 * (drive_new + mid.memory.drive)
    )
    assert np.max(np.abs(res)) < 1e-12


@pytest.mark.parametrize("scheme", ["backward-euler", "trapezoid"])
def test_beta_zero_memory_is_algebraic(scheme):
    params, grid, src = _setup(beta=0.0)
    state = initial_state(grid, params, src, cg_tol=CG_TOL)
    new = advance(state, 0.1, src, params, scheme=scheme, cg_tol=CG_TOL)
    want = (params.kappa * new.u.values + src.g.value(grid, new.t)) / params.mu
    assert np.allclose(new.memory.v, want, atol=1e-14)
    assert _bulk_residual(state, new, 0.1, src, params) < 1e-10


def test_initial_state_parabolic_start():
    params, grid, src = _setup(alpha=2.0, beta=1.0)
    state = initial_state(grid, params, src)
    assert np.all(state.u.values == 0.0)
    assert np.all(state.memory.v == 0.0)
    assert state.t == 0.0


def test_initial_state_elliptic_start():
    # alpha = 0 forces the bulk equation to hold already at t = 0
    params, grid, _ = _setup(alpha=0.0, beta=1.0)
    src = SourceSpec(f=SeparableSine(modes=(1, 1, 1), amplitude=2.0),
                     g=UniformInSpace(LinearTime(0.5)))
    state = initial_state(grid, params, src, cg_tol=CG_TOL)
    op = StencilOperator(grid, params.A_strange)
    res = op.apply(state.u.values) - src.f.value(grid, 0.0)
    assert np.max(np.abs(res)) < 1e-10
    assert np.any(state.u.values != 0.0)


def test_initial_state_beta_zero_memory():
    params, grid, src = _setup(alpha=1.0, beta=0.0)
    state = initial_state(grid, params, src)
    want = src.g.value(grid, 0.0) / params.mu  # u starts at zero
    assert np.allclose(state.memory.v, want)


def test_advance_rejects_bad_dt_and_scheme():
    params, grid, src = _setup()
    state = initial_state(grid, params, src)
    with pytest.raises(ValueError, match="dt"):
        advance(state, 0.0, src, params)
    with pytest.raises(ValueError, match="scheme"):
        advance(state, 0.1, src, params, scheme="leapfrog")


def test_state_h_values_and_v_field():
    params, grid, src = _setup(beta=0.0)
    state = initial_state(grid, params, src, cg_tol=CG_TOL)
    state = advance(state, 0.1, src, params, cg_tol=CG_TOL)
    assert np.allclose(state.h_values(), state.u.values - state.memory.v)
    assert isinstance(state.v, Field)
    assert np.shares_memory(state.v.values, state.memory.v)


def test_matches_single_mode_ode_reduction():
    # a single eigenmode forcing keeps the dynamics inside one mode, where
    # the full step must reproduce the scalar two by two recurrence exactly
    params, grid, _ = _setup()
    mode = SeparableSine(modes=(1, 1, 1))
    src = SourceSpec(f=SeparableSine(modes=(1, 1, 1), time=SineTime(omega=2.0)),
                     g=SeparableSine(modes=(1, 1, 1), time=LinearTime(1.0)))
    profile = mode.value(grid, 0.0)
    h = grid.h[0]
    lam_h = 3 * (4.0 / h**2) * math.sin(math.pi * h / 2.0) ** 2
    dt = 0.02
    A, kappa, mu, beta, alpha = (params.A_strange, params.kappa, params.mu,
                                 params.beta, params.alpha)
    uc, vc = 0.0, 0.0
    state = initial_state(grid, params, src, cg_tol=1e-14)
    for k in range(5):
        t1 = (k + 1) * dt
        fc = math.sin(2.0 * t1)
        gc = t1
        denom_v = beta + mu * dt
        v_base = (beta * vc + dt * gc) / denom_v
        u_coeff = dt * kappa / denom_v
        uc = (fc + A * v_base + alpha / dt * uc) / (alpha / dt + lam_h + A * (1 - u_coeff))
        vc = v_base + u_coeff * uc
        state = advance(state, dt, src, params, cg_tol=1e-14)
        assert np.allclose(state.u.values, uc * profile, atol=1e-11)
        assert np.allclose(state.memory.v, vc * profile, atol=1e-11)


def test_converges_to_manufactured_solution():
    params = derive_params(n=3, C0=1.0, lam=1.0, alpha=1.0, beta=1.0)
    grid = Grid(dim=3, cells_per_axis=16)
    u_spec = SeparableSine(modes=(1, 1, 1), time=ExpRelaxTime(3.0))
    v_spec = SeparableSine(modes=(1, 1, 1), time=ExpRelaxTime(2.0))
    f_src, g_src = manufacture_sources(u_spec, v_spec, params)
    src = SourceSpec(f=f_src, g=g_src)
    state = initial_state(grid, params, src, cg_tol=1e-12)
    dt, steps = 0.005, 40
    for _ in range(steps):
        state = advance(state, dt, src, params, cg_tol=1e-12)
    t_end = dt * steps
    eu = grid.norm_l2(state.u.values - u_spec.value(grid, t_end))
    ev = grid.norm_l2(state.memory.v - v_spec.value(grid, t_end))
    assert eu < 5e-3 and ev < 5e-3  # first order in dt plus h^2, both tiny here


def test_run_simulation_records_and_history():
    params, grid, src = _setup(cells=6)
    config = RunConfig(params=params, grid=grid, sources=src, dt=0.05, T=0.2,
                       output_stride=2, cg_tol=CG_TOL, keep_history=True)
    result = run_simulation(config)
    assert np.allclose(result.times, [0.0, 0.1, 0.2])
    assert result.probe_table.shape == (3, len(default_probes()))
    assert result.history_times.shape == (5,)
    assert result.u_history.shape == (5, grid.n_interior)
    assert np.allclose(result.u_history[-1], result.final_state.u.values)
    assert np.allclose(result.v_history[-1], result.final_state.memory.v)
    assert result.probe_names[0] == "u_L2"
    # replay the steps by hand, the table must match
    state = initial_state(grid, params, src, cg_tol=CG_TOL)
    for _ in range(4):
        state = advance(state, 0.05, src, params, cg_tol=CG_TOL)
    assert result.probe_table[-1, 0] == pytest.approx(grid.norm_l2(state.u.values))


def test_run_simulation_rejects_incommensurate_horizon():
    params, grid, src = _setup(cells=6)
    config = RunConfig(params=params, grid=grid, sources=src, dt=0.03, T=0.1)
    with pytest.raises(ValueError, match="integer multiple"):
        run_simulation(config)


def test_probe_labels_and_point_lookup():
    assert ProbeSpec("norm", "u", "L2").label == "u_L2"
    assert ProbeSpec("norm", "H", "max", name="peak").label == "peak"
    p = ProbeSpec("point", "u", coords=(0.5, 0.25))
    assert p.label == "u_at_0.5_0.25"
    grid = Grid(dim=2, cells_per_axis=4)
    vals = np.arange(9, dtype=float)
    state = CoupledState(
        u=Field(grid, vals),
        memory=__import__("memostrange.memory", fromlist=["MemoryState"]).MemoryState(
            v=np.zeros(9), drive=np.zeros(9), t=0.0),
        t=0.0,
    )
    # node (0.5, 0.25) is interior index (1, 0) in the 3x3 block
    assert p.evaluate(state) == vals.reshape(3, 3)[1, 0]
    assert ProbeSpec("norm", "u", "max").evaluate(state) == 8.0
    assert ProbeSpec("norm", "u", "min").evaluate(state) == 0.0
    with pytest.raises(ValueError, match="dimension"):
        ProbeSpec("point", "u", coords=(0.5,)).evaluate(state)


def test_probe_validation_and_json():
    with pytest.raises(ValueError, match="kind"):
        ProbeSpec("integral", "u", "L2")
    with pytest.raises(ValueError, match="field"):
        ProbeSpec("norm", "w", "L2")
    with pytest.raises(ValueError, match="norm"):
        ProbeSpec("norm", "u", "L1")
    with pytest.raises(ValueError, match="coords"):
        ProbeSpec("point", "u")
    spec = ProbeSpec("point", "v", coords=(0.5, 0.5), name="mid")
    assert probe_from_json(spec.to_json()) == spec
    with pytest.raises(ValueError, match="unknown key"):
        probe_from_json({"kind": "norm", "field": "u", "norm": "L2", "weight": 2})


def test_source_spec_json_round_trip():
    params, _, src = _setup()
    clone = SourceSpec.from_json(src.to_json(), params)
    assert clone.f == src.f and clone.g == src.g
    with pytest.raises(ValueError, match="f.*g|g.*f"):
        SourceSpec.from_json({"f": src.f.to_json()}, params)


def test_weak_residual_vanishes_on_solver_trajectory():
    # the defect tested is exactly the discrete equation, so a solver run
    # leaves only linear algebra noise
    params, grid, src = _setup(cells=8)
    config = RunConfig(params=params, grid=grid, sources=src, dt=0.02, T=0.1,
                       cg_tol=1e-13, keep_history=True, probes=())
    result = run_simulation(config)
    res = weak_residual(result.history_times, result.u_history, result.v_history,
                        src.f, grid, params)
    assert res < 1e-9


def test_weak_residual_shape_checks():
    params, grid, src = _setup(cells=6)
    with pytest.raises(ValueError, match="shapes"):
        weak_residual(np.array([0.0, 0.1]), np.zeros((3, grid.n_interior)),
                      np.zeros((3, grid.n_interior)), src.f, grid, params)
    with pytest.raises(ValueError, match="two time levels"):
        weak_residual(np.array([0.0]), np.zeros((1, grid.n_interior)),
                      np.zeros((1, grid.n_interior)), src.f, grid, params)


def test_weak_residual_detects_wrong_forcing():
    params, grid, src = _setup(cells=8)
    config = RunConfig(params=params, grid=grid, sources=src, dt=0.02, T=0.1,
                       cg_tol=1e-13, keep_history=True, probes=())
    result = run_simulation(config)
    wrong = ConstantSource(5.0)
    res = weak_residual(result.history_times, result.u_history, result.v_history,
                        wrong, grid, params)
    assert res > 1e-3

import numpy as np
import pytest

from lagdg import geometry as geo
from lagdg.acceptance import rotating_quad_defect
from lagdg.fields import EosParams, global_totals, make_field
from lagdg.integrator import (
    LimiterOptions,
    Solver,
    SolverAbort,
    StepControls,
    StepRejected,
    cfl_timestep,
    euler_gcl_prediction,
    gcl_audit,
    initial_state,
)
from lagdg.mesh import build_topology, structured_mesh
from lagdg.problems import _nodal_state, init_taylor_green, init_uniform
from lagdg.riemann import BoundaryCondition


def resting_gas(n):
    # p chosen so that c = 1 with rho = 1, gamma = 1.4
    return init_uniform(n, 2, velocity=(0.0, 0.0), p=1.0 / 1.4)


@pytest.mark.parametrize("n, expect", [(10, 0.025), (20, 0.0125)])
def test_cfl_timestep_formula(n, expect):
    prob = resting_gas(n)
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(cfl=0.25))
    state = initial_state(prob.topo, prob.x, prob.field)
    dt = solver.cfl_timestep(state, solver.evaluate(prob.field, prob.x))
    assert dt == pytest.approx(expect, rel=1e-12)


def test_cfl_growth_cap_and_initial_step():
    prob = resting_gas(10)
    controls = StepControls(cfl=0.25, dt_init=1e-3, growth=1.05)
    solver = Solver(prob.topo, prob.eos, prob.bc, controls)
    state = initial_state(prob.topo, prob.x, prob.field)
    snap = solver.evaluate(prob.field, prob.x)
    assert cfl_timestep(prob.topo, state, snap, controls, prob.eos) == pytest.approx(1e-3)
    state.dt_prev = 2e-3
    assert cfl_timestep(prob.topo, state, snap, controls, prob.eos) == pytest.approx(2.1e-3)


def test_step_controls_validation():
    with pytest.raises(ValueError):
        StepControls(cfl=1.5)
    with pytest.raises(ValueError):
        StepControls(dt_init=0.0)
    with pytest.raises(ValueError):
        LimiterOptions(beta=0.0)
    with pytest.raises(ValueError):
        Solver(resting_gas(2).topo, EosParams(np.full(4, 1.4)), scheme="rk4")


def test_uniform_flow_step_is_exact_translation():
    prob = init_uniform(6, 2, velocity=(1.0, 0.5), distort=0.25, seed=3)
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(t_end=1.0))
    state = initial_state(prob.topo, prob.x, prob.field)
    new = solver.step(state)
    dt = new.t
    np.testing.assert_allclose(new.field.U, state.field.U, atol=1e-14)
    np.testing.assert_allclose(new.x, prob.x + dt * np.array([1.0, 0.5]), atol=1e-14)
    assert solver.diagnostics.steps[-1].gcl < 1e-13


def test_unlimited_step_matches_two_stage_composition():
    prob = init_taylor_green(6)
    limiter = LimiterOptions(fct=False, slope=False)
    dt = 4e-3
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(dt_init=dt, t_end=1.0), limiter,
                    energy_source=prob.energy_source)
    state = initial_state(prob.topo, prob.x, prob.field)
    new = solver.step(state)
    assert new.t == pytest.approx(dt)

    fld, x = prob.field, prob.x
    s0 = solver.evaluate(fld, x)
    U1 = fld.U + dt * np.einsum("cij,cjk->cik", fld.mass_inv, s0.residual.rhs)
    x1 = x + dt * s0.riemann.u_star
    s1 = solver.evaluate(fld.with_state(U1), x1)
    U2 = 0.5 * fld.U + 0.5 * (U1 + dt * np.einsum("cij,cjk->cik", fld.mass_inv, s1.residual.rhs))
    x2 = x + 0.5 * dt * (s0.riemann.u_star + s1.riemann.u_star)
    np.testing.assert_allclose(new.field.U, U2, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(new.x, x2, rtol=1e-14, atol=1e-15)


def test_taylor_green_step_energy_balance():
    prob = init_taylor_green(8)
    dt = 1e-3
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(dt_init=dt, t_end=1.0),
                    energy_source=prob.energy_source)
    state = initial_state(prob.topo, prob.x, prob.field)
    e0 = global_totals(state.field).energy
    new = solver.step(state)
    assert new.t == pytest.approx(dt)
    src0 = solver.evaluate(prob.field, prob.x).residual.source[..., -1].sum()
    # second-stage source at the predicted positions
    s0 = solver.evaluate(prob.field, prob.x)
    x1 = prob.x + dt * s0.riemann.u_star
    ref = solver.ref
    src1 = prob.energy_source(geo.quadrature_data(ref, prob.topo, x1), ref).sum()
    e1 = global_totals(new.field).energy
    assert abs(e1 - e0 - 0.5 * dt * (src0 + src1)) <= 1e-10 * e0


def test_taylor_green_limiter_mostly_inactive():
    prob = init_taylor_green(8, t_end=0.1)
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(t_end=0.1), LimiterOptions(slope=False),
                    energy_source=prob.energy_source)
    solver.run(initial_state(prob.topo, prob.x, prob.field))
    active = np.mean([s.alpha_active for s in solver.diagnostics.steps])
    assert active < 0.05
    assert solver.diagnostics.fct_violations == 0


def test_forward_euler_translation_has_no_volume_gap():
    x, elems = structured_mesh([0.0, 0.0], [1.0, 1.0], (1, 1))
    x = x + np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.05, -0.05]])
    topo = build_topology(elems, len(x), coords=x)
    u = np.tile([0.7, -0.2], (4, 1))
    gamma = np.full(1, 1.4)
    nu, vel, tau = _nodal_state(topo, x, 1.0, u[topo.elem_to_nodes], 1.0, gamma)
    bc = BoundaryCondition.free(4, 2, topo.boundary_nodes)
    bc.set_velocity(np.arange(4), u)
    solver = Solver(topo, EosParams(gamma), bc, StepControls(dt_init=0.1, t_end=0.1, cfl=0.9), scheme="euler")
    state = solver.step(initial_state(topo, x, make_field(topo, x, nu, vel, tau)))
    assert gcl_audit(topo, state).max_relative < 1e-15
    assert abs(euler_gcl_prediction(topo, x, u, 0.1)[0]) < 1e-16


def test_forward_euler_rotation_defect_matches_prediction():
    audit = rotating_quad_defect()
    assert abs(audit.per_element[0]) > 1e-4
    assert audit.prediction_error <= 1e-12


def test_rk2_keeps_volumes_consistent():
    prob = init_taylor_green(6, t_end=0.05)
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(t_end=0.05), energy_source=prob.energy_source)
    state = solver.run(initial_state(prob.topo, prob.x, prob.field))
    assert gcl_audit(prob.topo, state).max_relative <= 1e-12
    assert solver.diagnostics.max_gcl <= 1e-12


def test_rejected_attempt_halves_the_step(monkeypatch):
    prob = resting_gas(4)
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(t_end=1.0))
    original = Solver._check_geometry
    calls = {"n": 0}

    def flaky(self, x, fld, U):
        calls["n"] += 1
        if calls["n"] == 1:
            raise StepRejected("forced")
        return original(self, x, fld, U)

    monkeypatch.setattr(Solver, "_check_geometry", flaky)
    state = initial_state(prob.topo, prob.x, prob.field)
    full = solver.cfl_timestep(state, solver.evaluate(prob.field, prob.x))
    new = solver.step(state)
    assert new.t == pytest.approx(0.5 * full)
    assert solver.diagnostics.rejections == [0.0]
    assert solver.diagnostics.steps[-1].retries == 1


def test_repeated_rejection_aborts(monkeypatch):
    prob = resting_gas(4)
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(t_end=1.0, max_retries=2))

    def always(self, x, fld, U):
        raise StepRejected("forced")

    monkeypatch.setattr(Solver, "_check_geometry", always)
    with pytest.raises(SolverAbort, match="rejected 3 times"):
        solver.step(initial_state(prob.topo, prob.x, prob.field))


def test_runs_are_bitwise_deterministic():
    def final():
        prob = init_taylor_green(6, t_end=0.02)
        solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(t_end=0.02), energy_source=prob.energy_source)
        return solver.run(initial_state(prob.topo, prob.x, prob.field))

    a, b = final(), final()
    assert np.array_equal(a.field.U, b.field.U) and np.array_equal(a.x, b.x)


def test_run_stops_at_t_end_and_max_steps():
    prob = resting_gas(4)
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(t_end=0.3))
    state = solver.run(initial_state(prob.topo, prob.x, prob.field))
    assert state.t == pytest.approx(0.3, rel=1e-14)
    solver = Solver(prob.topo, prob.eos, prob.bc, StepControls(t_end=0.3, max_steps=2))
    assert solver.run(initial_state(prob.topo, prob.x, prob.field)).steps == 2

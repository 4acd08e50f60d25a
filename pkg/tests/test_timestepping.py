"""
Time Stepping Tests

Step planning, the Dablain update, the Taylor start, velocity
reconstruction and the full time loop.
"""

from math import ceil, sqrt

import numpy as np
import pytest

from src.fem.assembly import assemble_operators, build_space, interpolate
from src.fem.mesh import generate_interval_mesh, generate_square_mesh
from src.fem.reference_elements import build_reference_element
from src.models.element import ElementFamily, ElementShape
from src.models.fields import FieldVector
from src.models.plans import STABILITY_CONSTANTS, SigmaBound, WaveState
from src.solvers.operators import estimate_sigma_max, lh_matvec
from src.timestepping.dablain import (
    SourceTerms,
    dablain_step,
    discrete_energy,
    first_step,
    make_plan,
    no_source,
    reconstruct_velocity,
    run,
    run_states,
    time_derivative_ladder,
)
from src.utils.errors import InstabilityError


def _field(ops, values, t=0.0):
    return FieldVector(values=np.asarray(values, dtype=float), space=ops.space, time_stamp=t)


def _smooth_start(ops):
    space = ops.space
    u0 = interpolate(space, lambda x, hint: np.sin(2.0 * np.pi * x[:, 0] / 5.0))
    v0 = interpolate(space, lambda x, hint: np.cos(2.0 * np.pi * x[:, 0] / 5.0))
    return u0, v0


def _gll_ops(problem, degree, n):
    element = build_reference_element(ElementShape.INTERVAL, ElementFamily.SPECTRAL_GLL, degree)
    space = build_space(generate_interval_mesh(n), element)
    return assemble_operators(space, problem.rho, problem.c, coefficients_vary=False)


class TestPlan:
    """Tests for the time-step plan."""

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_plan_formula(self, interval_ops, p):
        """dt_max = sqrt(c_p / sigma) and N_T dt = T."""
        sigma = estimate_sigma_max(interval_ops)
        plan = make_plan(interval_ops, p, 10.0, safety=0.9)
        assert plan.dt_max == pytest.approx(sqrt(STABILITY_CONSTANTS[p] / sigma))
        assert plan.n_steps == ceil(10.0 / (0.9 * plan.dt_max))
        assert plan.n_steps * plan.dt == pytest.approx(10.0)
        assert plan.dt <= 0.9 * plan.dt_max * (1.0 + 1e-12)

    def test_plan_records_bound(self, interval_ops):
        """The lumped bound allows a larger step than the consistent one on intervals."""
        consistent = make_plan(interval_ops, 2, 10.0)
        lumped = make_plan(interval_ops, 2, 10.0, bound=SigmaBound.LUMPED)
        assert consistent.sigma_bound is SigmaBound.CONSISTENT
        assert lumped.sigma_bound is SigmaBound.LUMPED
        assert lumped.dt_max == pytest.approx(sqrt(2.5) * consistent.dt_max, rel=1e-6)
        assert lumped.n_steps < consistent.n_steps

    def test_square_cubic_step_count(self, square_problem):
        """Cubic lumped triangles on the level-3 square need about 7400 steps, half that on level 2."""
        element = build_reference_element(ElementShape.TRIANGLE, ElementFamily.LUMPED_TRIANGLE, 3)
        plans = {}
        for level in (2, 3):
            space = build_space(generate_square_mesh(level), element)
            ops = assemble_operators(
                space, square_problem.rho, square_problem.c, coefficients_vary=square_problem.coefficients_vary
            )
            plans[level] = make_plan(ops, 3, square_problem.T)
        assert plans[3].sigma_bound is SigmaBound.LUMPED
        assert 0.75 * 7399 <= plans[3].n_steps <= 1.25 * 7399
        assert plans[3].n_steps / plans[2].n_steps == pytest.approx(2.0, rel=0.15)

    def test_zero_final_time(self, interval_ops):
        """T = 0 takes no steps and returns the initial state."""
        plan = make_plan(interval_ops, 1, 0.0)
        assert plan.n_steps == 0
        u0, v0 = _smooth_start(interval_ops)
        result = run(u0, v0, interval_ops, no_source(interval_ops.space), plan)
        np.testing.assert_array_equal(result.u_T.values, u0.values)
        np.testing.assert_array_equal(result.v_T.values, v0.values)

    def test_tiny_final_time_takes_one_step(self, interval_ops):
        """0 < T < dt_max still takes one step."""
        plan = make_plan(interval_ops, 2, 1e-6)
        assert plan.n_steps == 1
        assert plan.dt == pytest.approx(1e-6)


class TestSteps:
    """Tests for the single-step updates."""

    def test_p1_is_leapfrog(self, interval_ops):
        """p = 1 reduces to u+ = 2u - u- - dt^2 L_h u."""
        plan = make_plan(interval_ops, 1, 1.0)
        rng = np.random.default_rng(0)
        u_prev, u_curr = (_field(interval_ops, rng.standard_normal(interval_ops.n_dof)) for _ in range(2))
        state = WaveState(u_prev=u_prev, u_curr=u_curr, n=1, t=plan.dt)
        nxt = dablain_step(state, interval_ops, no_source(interval_ops.space), plan)
        expected = 2.0 * u_curr.values - u_prev.values - plan.dt ** 2 * lh_matvec(interval_ops, u_curr.values)
        np.testing.assert_allclose(nxt.u_curr.values, expected, atol=1e-12)
        assert nxt.n == 2
        assert nxt.u_prev is u_curr

    def test_p2_update_formula(self, interval_ops):
        """p = 2 adds the dt^4/12 L_h^2 u term."""
        plan = make_plan(interval_ops, 2, 1.0)
        rng = np.random.default_rng(1)
        u_prev, u_curr = (_field(interval_ops, rng.standard_normal(interval_ops.n_dof)) for _ in range(2))
        state = WaveState(u_prev=u_prev, u_curr=u_curr, n=3, t=3 * plan.dt)
        nxt = dablain_step(state, interval_ops, no_source(interval_ops.space), plan)
        Lu = lh_matvec(interval_ops, u_curr.values)
        LLu = lh_matvec(interval_ops, Lu)
        dt = plan.dt
        expected = 2.0 * u_curr.values - u_prev.values - dt ** 2 * Lu + dt ** 4 / 12.0 * LLu
        np.testing.assert_allclose(nxt.u_curr.values, expected, rtol=1e-10, atol=1e-12)

    def test_zero_state_stays_zero(self, interval_ops):
        """Homogeneous data without a source stays exactly zero."""
        plan = make_plan(interval_ops, 3, 0.5)
        zero = _field(interval_ops, np.zeros(interval_ops.n_dof))
        result = run(zero, zero, interval_ops, no_source(interval_ops.space), plan)
        assert np.all(result.u_T.values == 0.0)
        assert np.all(result.v_T.values == 0.0)

    def test_step_requires_history(self, interval_ops):
        """dablain_step needs n >= 1."""
        plan = make_plan(interval_ops, 1, 1.0)
        zero = _field(interval_ops, np.zeros(interval_ops.n_dof))
        with pytest.raises(ValueError):
            dablain_step(WaveState(u_prev=zero, u_curr=zero, n=0, t=0.0), interval_ops, no_source(interval_ops.space), plan)

    def test_first_step_taylor(self, interval_ops):
        """u1 = u0 + dt v0 - dt^2/2 L u0 - dt^3/6 L v0 for p = 1."""
        plan = make_plan(interval_ops, 1, 1.0)
        u0, v0 = _smooth_start(interval_ops)
        state = first_step(u0, v0, interval_ops, no_source(interval_ops.space), plan)
        dt = plan.dt
        expected = (
            u0.values
            + dt * v0.values
            - dt ** 2 / 2.0 * lh_matvec(interval_ops, u0.values)
            - dt ** 3 / 6.0 * lh_matvec(interval_ops, v0.values)
        )
        np.testing.assert_allclose(state.u_curr.values, expected, atol=1e-12)
        assert state.t == pytest.approx(dt)

    def test_run_matches_step_api(self, interval_ops):
        """The fused loop and the public step API produce the same iterates."""
        plan = make_plan(interval_ops, 2, 0.3)
        u0, v0 = _smooth_start(interval_ops)
        source = no_source(interval_ops.space)
        states = run_states(u0, v0, interval_ops, source, plan, plan.n_steps)
        result = run(u0, v0, interval_ops, source, plan)
        np.testing.assert_allclose(result.u_T.values, states[-1].u_curr.values, rtol=1e-12, atol=1e-12)


class TestVelocity:
    """Tests for the velocity reconstruction."""

    @pytest.mark.parametrize("order", [2, 4, 6])
    def test_kernel_mode_velocity(self, interval_ops, order):
        """A field linear in time has its exact velocity at every order."""
        plan = make_plan(interval_ops, 3, 1.0)
        ones = np.ones(interval_ops.n_dof)
        u_next = _field(interval_ops, 2.0 + 3.0 * plan.dt * ones)
        u_prev = _field(interval_ops, 2.0 - 3.0 * plan.dt * ones)
        v = reconstruct_velocity(u_next, u_prev, interval_ops, no_source(interval_ops.space), plan, order)
        np.testing.assert_allclose(v.values, 3.0, atol=1e-9)

    def test_order_beyond_scheme(self, interval_ops):
        """Velocity order is capped at 2p."""
        plan = make_plan(interval_ops, 1, 1.0)
        zero = _field(interval_ops, np.zeros(interval_ops.n_dof))
        with pytest.raises(ValueError):
            reconstruct_velocity(zero, zero, interval_ops, no_source(interval_ops.space), plan, 4)
        with pytest.raises(ValueError):
            reconstruct_velocity(zero, zero, interval_ops, no_source(interval_ops.space), plan, 3)

    def test_eigenmode_accuracy(self, interval_ops):
        """Reconstructed velocity of a discrete eigenmode improves with order."""
        A = interval_ops.stiffness.toarray()
        m = interval_ops.mass_diagonal
        eigenvalues, vectors = np.linalg.eigh(A / np.sqrt(np.outer(m, m)))
        plan = make_plan(interval_ops, 3, 1.0)
        dt, t = plan.dt, 0.37
        # a mode with omega dt near 0.5
        index = int(np.argmin(np.abs(np.sqrt(np.maximum(eigenvalues, 0.0)) * dt - 0.5)))
        omega = np.sqrt(eigenvalues[index])
        mode = vectors[:, index] / np.sqrt(m)
        u_next = _field(interval_ops, np.cos(omega * (t + dt)) * mode)
        u_prev = _field(interval_ops, np.cos(omega * (t - dt)) * mode)
        exact = -omega * np.sin(omega * t) * mode
        errors = [
            np.abs(
                reconstruct_velocity(u_next, u_prev, interval_ops, no_source(interval_ops.space), plan, k).values
                - exact
            ).max()
            for k in (2, 4, 6)
        ]
        assert errors[0] > errors[1] > errors[2]


class TestTimeLoop:
    """Tests for the full time loop."""

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_energy_is_bounded(self, interval_ops, p):
        """The discrete energy stays within a few percent of its start."""
        plan = make_plan(interval_ops, p, 5.0, safety=0.3)
        u0, v0 = _smooth_start(interval_ops)
        result = run(u0, v0, interval_ops, no_source(interval_ops.space), plan, trace_every=5)
        energies = np.array([s.energy for s in result.trace])
        assert len(energies) > 2
        assert energies[0] == pytest.approx(discrete_energy(interval_ops, u0.values, v0.values))
        assert np.all(np.abs(energies / energies[0] - 1.0) < 0.05)

    def test_energy_within_one_percent(self, periodic_problem):
        """Exact layered-wave data keep the discrete energy within 1% at the default step."""
        ops = _gll_ops(periodic_problem, 2, 20)
        space = ops.space
        u0 = interpolate(space, lambda x, hint: periodic_problem.u_exact(x, 0.0, 0))
        v0 = interpolate(space, lambda x, hint: periodic_problem.u_exact(x, 0.0, 1))
        plan = make_plan(ops, 2, 2.0)
        result = run(u0, v0, ops, no_source(space), plan, trace_every=10)
        energies = np.array([s.energy for s in result.trace])
        assert len(energies) > 2
        assert np.all(np.abs(energies / energies[0] - 1.0) < 0.01)

    def test_linear_cfl_violation(self, periodic_problem):
        """p = 1 at 1.5 times the lumped step limit blows up within 500 steps."""
        ops = _gll_ops(periodic_problem, 1, 20)
        plan = make_plan(ops, 1, 1.0, bound=SigmaBound.LUMPED)
        dt = 1.5 * plan.dt_max
        unstable = plan.model_copy(update={"dt": dt, "n_steps": 500, "T": 500 * dt})
        u0 = interpolate(ops.space, lambda x, hint: periodic_problem.u_exact(x, 0.0, 0))
        v0 = interpolate(ops.space, lambda x, hint: periodic_problem.u_exact(x, 0.0, 1))
        rng = np.random.default_rng(11)
        u0 = u0.with_values(u0.values + 1e-3 * rng.standard_normal(u0.values.shape), 0.0)
        with pytest.raises(InstabilityError) as exc_info:
            run(u0, v0, ops, no_source(ops.space), unstable)
        assert exc_info.value.step <= 501

    def test_time_reversibility(self, interval_ops):
        """Stepping forward then backward with negated velocity returns the start."""
        plan = make_plan(interval_ops, 2, 1.0)
        u0, v0 = _smooth_start(interval_ops)
        source = no_source(interval_ops.space)
        forward = run_states(u0, v0, interval_ops, source, plan, 20)
        last = forward[-1]
        back = WaveState(u_prev=last.u_curr, u_curr=last.u_prev, n=1, t=0.0)
        for _ in range(19):
            back = dablain_step(back, interval_ops, source, plan)
        np.testing.assert_allclose(back.u_curr.values, forward[0].u_prev.values, atol=1e-10)

    def test_cfl_violation(self, interval_ops):
        """Steps far beyond the stability limit raise InstabilityError."""
        plan = make_plan(interval_ops, 1, 40.0, safety=1.5)
        unstable = plan.model_copy(update={"dt": 3.0 * plan.dt_max, "n_steps": 400, "T": 1200.0 * plan.dt_max})
        u0, v0 = _smooth_start(interval_ops)
        rng = np.random.default_rng(5)
        u0 = u0.with_values(u0.values + 1e-3 * rng.standard_normal(u0.values.shape), 0.0)
        with pytest.raises(InstabilityError):
            run(u0, v0, interval_ops, no_source(interval_ops.space), unstable)

    def test_exact_solution_tracking(self, periodic_problem):
        """The layered wave is reproduced with the expected accuracy at modest resolution."""
        element = build_reference_element(ElementShape.INTERVAL, ElementFamily.SPECTRAL_GLL, 3)
        space = build_space(generate_interval_mesh(10), element)
        ops = assemble_operators(space, periodic_problem.rho, periodic_problem.c, coefficients_vary=False)
        T = 1.0
        plan = make_plan(ops, 3, T)
        u0 = interpolate(space, lambda x, hint: periodic_problem.u_exact(x, 0.0, 0))
        v0 = interpolate(space, lambda x, hint: periodic_problem.u_exact(x, 0.0, 1))
        result = run(u0, v0, ops, no_source(space), plan)
        exact = periodic_problem.u_exact(space.node_coords, T, 0)
        assert np.abs(result.u_T.values - exact).max() < 1e-3


class TestLadder:
    """Tests for the discrete derivative ladder."""

    def test_ladder_rungs(self, interval_ops):
        """r_2 = -L_h u and r_3 = -L_h v without a source."""
        u0, v0 = _smooth_start(interval_ops)
        rungs = time_derivative_ladder(interval_ops, u0, no_source(interval_ops.space), 0.0, 3, v=v0)
        np.testing.assert_allclose(rungs[2].values, -lh_matvec(interval_ops, u0.values))
        np.testing.assert_allclose(rungs[3].values, -lh_matvec(interval_ops, v0.values))

    def test_odd_rungs_without_velocity(self, interval_ops):
        """Odd rungs stay empty when no velocity seeds them."""
        u0, _ = _smooth_start(interval_ops)
        rungs = time_derivative_ladder(interval_ops, u0, no_source(interval_ops.space), 0.0, 4)
        assert rungs[1] is None and rungs[3] is None
        assert rungs[4] is not None

    def test_source_enters_ladder(self, square_problem, square_ops):
        """r_2 = -L_h u + f."""
        source = SourceTerms(square_ops.space, square_problem)
        assert source.active
        u0 = _field(square_ops, np.zeros(square_ops.n_dof))
        rungs = time_derivative_ladder(square_ops, u0, source, 0.2, 2)
        np.testing.assert_allclose(rungs[2].values, source.values(0.2, 0))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

import math

import numpy as np
import pytest

from errors import InvalidParameterError
from models.problem import StiffProblem
from models.velocity import Distribution, Moments
from utils.dvm import enumerate_collisions
from utils.kernel_modes import compute_kernel_modes
from utils.spectral_collision import decompose_kernel
from utils.time_integrators import (
    DEFAULT_EPSILONS,
    ap_diagnostic,
    collision_evaluator,
    get_stepper,
    is_unstable,
    step_explicit,
    step_exponential,
    step_penalized_imex,
)
from utils.velocity_grid import (
    anisotropic_gaussian,
    build_grid,
    compute_moments,
    distance_to_equilibrium,
    l1_norm,
    project_equilibrium,
)


@pytest.fixture(scope="module")
def lattice_grid():
    return build_grid(2, 8, 4.0)


@pytest.fixture(scope="module")
def dvm_operator(lattice_grid):
    return collision_evaluator(enumerate_collisions(lattice_grid))


@pytest.fixture(scope="module")
def spectral16():
    grid = build_grid(2, 16, 8.0)
    km = compute_kernel_modes(grid, use_cache=False)
    return grid, collision_evaluator(decompose_kernel(km, 60))


def bgk(mu):
    return lambda f: f.with_values(mu * (project_equilibrium(f).values - f.values))


def zero_operator(f):
    return f.with_values(np.zeros_like(f.values))


class TestExplicit:
    def test_zero_operator_keeps_state(self, lattice_grid):
        f = anisotropic_gaussian(lattice_grid)
        for method in ("euler", "rk4"):
            out = step_explicit(f, 0.1, StiffProblem(1.0, zero_operator), method)
            np.testing.assert_array_equal(out.values, f.values)

    def test_forward_euler_definition(self, lattice_grid, dvm_operator):
        f = anisotropic_gaussian(lattice_grid)
        problem = StiffProblem(0.5, dvm_operator)
        out = step_explicit(f, 0.01, problem, "euler")
        expected = f.values + 0.01 * dvm_operator(f).values / 0.5
        np.testing.assert_allclose(out.values, expected, rtol=1e-14, atol=1e-16)

    @pytest.mark.parametrize("dt,epsilon", [(0.1, 1.0), (0.05, 0.5), (0.2, 2.0)])
    def test_rk4_on_linear_decay(self, lattice_grid, dt, epsilon):
        f = anisotropic_gaussian(lattice_grid)
        problem = StiffProblem(epsilon, lambda g: g.with_values(-g.values))
        out = step_explicit(f, dt, problem, "rk4")
        z = dt / epsilon
        error = np.max(np.abs(out.values - math.exp(-z) * f.values))
        assert error <= 1.1 * z ** 5 / 120 * np.max(np.abs(f.values))

    def test_unknown_method(self, lattice_grid):
        with pytest.raises(InvalidParameterError):
            step_explicit(anisotropic_gaussian(lattice_grid), 0.1, StiffProblem(1.0, zero_operator), "midpoint")

    def test_nonpositive_dt(self, lattice_grid):
        with pytest.raises(InvalidParameterError):
            step_explicit(anisotropic_gaussian(lattice_grid), 0.0, StiffProblem(1.0, zero_operator))


class TestPenalizedImex:
    def test_stiff_limit_is_equilibrium(self, lattice_grid, dvm_operator):
        f = anisotropic_gaussian(lattice_grid)
        out = step_penalized_imex(f, 0.1, StiffProblem(1e-14, dvm_operator))
        equilibrium = project_equilibrium(f).values
        assert np.max(np.abs(out.values - equilibrium)) <= 1e-8 * np.max(equilibrium)

    def test_undamped_limit_is_shifted(self, lattice_grid, dvm_operator):
        f = anisotropic_gaussian(lattice_grid)
        out = step_penalized_imex(f, 0.1, StiffProblem(1e-14, dvm_operator), damp_deviation=False)
        equilibrium = project_equilibrium(f).values
        assert np.max(np.abs(out.values - equilibrium)) > 1e-6 * np.max(equilibrium)

    @pytest.mark.parametrize("damp", [True, False])
    def test_conserves_moments(self, lattice_grid, dvm_operator, damp):
        f = anisotropic_gaussian(lattice_grid, 1.0, [0.2, -0.1], [1.3, 0.7])
        before = compute_moments(f).conserved()
        for epsilon in (1.0, 1e-3, 1e-8):
            after = compute_moments(step_penalized_imex(f, 0.1, StiffProblem(epsilon, dvm_operator), damp)).conserved()
            np.testing.assert_allclose(after, before, rtol=1e-10, atol=1e-12)

    def test_bgk_contraction_factor(self, lattice_grid):
        f = anisotropic_gaussian(lattice_grid)
        mu, dt, epsilon = 2.0, 0.1, 0.01
        problem = StiffProblem(epsilon, bgk(mu), penalization=mu)
        out = step_penalized_imex(f, dt, problem)
        equilibrium = project_equilibrium(f).values
        factor = 1.0 / (1.0 + mu * dt / epsilon)
        np.testing.assert_allclose(out.values - equilibrium, factor * (f.values - equilibrium), atol=1e-13)

    def test_small_penalization_reduces_to_forward_euler(self, lattice_grid, dvm_operator):
        f = anisotropic_gaussian(lattice_grid)
        dt, mu = 0.05, 1e-8
        problem = StiffProblem(1.0, dvm_operator, penalization=mu)
        imex = step_penalized_imex(f, dt, problem, damp_deviation=False).values
        euler = step_explicit(f, dt, problem, "euler").values
        q = dvm_operator(f).values
        assert np.max(np.abs(imex - euler)) <= 2.0 * mu * dt * dt * np.max(np.abs(q)) + 1e-15

    def test_agrees_with_rk4_to_second_order(self, lattice_grid, dvm_operator):
        f = anisotropic_gaussian(lattice_grid)
        problem = StiffProblem(1.0, dvm_operator)

        def gap(dt):
            return np.max(np.abs(step_penalized_imex(f, dt, problem).values - step_explicit(f, dt, problem, "rk4").values))

        ratio = gap(0.02) / gap(0.01)
        assert 3.0 < ratio < 5.0

    def test_spectral_step_agrees_with_rk4_to_second_order(self, spectral16):
        grid, operator = spectral16
        f = anisotropic_gaussian(grid)
        problem = StiffProblem(1.0, operator)

        def gap(dt):
            return np.max(np.abs(step_penalized_imex(f, dt, problem).values - step_explicit(f, dt, problem, "rk4").values))

        ratio = gap(0.02) / gap(0.01)
        assert 3.0 < ratio < 5.0

    def test_spectral_moment_drift_bounded_by_operator_defect(self, spectral16):
        grid, operator = spectral16
        f = anisotropic_gaussian(grid, 1.0, [0.3, -0.2], [1.4, 0.6])
        dt, epsilon = 0.1, 1.0
        problem = StiffProblem(epsilon, operator)
        before = compute_moments(f).conserved()
        operator_defect = (dt / epsilon) * np.abs(compute_moments(operator(f)).conserved())
        steps = {
            "imex": step_penalized_imex(f, dt, problem),
            "exponential": step_exponential(f, dt, problem),
            "euler": step_explicit(f, dt, problem, "euler"),
        }
        for name, out in steps.items():
            drift = np.abs(compute_moments(out).conserved() - before)
            assert np.all(drift <= operator_defect * (1.0 + 1e-10) + 1e-13), name

    def test_batched_cells_use_their_own_equilibrium(self, lattice_grid, dvm_operator):
        a = anisotropic_gaussian(lattice_grid)
        b = anisotropic_gaussian(lattice_grid, 0.5, [0.3, 0.0], [0.8, 1.1])
        batched = Distribution(lattice_grid, np.stack([a.values, b.values]))
        problem = StiffProblem(0.1, dvm_operator)
        out = step_penalized_imex(batched, 0.1, problem)
        np.testing.assert_allclose(out.values[1], step_penalized_imex(b, 0.1, problem).values, rtol=1e-12, atol=1e-15)


class TestExponential:
    def test_exact_on_bgk(self, lattice_grid):
        f = anisotropic_gaussian(lattice_grid)
        mu, dt, epsilon = 1.5, 0.3, 0.2
        out = step_exponential(f, dt, StiffProblem(epsilon, bgk(mu), penalization=mu))
        equilibrium = project_equilibrium(f).values
        decay = math.exp(-mu * dt / epsilon)
        np.testing.assert_allclose(out.values, decay * f.values + (1.0 - decay) * equilibrium, atol=1e-13)

    def test_stiff_limit(self, lattice_grid, dvm_operator):
        f = anisotropic_gaussian(lattice_grid)
        out = step_exponential(f, 0.1, StiffProblem(1e-12, dvm_operator))
        equilibrium = project_equilibrium(f).values
        assert np.max(np.abs(out.values - equilibrium)) <= 1e-8 * np.max(equilibrium)

    @pytest.mark.parametrize("dt", [1e-3, 0.1, 10.0, 1e6])
    def test_positivity_on_bgk(self, lattice_grid, dt):
        f = anisotropic_gaussian(lattice_grid, temperatures=(2.0, 0.3))
        out = step_exponential(f, dt, StiffProblem(0.01, bgk(1.0), penalization=1.0))
        assert out.min_value() >= 0.0

    def test_conserves_mass(self, lattice_grid, dvm_operator):
        f = anisotropic_gaussian(lattice_grid)
        out = step_exponential(f, 0.1, StiffProblem(1e-2, dvm_operator))
        assert float(compute_moments(out).density) == pytest.approx(float(compute_moments(f).density), rel=1e-12)


class TestSupport:
    def test_get_stepper(self):
        assert get_stepper("imex") is step_penalized_imex
        with pytest.raises(InvalidParameterError):
            get_stepper("leapfrog")

    def test_is_unstable(self, lattice_grid):
        f = anisotropic_gaussian(lattice_grid)
        reference = float(np.max(f.values))
        assert not is_unstable(f, reference)
        assert is_unstable(f.with_values(f.values * 1e4), reference)
        values = f.values.copy()
        values[0, 0] = np.nan
        assert is_unstable(f.with_values(values), reference)

    def test_problem_validation(self):
        with pytest.raises(InvalidParameterError):
            StiffProblem(0.0, zero_operator)
        with pytest.raises(InvalidParameterError):
            StiffProblem(1.0, zero_operator, penalization=-1.0)
        with pytest.raises(InvalidParameterError):
            StiffProblem(1.0, zero_operator, explicit_method="ab2")

    def test_penalization_rule(self):
        moments = Moments.from_primitive(0.5, [0.0, 0.0], 1.0, 2)
        problem = StiffProblem(1.0, zero_operator, penalization_constant=3.0)
        assert float(problem.mu(moments)) == pytest.approx(1.5)
        assert float(StiffProblem(1.0, zero_operator, penalization=0.7).mu(moments)) == pytest.approx(0.7)
        assert problem.with_epsilon(1e-3).epsilon == 1e-3

    def test_collision_evaluator_rejects_other_objects(self):
        with pytest.raises(InvalidParameterError):
            collision_evaluator(42)


class TestAsymptoticPreserving:
    def test_imex_sweep(self, spectral16):
        grid, operator = spectral16
        f0 = anisotropic_gaussian(grid)
        rows = ap_diagnostic(f0, 0.1, StiffProblem(1.0, operator), "imex", DEFAULT_EPSILONS, n_steps=1)
        assert [r["epsilon"] for r in rows] == list(DEFAULT_EPSILONS)
        assert all(r["stable"] for r in rows)
        assert rows[-1]["distance_to_equilibrium"] <= 1e-6
        assert rows[-1]["euler_deviation"] is None

    def test_imex_stays_stable_over_several_steps(self, spectral16):
        grid, operator = spectral16
        f0 = anisotropic_gaussian(grid)
        rows = ap_diagnostic(f0, 0.1, StiffProblem(1.0, operator), "imex", DEFAULT_EPSILONS, n_steps=10)
        assert all(r["stable"] for r in rows)

    def test_explicit_is_flagged_unstable(self, spectral16):
        grid, operator = spectral16
        f0 = anisotropic_gaussian(grid)
        rows = ap_diagnostic(f0, 0.1, StiffProblem(1.0, operator), "explicit", [1e-8], n_steps=1)
        assert rows[0]["stable"] is False
        assert rows[0]["distance_to_equilibrium"] is None

    def test_distance_shrinks_with_epsilon(self, lattice_grid, dvm_operator):
        f0 = anisotropic_gaussian(lattice_grid)
        rows = ap_diagnostic(f0, 0.1, StiffProblem(1.0, dvm_operator), "exponential", DEFAULT_EPSILONS)
        distances = [r["distance_to_equilibrium"] for r in rows]
        assert all(b < a for a, b in zip(distances, distances[1:]))
        assert distances[-1] <= 1e-6 * float(distance_to_equilibrium(f0))

    def test_imex_contraction_on_bgk(self, lattice_grid):
        f = anisotropic_gaussian(lattice_grid)
        deviation = float(l1_norm(f.with_values(f.values - project_equilibrium(f).values)))
        for epsilon in DEFAULT_EPSILONS:
            out = step_penalized_imex(f, 0.1, StiffProblem(epsilon, bgk(1.0), penalization=1.0))
            remaining = float(l1_norm(out.with_values(out.values - project_equilibrium(f).values)))
            assert remaining <= deviation / (1.0 + 0.1 / epsilon) * (1.0 + 1e-9) + 1e-14

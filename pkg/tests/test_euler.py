import numpy as np
import pytest

from errors import CFLViolationError, InvalidParameterError, PositivityLossError
from models.fluid import FluidState, SpatialMesh
from utils.euler import (
    SOD_LEFT,
    SOD_RIGHT,
    density_l1_error,
    euler_solve,
    euler_step,
    gamma_for_dimension,
    riemann_state,
    rusanov_flux,
    stable_dt,
)
from utils.riemann import RiemannProblem, exact_riemann


def test_gamma_for_dimension():
    assert gamma_for_dimension(2) == 2.0
    assert gamma_for_dimension(3) == pytest.approx(5.0 / 3.0)


class TestEulerStep:
    def test_uniform_state_is_unchanged(self):
        mesh = SpatialMesh(20, 0.0, 1.0)
        state = FluidState.from_primitive(np.full(20, 1.2), 0.3, 0.9)
        out = euler_step(state, stable_dt(state, mesh), mesh)
        np.testing.assert_allclose(out.conserved, state.conserved, rtol=1e-14)

    def test_periodic_conservation(self, rng):
        mesh = SpatialMesh(50, 0.0, 1.0, "periodic")
        state = FluidState.from_primitive(
            1.0 + 0.5 * rng.random(50), 0.2 * rng.standard_normal(50), 1.0 + 0.5 * rng.random(50)
        )
        before = state.totals(mesh.dx)
        for _ in range(25):
            state = euler_step(state, stable_dt(state, mesh), mesh)
        np.testing.assert_allclose(state.totals(mesh.dx), before, rtol=1e-12, atol=1e-14)

    def test_consistent_flux(self):
        u = FluidState.from_primitive(np.array([0.7]), 0.4, 1.1).conserved
        flux = rusanov_flux(u, u, 2.0)
        rho, mom, energy = u[0]
        w = mom / rho
        p = energy - 0.5 * mom * w
        np.testing.assert_allclose(flux[0], [mom, mom * w + p, (energy + p) * w])

    def test_cfl_violation(self):
        mesh = SpatialMesh(10, 0.0, 1.0)
        state = riemann_state(mesh)
        with pytest.raises(CFLViolationError):
            euler_step(state, 2.0 * stable_dt(state, mesh, cfl=1.0), mesh)

    def test_nonpositive_dt(self):
        mesh = SpatialMesh(10, 0.0, 1.0)
        with pytest.raises(InvalidParameterError):
            euler_step(riemann_state(mesh), 0.0, mesh)

    def test_negative_density_rejected(self):
        mesh = SpatialMesh(4, 0.0, 1.0)
        state = FluidState(np.array([[1.0, 0.0, 1.0], [-0.1, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 0.0, 1.0]]))
        with pytest.raises(PositivityLossError):
            euler_step(state, 1e-3, mesh)


class TestSod:
    def test_initial_data(self):
        mesh = SpatialMesh(4, 0.0, 1.0)
        state = riemann_state(mesh)
        np.testing.assert_allclose(state.density, [1.0, 1.0, 0.125, 0.125])
        np.testing.assert_allclose(state.pressure, [1.0, 1.0, 0.1, 0.1])

    def test_matches_exact_solution(self):
        mesh = SpatialMesh(400, 0.0, 1.0)
        state = euler_solve(riemann_state(mesh), 0.2, mesh)
        exact = exact_riemann(SOD_LEFT, SOD_RIGHT, mesh.centers, 0.2, gamma=2.0)
        assert density_l1_error(state, exact[:, 0], mesh) <= 0.02

    def test_error_decreases_under_refinement(self):
        errors = []
        for n_cells in (100, 200):
            mesh = SpatialMesh(n_cells, 0.0, 1.0)
            state = euler_solve(riemann_state(mesh), 0.2, mesh)
            exact = exact_riemann(SOD_LEFT, SOD_RIGHT, mesh.centers, 0.2, gamma=2.0)
            errors.append(density_l1_error(state, exact[:, 0], mesh))
        assert errors[1] < errors[0]


class TestExactRiemann:
    def test_star_state_for_air(self):
        problem = RiemannProblem(SOD_LEFT, SOD_RIGHT, gamma=1.4)
        assert problem.p_star == pytest.approx(0.30313, abs=1e-5)
        assert problem.w_star == pytest.approx(0.92745, abs=1e-5)

    def test_star_densities_for_air(self):
        problem = RiemannProblem(SOD_LEFT, SOD_RIGHT, gamma=1.4)
        # left of the contact (after the rarefaction) and right of it (behind the shock)
        left = problem.sample_point(problem.w_star - 1e-6)
        right = problem.sample_point(problem.w_star + 1e-6)
        assert left[0] == pytest.approx(0.42632, abs=1e-4)
        assert right[0] == pytest.approx(0.26557, abs=1e-4)

    def test_far_field_is_initial_data(self):
        profile = exact_riemann(SOD_LEFT, SOD_RIGHT, np.array([0.0, 1.0]), 0.1, gamma=2.0)
        np.testing.assert_allclose(profile[0], SOD_LEFT)
        np.testing.assert_allclose(profile[1], SOD_RIGHT)

    def test_identical_states(self):
        problem = RiemannProblem((1.0, 0.5, 1.0), (1.0, 0.5, 1.0), gamma=2.0)
        assert problem.p_star == pytest.approx(1.0, rel=1e-10)
        assert problem.w_star == pytest.approx(0.5, rel=1e-10)

    def test_invalid_states(self):
        with pytest.raises(InvalidParameterError):
            RiemannProblem((0.0, 0.0, 1.0), SOD_RIGHT)
        with pytest.raises(InvalidParameterError):
            RiemannProblem((1.0, -20.0, 0.1), (1.0, 20.0, 0.1))

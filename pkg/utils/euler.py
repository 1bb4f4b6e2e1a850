"""First-order finite-volume solver for the 1D compressible Euler equations.

Fluxes (rho w, rho w^2 + p, (E + p) w) with the local Lax-Friedrichs
(Rusanov) numerical flux. This is the eps -> 0 reference for the kinetic
solver; gamma = (d + 2)/d ties it to the velocity dimension.
"""

from typing import Optional, Tuple

import numpy as np

from errors import CFLViolationError, InvalidParameterError, PositivityLossError
from logger import get_logger
from models.fluid import FluidState, SpatialMesh

logger = get_logger(__name__)

SOD_LEFT = (1.0, 0.0, 1.0)
SOD_RIGHT = (0.125, 0.0, 0.1)
CFL_SLACK = 1e-12


def gamma_for_dimension(dim: int) -> float:
    return (dim + 2.0) / dim


def physical_flux(u: np.ndarray, gamma: float) -> np.ndarray:
    rho, mom, energy = u[..., 0], u[..., 1], u[..., 2]
    w = mom / rho
    p = (gamma - 1.0) * (energy - 0.5 * mom * w)
    return np.stack([mom, mom * w + p, (energy + p) * w], axis=-1)


def _wave_speed(u: np.ndarray, gamma: float) -> np.ndarray:
    rho, mom, energy = u[..., 0], u[..., 1], u[..., 2]
    w = mom / rho
    p = (gamma - 1.0) * (energy - 0.5 * mom * w)
    return np.abs(w) + np.sqrt(gamma * p / rho)


def rusanov_flux(left: np.ndarray, right: np.ndarray, gamma: float) -> np.ndarray:
    speed = np.maximum(_wave_speed(left, gamma), _wave_speed(right, gamma))[..., None]
    return 0.5 * (physical_flux(left, gamma) + physical_flux(right, gamma)) - 0.5 * speed * (right - left)


def with_ghosts(values: np.ndarray, boundary: str) -> np.ndarray:
    """Pad one ghost cell per side along axis 0 (periodic or zero-gradient)."""
    if boundary == "periodic":
        return np.concatenate([values[-1:], values, values[:1]], axis=0)
    return np.concatenate([values[:1], values, values[-1:]], axis=0)


def _check_positive(state: FluidState, when: str):
    if np.any(state.density <= 0) or np.any(state.internal_energy <= 0) or not np.all(np.isfinite(state.conserved)):
        raise PositivityLossError(
            f"{when}: min density {float(np.min(state.density)):.3e}, "
            f"min internal energy {float(np.min(state.internal_energy)):.3e}"
        )


def stable_dt(state: FluidState, mesh: SpatialMesh, cfl: float = 0.9) -> float:
    return cfl * mesh.dx / state.max_wave_speed()


def euler_step(state: FluidState, dt: float, mesh: SpatialMesh) -> FluidState:
    """One Rusanov finite-volume step.

    Raises:
        CFLViolationError: dt * max(|w| + c) / dx > 1
        PositivityLossError: density or internal energy nonpositive before or after the step
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    _check_positive(state, "euler_step input")
    courant = dt * state.max_wave_speed() / mesh.dx
    if courant > 1.0 + CFL_SLACK:
        raise CFLViolationError(f"Euler CFL number {courant:.4f} exceeds 1")

    u = with_ghosts(state.conserved, mesh.boundary)
    flux = rusanov_flux(u[:-1], u[1:], state.gamma)
    updated = FluidState(state.conserved - dt / mesh.dx * (flux[1:] - flux[:-1]), state.gamma)
    _check_positive(updated, "euler_step output")
    return updated


def euler_solve(state: FluidState, t_final: float, mesh: SpatialMesh, cfl: float = 0.9) -> FluidState:
    """Advance to t_final with CFL-limited steps (the last one shortened)."""
    t = 0.0
    n_steps = 0
    while t < t_final * (1.0 - 1e-14):
        dt = min(stable_dt(state, mesh, cfl), t_final - t)
        state = euler_step(state, dt, mesh)
        t += dt
        n_steps += 1
    logger.debug(f"euler_solve: reached t={t:.6g} in {n_steps} steps on {mesh!r}")
    return state


def riemann_state(
    mesh: SpatialMesh,
    left: Tuple[float, float, float] = SOD_LEFT,
    right: Tuple[float, float, float] = SOD_RIGHT,
    x0: Optional[float] = None,
    gamma: float = 2.0,
) -> FluidState:
    """Two-state initial data (rho, w, p), left of x0 and right of it (Sod by default)."""
    x0 = 0.5 * (mesh.x_min + mesh.x_max) if x0 is None else x0
    is_left = mesh.centers < x0
    rho = np.where(is_left, left[0], right[0])
    w = np.where(is_left, left[1], right[1])
    p = np.where(is_left, left[2], right[2])
    return FluidState.from_primitive(rho, w, p, gamma)


def density_l1_error(state: FluidState, reference: np.ndarray, mesh: SpatialMesh) -> float:
    """sum |rho - rho_ref| dx."""
    return float(np.sum(np.abs(state.density - reference)) * mesh.dx)

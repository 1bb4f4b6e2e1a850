"""Velocity-space substrate shared by every collision discretization.

Provides:
- Grid construction with the half-open periodic node convention
- Moments (rho, u, T, E) by the uniform midpoint rule
- Analytic and discrete (moment-exact) Maxwellians
- The entropy functional sum_j w_j f_j log f_j
"""

import math
from typing import Optional

import numpy as np

from config import settings
from errors import InvalidMomentsError, InvalidParameterError, NegativeValueError
from logger import get_logger
from models.velocity import Distribution, Moments, VelocityGrid

logger = get_logger(__name__)

# R = lambda * pi on the mapped cube
DEFAULT_TRUNCATION_FACTOR = 2.0 / (3.0 + math.sqrt(2.0))


def default_trunc_radius() -> float:
    return DEFAULT_TRUNCATION_FACTOR * math.pi


def build_grid(
    dim: int,
    n_per_dim: int,
    half_width: float,
    trunc_radius: Optional[float] = None,
) -> VelocityGrid:
    """Build a validated velocity grid.

    Args:
        dim: Velocity dimension d (2 for every collision operator here)
        n_per_dim: Points per axis, even and >= 4
        half_width: L, the grid covers [-L, L)^d
        trunc_radius: R on the mapped cube; defaults to 2*pi/(3 + sqrt(2))

    Returns:
        VelocityGrid: grid with n_per_dim**dim nodes and spacing 2L/n

    Raises:
        InvalidParameterError: odd or too small n, nonpositive sizes, R outside (0, pi]
    """
    if trunc_radius is None:
        trunc_radius = default_trunc_radius()
    if int(dim) != dim or dim < 1:
        raise InvalidParameterError(f"dim must be a positive integer, got {dim}")
    if int(n_per_dim) != n_per_dim or n_per_dim < 4 or n_per_dim % 2:
        raise InvalidParameterError(f"n_per_dim must be an even integer >= 4, got {n_per_dim}")
    if not half_width > 0:
        raise InvalidParameterError(f"half_width must be positive, got {half_width}")
    if not 0 < trunc_radius <= math.pi:
        raise InvalidParameterError(
            f"trunc_radius must lie in (0, pi], got {trunc_radius}"
        )

    grid = VelocityGrid(int(dim), int(n_per_dim), float(half_width), float(trunc_radius))
    logger.debug(f"Built {grid!r} with spacing {grid.spacing:.4g}")
    return grid


def compute_moments(f: Distribution, rho_floor: Optional[float] = None) -> Moments:
    """Density, momentum and energy of f (per spatial cell if batched).

    Quadrature weights are the uniform cell volume h^d, so the map is exactly
    linear in f.
    """
    if rho_floor is None:
        rho_floor = settings.rho_floor
    grid = f.grid
    axes = f.velocity_axes
    w = grid.cell_volume

    density = w * f.values.sum(axis=axes)
    momentum = np.stack(
        [w * (f.values * c).sum(axis=axes) for c in grid.mesh()], axis=-1
    )
    energy = 0.5 * w * (f.values * grid.speed_squared()).sum(axis=axes)
    return Moments(density, momentum, energy, grid.dim, rho_floor)


def _check_positive(m: Moments):
    if np.any(m.density <= 0):
        raise InvalidMomentsError(f"Maxwellian needs rho > 0, got {np.min(m.density)}")
    temperature = m.temperature
    if np.any(temperature <= 0):
        raise InvalidMomentsError(f"Maxwellian needs T > 0, got {np.min(temperature)}")


def _expand(x: np.ndarray, dim: int) -> np.ndarray:
    """Append dim singleton axes so per-cell scalars broadcast over velocities."""
    return np.asarray(x)[(...,) + (None,) * dim]


def maxwellian(m: Moments, grid: VelocityGrid) -> Distribution:
    """Pointwise local Maxwellian rho/(2 pi T)^{d/2} exp(-|v - u|^2 / 2T)."""
    _check_positive(m)
    d = grid.dim
    rho = _expand(m.density, d)
    temp = _expand(m.temperature, d)
    u = m.mean_velocity

    dist2 = 0.0
    for axis, coords in enumerate(grid.mesh()):
        dist2 = dist2 + (coords - _expand(u[..., axis], d)) ** 2
    values = rho / (2.0 * math.pi * temp) ** (d / 2.0) * np.exp(-dist2 / (2.0 * temp))
    return Distribution(grid, values)


def anisotropic_gaussian(
    grid: VelocityGrid,
    density: float = 1.0,
    mean_velocity=None,
    temperatures=(1.5, 0.5),
) -> Distribution:
    """Product Gaussian with one temperature per axis (a non-equilibrium state)."""
    mean_velocity = np.zeros(grid.dim) if mean_velocity is None else np.asarray(mean_velocity, dtype=float)
    temperatures = np.asarray(temperatures, dtype=float)
    if mean_velocity.shape != (grid.dim,) or temperatures.shape != (grid.dim,):
        raise InvalidParameterError(
            f"mean_velocity and temperatures need {grid.dim} components each"
        )
    if not density > 0 or np.any(temperatures <= 0):
        raise InvalidMomentsError("anisotropic Gaussian needs positive density and temperatures")

    values = np.full(grid.shape, float(density))
    for coords, u, temp in zip(grid.mesh(), mean_velocity, temperatures):
        values = values * np.exp(-((coords - u) ** 2) / (2.0 * temp)) / math.sqrt(2.0 * math.pi * temp)
    return Distribution(grid, values)


def discrete_maxwellian(
    m: Moments,
    grid: VelocityGrid,
    max_iterations: int = 20,
    tolerance: float = 1e-14,
) -> Distribution:
    """Maxwellian whose discrete moments equal ``m`` to round-off.

    Newton iteration on g = exp(a + b.v + c|v|^2) started from the analytic
    Maxwellian parameters. On coarse grids the analytic Maxwellian misses its
    own moments by the quadrature error; this one does not.
    """
    _check_positive(m)
    d = grid.dim
    w = grid.cell_volume
    coords = grid.mesh()
    v2 = grid.speed_squared()
    # phi = (1, v, |v|^2/2) are the moment weights, psi = (1, v, |v|^2) the
    # derivatives of the exponent with respect to (a, b, c)
    phi = [np.ones(grid.shape)] + list(coords) + [0.5 * v2]
    psi = [np.ones(grid.shape)] + list(coords) + [v2]

    temp = m.temperature
    u = m.mean_velocity
    a = np.log(m.density / (2.0 * math.pi * temp) ** (d / 2.0)) - np.sum(u * u, axis=-1) / (2.0 * temp)
    theta = np.concatenate([a[..., None], u / temp[..., None], (-0.5 / temp)[..., None]], axis=-1)
    target = m.conserved()
    vel_axes = tuple(range(theta.ndim - 1, theta.ndim - 1 + d))

    def evaluate(params):
        exponent = sum(_expand(params[..., i], d) * psi[i] for i in range(d + 2))
        return np.exp(exponent)

    for _ in range(max_iterations):
        g = evaluate(theta)
        current = np.stack([w * (g * p).sum(axis=vel_axes) for p in phi], axis=-1)
        residual = target - current
        scale = np.max(np.abs(target), axis=-1, keepdims=True)
        if np.all(np.abs(residual) <= tolerance * scale):
            break
        jac = np.stack(
            [
                np.stack([w * (g * p * q).sum(axis=vel_axes) for q in psi], axis=-1)
                for p in phi
            ],
            axis=-2,
        )
        theta = theta + np.linalg.solve(jac, residual[..., None])[..., 0]
    else:
        logger.warning(
            f"discrete_maxwellian: Newton stopped after {max_iterations} iterations, "
            f"residual {float(np.max(np.abs(residual))):.3e}"
        )
        g = evaluate(theta)

    return Distribution(grid, g)


def project_equilibrium(f: Distribution) -> Distribution:
    """M[f]: the discrete Maxwellian carrying the moments of f."""
    return discrete_maxwellian(compute_moments(f), f.grid)


def l1_norm(f: Distribution) -> np.ndarray:
    return f.grid.cell_volume * np.abs(f.values).sum(axis=f.velocity_axes)


def distance_to_equilibrium(f: Distribution) -> np.ndarray:
    """||f - M[f]||_1 / rho, per cell."""
    moments = compute_moments(f)
    eq = discrete_maxwellian(moments, f.grid)
    return l1_norm(f.with_values(f.values - eq.values)) / moments.density


def entropy(f: Distribution, clip_negative: bool = False) -> np.ndarray:
    """H(f) = sum_j w_j f_j log f_j with 0 log 0 = 0.

    Values in [-tol, 0) count as zero. With ``clip_negative`` larger
    negative values are zeroed and reported on the DIAG channel instead of
    raising.

    Raises:
        NegativeValueError: some f_j < -negativity_tolerance
    """
    values = f.values
    lowest = float(values.min()) if values.size else 0.0
    if lowest < -settings.negativity_tolerance:
        if not clip_negative:
            raise NegativeValueError(
                f"entropy needs f >= 0, min value {lowest:.3e} "
                f"(tolerance {settings.negativity_tolerance:.1e})"
            )
        logger.diag(f"entropy: clipped negative values down to {lowest:.3e}")
    positive = np.clip(values, 0.0, None)
    safe = np.where(positive > 0, positive, 1.0)
    integrand = positive * np.log(safe)
    return f.grid.cell_volume * integrand.sum(axis=f.velocity_axes)

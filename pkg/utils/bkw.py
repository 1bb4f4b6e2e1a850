"""BKW self-similar solution of the homogeneous equation, d = 2 Maxwell molecules.

For B = 1/(2 pi):

    f(t, v) = exp(-|v|^2 / 2S) / (2 pi S^2) * (2S - 1 + (1 - S) |v|^2 / 2S),
    S(t) = 1 - exp(-t/8) / 2.

Density 1, zero mean velocity, temperature 1 for all t >= 0; the fourth
moment int |v|^4 f dv is 8 S (2 - S).
"""

import math

import numpy as np

from errors import InvalidParameterError
from models.velocity import Distribution, VelocityGrid


def bkw_scale(t: float) -> float:
    if t < 0:
        raise InvalidParameterError(f"BKW family is defined for t >= 0, got {t}")
    return 1.0 - 0.5 * math.exp(-t / 8.0)


def _profile(speed2: np.ndarray, s: float):
    gauss = np.exp(-speed2 / (2.0 * s)) / (2.0 * math.pi * s * s)
    poly = 2.0 * s - 1.0 + (1.0 - s) * speed2 / (2.0 * s)
    return gauss, poly


def bkw_profile(velocities: np.ndarray, t: float) -> np.ndarray:
    """f(t, v) at arbitrary velocities of shape (..., 2)."""
    velocities = np.asarray(velocities, dtype=float)
    if velocities.shape[-1] != 2:
        raise InvalidParameterError(f"BKW family is implemented for d = 2, got d = {velocities.shape[-1]}")
    gauss, poly = _profile(np.sum(velocities * velocities, axis=-1), bkw_scale(t))
    return gauss * poly


def bkw_distribution(grid: VelocityGrid, t: float) -> Distribution:
    if grid.dim != 2:
        raise InvalidParameterError(f"BKW family is implemented for d = 2, got d = {grid.dim}")
    gauss, poly = _profile(grid.speed_squared(), bkw_scale(t))
    return Distribution(grid, gauss * poly)


def bkw_time_derivative(grid: VelocityGrid, t: float) -> Distribution:
    """d f / dt = (d f / dS)(1 - S)/8, which equals Q(f, f) for the BKW family."""
    if grid.dim != 2:
        raise InvalidParameterError(f"BKW family is implemented for d = 2, got d = {grid.dim}")
    s = bkw_scale(t)
    speed2 = grid.speed_squared()
    gauss, poly = _profile(speed2, s)
    d_gauss = speed2 / (2.0 * s * s) - 2.0 / s
    d_poly = 2.0 - speed2 / (2.0 * s * s)
    d_s = gauss * (d_gauss * poly + d_poly)
    return Distribution(grid, d_s * (1.0 - s) / 8.0)


def bkw_fourth_moment(t: float) -> float:
    s = bkw_scale(t)
    return 8.0 * s * (2.0 - s)


def fourth_moment(f: Distribution) -> np.ndarray:
    """int |v|^4 f dv by the grid quadrature."""
    speed2 = f.grid.speed_squared()
    return f.grid.cell_volume * (f.values * speed2 * speed2).sum(axis=f.velocity_axes)

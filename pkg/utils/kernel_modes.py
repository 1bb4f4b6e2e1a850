"""Kernel modes beta(l, m) of the truncated collision operator in d = 2.

With the Carleman change of variables the operator reads

    beta(l, m) = int_{B_R} int_{B_R} B~(x, y) delta(x . y) e^{i l.x} e^{i m.y} dx dy.

Writing x = r e_phi and slicing the delta along the line y = t e_phi^perp
(Jacobian r * 1/r = 1) leaves a smooth three-dimensional integral over
r in [0, R], phi in [0, 2 pi) and t in [-R, R]. The imaginary parts cancel
by the r -> -r, t -> -t symmetries, so

    beta(l, m) = 4 int_0^pi dphi int_0^R dr int_0^R dt B~(r, t) cos(r l.e) cos(t m.e^perp).

For the Maxwell kernel B~ is constant and the r and t integrals are sinc
factors; otherwise Gauss-Legendre is used in r and t. The angle is always
integrated by the trapezoidal rule, which is spectrally accurate for the
pi-periodic integrand.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from config import settings
from errors import InvalidParameterError, UnsupportedDimensionError
from logger import get_logger
from models.spectral import CollisionKernel, KernelModes
from models.velocity import VelocityGrid
from utils.serialization import kernel_cache_key, read_kernel_modes, write_kernel_modes

logger = get_logger(__name__)

SUPPORTED_DIMENSION = 2
ANGLE_BLOCK = 64


def band_wave_vectors(n_modes: int, dim: int = SUPPORTED_DIMENSION) -> np.ndarray:
    """All k in [-N, N]^d in row-major order, shape (P^d, d)."""
    p = np.arange(-n_modes, n_modes + 1)
    mesh = np.meshgrid(*([p] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def sinc(x):
    """sin(x)/x."""
    return np.sinc(x / np.pi)


def quadrature_sizes(n_modes: int, trunc_radius: float, level: int) -> tuple:
    """Angle and radial node counts for a quadrature level.

    The largest phase is R |k| <= R N sqrt(2); level 1 resolves it with a
    margin and each level multiplies both counts.
    """
    phase = trunc_radius * n_modes * math.sqrt(2.0)
    n_angle = level * (8 * math.ceil(phase) + 32)
    n_radial = level * (math.ceil(phase / 2.0) + 12)
    return n_angle, n_radial


def half_period_angles(n_angle: int):
    phi = np.pi * np.arange(n_angle) / n_angle
    return phi, np.full(n_angle, np.pi / n_angle)


def wave_projections(k: np.ndarray, phi: np.ndarray):
    """(k . e_phi, k . e_phi^perp), each (P^d, n_angle)."""
    cos, sin = np.cos(phi), np.sin(phi)
    along = k[:, :1] * cos + k[:, 1:2] * sin
    across = -k[:, :1] * sin + k[:, 1:2] * cos
    return along, across


def _maxwell_block(k, phi, weights, trunc_radius, weight_value):
    along, across = wave_projections(k, phi)
    left = sinc(trunc_radius * along) * weights
    right = sinc(trunc_radius * across)
    return 4.0 * trunc_radius ** 2 * weight_value * (left @ right.T)


def _general_block(k, phi, weights, radial, radial_weights, kernel):
    along, across = wave_projections(k, phi)
    r = radial[:, None]
    t = radial[None, :]
    inner = radial_weights[:, None] * radial_weights[None, :] * kernel.carleman_weight(r, t)
    table = np.zeros((k.shape[0], k.shape[0]))
    for q in range(len(phi)):
        cos_l = np.cos(np.outer(along[:, q], radial))
        cos_m = np.cos(np.outer(across[:, q], radial))
        table += weights[q] * (cos_l @ inner @ cos_m.T)
    return 4.0 * table


def _beta_table(n_modes, trunc_radius, kernel, level, threads):
    k = band_wave_vectors(n_modes).astype(float)
    n_angle, n_radial = quadrature_sizes(n_modes, trunc_radius, level)
    phi, weights = half_period_angles(n_angle)

    if kernel.is_decoupled:
        weight_value = float(kernel.carleman_weight(0.0, 1.0))
        return _maxwell_block(k, phi, weights, trunc_radius, weight_value)

    nodes, node_weights = np.polynomial.legendre.leggauss(n_radial)
    radial = 0.5 * trunc_radius * (nodes + 1.0)
    radial_weights = 0.5 * trunc_radius * node_weights

    blocks = [slice(start, start + ANGLE_BLOCK) for start in range(0, n_angle, ANGLE_BLOCK)]

    def work(block):
        return _general_block(k, phi[block], weights[block], radial, radial_weights, kernel)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    table = np.zeros((k.shape[0], k.shape[0]))
    for part in parts:
        table += part
    return table


def _symmetrize(table: np.ndarray) -> np.ndarray:
    """Enforce beta(l, -m) = beta(l, m) and beta(-l, m) = beta(l, m) bitwise.

    Both hold for every angle-independent kernel; with them the l = -m terms
    of the k = 0 mode cancel exactly.
    """
    size = table.shape[0]
    mirror = np.arange(size)[::-1]  # row-major index of -k is P^d - 1 - index of k
    table = 0.5 * (table + table[:, mirror])
    table = 0.5 * (table + table[mirror, :])
    return table


def _cache_path(descriptor: dict) -> Path:
    return Path(settings.kernel_cache_dir) / f"{kernel_cache_key(descriptor)}.kmod"


def compute_kernel_modes(
    grid: VelocityGrid,
    kernel: Optional[CollisionKernel] = None,
    trunc_radius: Optional[float] = None,
    quadrature_level: Optional[int] = None,
    use_cache: Optional[bool] = None,
    threads: Optional[int] = None,
) -> KernelModes:
    """Build (or load from the disk cache) the kernel-mode table for a grid.

    Args:
        grid: Velocity grid; only n_per_dim and dim matter (beta lives on the mapped cube)
        kernel: Collision kernel (default Maxwell, B = 1/(2 pi))
        trunc_radius: R on the mapped cube (default grid.trunc_radius)
        quadrature_level: Resolution multiplier (default settings.quadrature_level)
        use_cache: Read and write the content-addressed cache (default settings.kernel_cache_enabled)
        threads: Worker threads over angle blocks (default settings.threads)

    Returns:
        KernelModes: table of beta(l, m), with the level+1 self-check defect

    Raises:
        UnsupportedDimensionError: grid.dim != 2
        InvalidParameterError: quadrature_level < 1
    """
    kernel = kernel or CollisionKernel.maxwell()
    trunc_radius = grid.trunc_radius if trunc_radius is None else float(trunc_radius)
    level = settings.quadrature_level if quadrature_level is None else int(quadrature_level)
    use_cache = settings.kernel_cache_enabled if use_cache is None else use_cache
    threads = threads or settings.threads

    if grid.dim != SUPPORTED_DIMENSION:
        raise UnsupportedDimensionError(
            f"kernel modes are implemented for d = 2 only, got d = {grid.dim}"
        )
    if level < 1:
        raise InvalidParameterError(f"quadrature_level must be >= 1, got {level}")

    keyed = KernelModes(grid.n_modes, grid.dim, kernel, trunc_radius, level, np.zeros((0, 0)))
    descriptor = keyed.cache_descriptor()
    path = _cache_path(descriptor)
    if use_cache and path.exists():
        km = read_kernel_modes(path)
        logger.info(f"Loaded kernel modes {kernel.descriptor()} N={grid.n_modes} from {path}")
        return km

    table = _symmetrize(_beta_table(grid.n_modes, trunc_radius, kernel, level, threads))

    refined = _symmetrize(_beta_table(grid.n_modes, trunc_radius, kernel, level + 1, threads))
    defect = float(np.max(np.abs(refined - table)))
    if defect > settings.quadrature_self_check_tolerance:
        logger.warning(
            f"Kernel-mode quadrature level {level} too low: level {level + 1} differs by {defect:.3e}"
        )
    logger.diag(f"kernel modes {kernel.descriptor()} N={grid.n_modes} level={level}: self-check defect {defect:.3e}")

    km = KernelModes(grid.n_modes, grid.dim, kernel, trunc_radius, level, table, defect)
    logger.info(
        f"Built kernel modes {kernel.descriptor()} N={grid.n_modes} R={trunc_radius:.6g} "
        f"({table.shape[0]}x{table.shape[1]} table)"
    )
    if use_cache:
        write_kernel_modes(path, km)
    return km


def maxwell_beta_origin(trunc_radius: float) -> float:
    """Closed form beta(0, 0) = 4 R^2 for the Maxwell kernel (B~ = 1/pi)."""
    return 4.0 * trunc_radius ** 2

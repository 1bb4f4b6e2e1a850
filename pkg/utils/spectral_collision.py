"""Fourier spectral collision operator.

Provides:
- forward/inverse transforms between grid samples and Fourier coefficients
  on the mapped cube [-pi, pi)^d
- the direct O(N^{2d}) evaluation of Q_k = sum_{l+m=k} beta_hat(l, m) f_l f_m
- rank-A separation of the kernel-mode table and the O(A N^d log N)
  evaluation by zero-padded FFT convolutions
- a brute-force quadrature of the collision integral used as an oracle
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Union

import numpy as np
from scipy import fft, linalg

from config import settings
from errors import (
    GridMismatchError,
    InvalidParameterError,
    RankExceedsTableError,
    ResourceGuardError,
    UnsupportedDimensionError,
)
from logger import get_logger
from models.spectral import CollisionKernel, KernelModes, SeparatedKernel, SpectralCoefficients
from models.velocity import Distribution, VelocityGrid
from utils.kernel_modes import (
    band_wave_vectors,
    half_period_angles,
    sinc,
    wave_projections,
)

logger = get_logger(__name__)

CELL_BLOCK = 16
DECOMPOSITION_METHODS = ("svd", "angular")
TRUNCATIONS = ("carleman", "relative", "none")
ORACLE_FORMS = ("strong", "weak")


def _alternating_sign(grid: VelocityGrid) -> np.ndarray:
    """(-1)^(k_1 + ... + k_d) over the centered mode array."""
    k = np.arange(grid.n_per_dim) - grid.n_per_dim // 2
    per_axis = np.where(k % 2 == 0, 1.0, -1.0)
    sign = per_axis
    for _ in range(grid.dim - 1):
        sign = np.multiply.outer(sign, per_axis)
    return sign


def forward_transform(f: Distribution, threads: Optional[int] = None) -> SpectralCoefficients:
    """Coefficients f_k with f(xi_j) = sum_k f_k exp(i k . xi_j) exactly.

    Nodes on the mapped cube are xi_j = -pi + 2 pi j / n, so the coefficients
    are the DFT of the samples divided by n^d and multiplied by (-1)^{sum k}.
    """
    grid = f.grid
    axes = f.velocity_axes
    raw = fft.fftn(f.values, axes=axes, workers=threads or settings.threads)
    centered = fft.fftshift(raw, axes=axes)
    return SpectralCoefficients(grid, centered * _alternating_sign(grid) / grid.n_per_dim ** grid.dim)


def inverse_transform(c: SpectralCoefficients, threads: Optional[int] = None) -> Distribution:
    """Grid samples of sum_k f_k exp(i k . xi).

    Imaginary parts above ``settings.imaginary_tolerance`` (relative to the
    largest sample) mean the coefficients were not Hermitian; they are
    dropped with a warning.
    """
    grid = c.grid
    axes = c.velocity_axes
    raw = fft.ifftshift(c.coeffs * _alternating_sign(grid), axes=axes)
    values = fft.ifftn(raw, axes=axes, workers=threads or settings.threads) * grid.n_per_dim ** grid.dim
    scale = max(1.0, float(np.max(np.abs(values.real)))) if values.size else 1.0
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > settings.imaginary_tolerance * scale:
        logger.warning(f"inverse_transform: imaginary residue {residue:.3e} discarded (input not Hermitian)")
    return Distribution(grid, values.real)


def resample(c: SpectralCoefficients, n_target: int) -> SpectralCoefficients:
    """Same band-limited function on a grid with n_target points per axis.

    Modes beyond the target band are dropped; new modes are zero. Nyquist
    modes are never carried over.
    """
    grid = c.grid
    if n_target % 2 or n_target < 4:
        raise InvalidParameterError(f"n_target must be an even integer >= 4, got {n_target}")
    target = VelocityGrid(grid.dim, n_target, grid.half_width, grid.trunc_radius)
    keep = min(grid.n_modes, target.n_modes)
    src = slice(grid.n_per_dim // 2 - keep, grid.n_per_dim // 2 + keep + 1)
    dst = slice(n_target // 2 - keep, n_target // 2 + keep + 1)
    coeffs = np.zeros(c.cell_shape + target.shape, dtype=complex)
    coeffs[(Ellipsis,) + (dst,) * grid.dim] = c.coeffs[(Ellipsis,) + (src,) * grid.dim]
    return SpectralCoefficients(target, coeffs)


def _check_operands(grid: VelocityGrid, km: KernelModes):
    if not km.matches(grid):
        raise GridMismatchError(
            f"kernel modes (d={km.dim}, N={km.n_modes}, R={km.trunc_radius}) "
            f"do not match {grid!r}"
        )


def spectral_collision_direct(c: SpectralCoefficients, km: KernelModes) -> SpectralCoefficients:
    """Q_k = sum_{l+m=k} beta_hat(l, m) f_l f_m over the band, by direct summation.

    Loops over l and handles every admissible m for that l as one array slice.

    Raises:
        GridMismatchError: km built for another N, d or R
    """
    _check_operands(c.grid, km)
    d, n_modes, size = km.dim, km.n_modes, km.band_size
    band = c.band()
    beta_hat = km.beta_hat.reshape((size,) * (2 * d))
    out = np.zeros_like(band)
    expand = (Ellipsis,) + (None,) * d

    for l in itertools.product(range(size), repeat=d):
        m_slices = tuple(slice(max(0, n_modes - li), min(size, size + n_modes - li)) for li in l)
        k_slices = tuple(
            slice(s.start + li - n_modes, s.stop + li - n_modes) for s, li in zip(m_slices, l)
        )
        f_l = band[(Ellipsis,) + l]
        out[(Ellipsis,) + k_slices] += (
            beta_hat[l + m_slices] * band[(Ellipsis,) + m_slices] * f_l[expand]
        )
    return SpectralCoefficients.from_band(c.grid, out)


def decompose_kernel(km: KernelModes, rank: int, method: str = "svd") -> SeparatedKernel:
    """Rank-A separation beta(l, m) ~ sum_p alpha_p(l) alpha'_p(m).

    ``svd`` truncates the singular value decomposition of the table (optimal
    in the 2-norm, any kernel). ``angular`` uses A trapezoidal angles of the
    sinc representation and needs a decoupled (Maxwell) kernel. Either way
    the max-norm reconstruction error is computed against the full table.

    Raises:
        InvalidParameterError: rank < 1, unknown method, or angular on a coupled kernel
        RankExceedsTableError: svd rank above the table size
    """
    size = km.table.shape[0]
    if rank < 1:
        raise InvalidParameterError(f"rank must be >= 1, got {rank}")
    if method not in DECOMPOSITION_METHODS:
        raise InvalidParameterError(f"unknown decomposition method {method!r}")

    singular_values = None
    if method == "svd":
        if rank > size:
            raise RankExceedsTableError(f"rank {rank} exceeds table size {size}")
        u, s, vh = linalg.svd(km.table, full_matrices=False)
        left = (u[:, :rank] * s[:rank]).T
        right = vh[:rank]
        singular_values = s
    else:
        if not km.kernel.is_decoupled:
            raise InvalidParameterError(
                f"angular separation needs a decoupled kernel, got {km.kernel.descriptor()}"
            )
        k = band_wave_vectors(km.n_modes, km.dim).astype(float)
        phi, weights = half_period_angles(rank)
        along, across = wave_projections(k, phi)
        weight_value = float(km.kernel.carleman_weight(0.0, 1.0))
        radius = km.trunc_radius
        left = (4.0 * radius ** 2 * weight_value * weights * sinc(radius * along)).T
        right = sinc(radius * across).T

    error = float(np.max(np.abs(km.table - left.T @ right)))
    logger.diag(f"decompose_kernel {method} rank={rank}: reconstruction error {error:.3e}")
    return SeparatedKernel(km, left, right, error, method, singular_values)


def select_rank(km: KernelModes, tolerance: float) -> int:
    """Smallest A whose truncated SVD has max-norm error <= tolerance * sigma_1.

    Every entry of the remainder is bounded by its spectral norm sigma_{A+1}.
    """
    s = linalg.svd(km.table, compute_uv=False)
    above = np.flatnonzero(s > tolerance * s[0])
    return int(above[-1] + 1) if above.size else 1


def spectral_collision_fast(
    c: SpectralCoefficients, sk: SeparatedKernel, threads: Optional[int] = None
) -> SpectralCoefficients:
    """Q_k from A + 1 zero-padded FFT convolutions.

    Gain: sum_p conv(alpha_p f, alpha'_p f); loss: conv(f, beta(m, m) f).
    Padding to at least 2(2N+1) per axis makes every convolution linear, so
    the only difference from the direct sum is the rank truncation.
    """
    km = sk.modes
    _check_operands(c.grid, km)
    d, n_modes, size = km.dim, km.n_modes, km.band_size
    workers = threads or settings.threads
    band = c.band()
    cell_shape = band.shape[: band.ndim - d]
    flat = band.reshape((-1,) + (size,) * d)

    padded = (fft.next_fast_len(2 * size),) * d
    axes = tuple(range(-d, 0))
    left = sk.left.reshape((sk.rank,) + (size,) * d)
    right = sk.right.reshape((sk.rank,) + (size,) * d)
    diagonal = sk.diagonal.reshape((size,) * d)
    window = (slice(None),) + (slice(n_modes, 3 * n_modes + 1),) * d

    out = np.empty_like(flat)
    for start in range(0, flat.shape[0], CELL_BLOCK):
        f = flat[start: start + CELL_BLOCK]
        gain_l = fft.fftn(left[None] * f[:, None], s=padded, axes=axes, workers=workers)
        gain_r = fft.fftn(right[None] * f[:, None], s=padded, axes=axes, workers=workers)
        spectrum = np.sum(gain_l * gain_r, axis=1)
        spectrum -= fft.fftn(f, s=padded, axes=axes, workers=workers) * fft.fftn(
            diagonal * f, s=padded, axes=axes, workers=workers
        )
        out[start: start + CELL_BLOCK] = fft.ifftn(spectrum, axes=axes, workers=workers)[window]

    return SpectralCoefficients.from_band(c.grid, out.reshape(cell_shape + (size,) * d))


def collision_operator(
    f: Distribution,
    operator: Union[KernelModes, SeparatedKernel],
    threads: Optional[int] = None,
) -> Distribution:
    """Physical collision term Q(f, f) on the velocity grid.

    The spectral operators work on the mapped cube; with v = s xi and
    s = L/pi the physical operator is s^{d + alpha} times the mapped one.
    """
    c = forward_transform(f, threads)
    if isinstance(operator, SeparatedKernel):
        q = spectral_collision_fast(c, operator, threads)
    else:
        q = spectral_collision_direct(c, operator)
    values = inverse_transform(q, threads).values
    return f.with_values(values * f.grid.scale ** (f.grid.dim + operator.kernel.alpha))


def _interpolator(values: np.ndarray, grid: VelocityGrid):
    """Periodic bilinear interpolation of 2-D grid samples.

    Returns a function mapping positions (..., 2) to (values, corner indices,
    corner weights); the last two are what the weak-form deposit needs.
    """
    n = grid.n_per_dim

    def corners(points):
        u = (points + grid.half_width) / grid.spacing
        base = np.floor(u)
        frac = u - base
        base = base.astype(np.int64) % n
        up = (base + 1) % n
        idx = []
        wts = []
        for cx, wx in ((base[..., 0], 1.0 - frac[..., 0]), (up[..., 0], frac[..., 0])):
            for cy, wy in ((base[..., 1], 1.0 - frac[..., 1]), (up[..., 1], frac[..., 1])):
                idx.append(cx * n + cy)
                wts.append(wx * wy)
        return idx, wts

    flat = values.ravel()

    def evaluate(points):
        idx, wts = corners(points)
        return sum(w * flat[i] for i, w in zip(idx, wts))

    return evaluate, corners


def _minimal_image(diff: np.ndarray, half_width: float) -> np.ndarray:
    return (diff + half_width) % (2.0 * half_width) - half_width


def collision_quadrature_oracle(
    f: Distribution,
    kernel: Optional[CollisionKernel] = None,
    trunc_radius: Optional[float] = None,
    n_angle: int = 32,
    refine: int = 1,
    truncation: str = "carleman",
    form: str = "strong",
    force: bool = False,
    threads: Optional[int] = None,
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Distribution:
    """Brute-force quadrature of Q(f, f)(v) = int int B [f' f'_* - f f_*] dsigma dv_*.

    Sums over v_* grid nodes (minimal periodic image of v - v_*) and n_angle
    uniform sigma angles; f' and f'_* come from periodic bilinear
    interpolation. ``truncation="carleman"`` keeps collisions with
    |v' - v| <= R and |v'_* - v| <= R (the domain of the kernel modes),
    ``"relative"`` keeps |v - v_*| <= R; R is given on the mapped cube.
    ``"none"`` keeps every collision.
    ``refine`` runs the v_* sum and the interpolation on a grid refined by
    trigonometric upsampling. ``form="weak"`` deposits the gain at v' with
    the transposed interpolation weights, which conserves mass exactly.

    ``profile`` maps velocities of shape (..., 2) to values of f. When given,
    f, f_*, f' and f'_* are evaluated from it exactly, v_* runs over the
    (refined) nodes without periodic images, and ``f`` only supplies the
    output grid. For a profile that decays inside the box this converges
    spectrally in the node spacing.

    Raises:
        ResourceGuardError: n_per_dim > settings.oracle_max_points and not force
        UnsupportedDimensionError: d != 2
        InvalidParameterError: unknown truncation or form, weak form with refine > 1
            or with a profile
    """
    grid = f.grid
    kernel = kernel or CollisionKernel.maxwell()
    if grid.dim != 2:
        raise UnsupportedDimensionError(f"quadrature oracle supports d = 2 only, got d = {grid.dim}")
    if grid.n_per_dim > settings.oracle_max_points and not force:
        raise ResourceGuardError(
            f"quadrature oracle refuses n_per_dim={grid.n_per_dim} > {settings.oracle_max_points} "
            f"(pass force=True to override)"
        )
    if truncation not in TRUNCATIONS:
        raise InvalidParameterError(f"unknown truncation {truncation!r}")
    if form not in ORACLE_FORMS:
        raise InvalidParameterError(f"unknown oracle form {form!r}")
    if refine < 1 or (form == "weak" and refine != 1):
        raise InvalidParameterError(f"refine must be >= 1 (and 1 for the weak form), got {refine}")
    if form == "weak" and profile is not None:
        raise InvalidParameterError("the weak form deposits on grid samples and takes no profile")
    if f.cell_shape:
        raise InvalidParameterError("quadrature oracle takes a single-cell distribution")

    radius = (grid.trunc_radius if trunc_radius is None else float(trunc_radius)) * grid.scale
    if profile is not None:
        fine_grid = VelocityGrid(grid.dim, grid.n_per_dim * refine, grid.half_width, grid.trunc_radius)
        fine_values = np.asarray(profile(fine_grid.nodes), dtype=float)
        interpolate = profile
        corners = None
    else:
        if refine > 1:
            fine = inverse_transform(resample(forward_transform(f), grid.n_per_dim * refine))
        else:
            fine = f
        fine_grid = fine.grid
        fine_values = fine.values.ravel()
        interpolate, corners = _interpolator(fine.values, fine_grid)
    fine_nodes = fine_grid.nodes

    theta = 2.0 * np.pi * np.arange(n_angle) / n_angle
    sigma = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    weight = fine_grid.cell_volume * 2.0 * np.pi / n_angle

    nodes = grid.nodes
    out_values = f.values.ravel() if profile is None else np.asarray(profile(nodes), dtype=float)
    result = np.zeros(grid.n_nodes)

    def collisions(index):
        v = nodes[index]
        g = v - fine_nodes
        if profile is None:
            g = _minimal_image(g, grid.half_width)
        speed = np.linalg.norm(g, axis=1)
        center = v - 0.5 * g
        half = 0.5 * speed[:, None, None] * sigma[None]
        post = center[:, None, :] + half
        post_star = center[:, None, :] - half
        if truncation == "carleman":
            mask = (np.linalg.norm(post - v, axis=-1) <= radius) & (
                np.linalg.norm(post_star - v, axis=-1) <= radius
            )
        elif truncation == "relative":
            mask = np.broadcast_to((speed <= radius)[:, None], post.shape[:2])
        else:
            mask = 1.0
        rate = weight * kernel.b(speed)[:, None] * mask
        return post, post_star, rate

    def strong_node(index):
        post, post_star, rate = collisions(index)
        gain = interpolate(post) * interpolate(post_star)
        loss = out_values[index] * fine_values[:, None]
        return float(np.sum(rate * (gain - loss)))

    def weak_node(index):
        post, _, rate = collisions(index)
        flux = rate * out_values[index] * fine_values[:, None]
        idx, wts = corners(post)
        deposit = np.zeros(grid.n_nodes)
        for i, w in zip(idx, wts):
            np.add.at(deposit, i.ravel(), (w * flux).ravel())
        deposit[index] -= float(np.sum(flux))
        return deposit

    workers = threads or settings.threads
    indices = range(grid.n_nodes)
    if form == "strong":
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                result[:] = list(pool.map(strong_node, indices))
        else:
            result[:] = [strong_node(i) for i in indices]
    else:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(weak_node, indices))
        else:
            parts = [weak_node(i) for i in indices]
        for part in parts:
            result += part

    logger.debug(
        f"quadrature oracle n={grid.n_per_dim} refine={refine} n_angle={n_angle} "
        f"{truncation}/{form}: max|Q| = {float(np.max(np.abs(result))):.3e}"
    )
    return f.with_values(result.reshape(grid.shape))

import math
from typing import Optional

import numpy as np

from models.velocity import VelocityGrid


class CollisionKernel:
    """Collision kernel B(|v - v*|) = c_alpha |v - v*|^alpha (angle independent).

    ``maxwell`` is the constant kernel 1/(2 pi) (alpha = 0); ``vhs`` is the
    variable-hard-sphere family.
    """

    def __init__(self, kind: str = "maxwell", alpha: float = 0.0, c_alpha: Optional[float] = None):
        self.kind = kind
        self.alpha = 0.0 if kind == "maxwell" else float(alpha)
        self.c_alpha = float(c_alpha) if c_alpha is not None else 1.0 / (2.0 * math.pi)

    @staticmethod
    def maxwell() -> "CollisionKernel":
        return CollisionKernel("maxwell")

    @property
    def is_decoupled(self) -> bool:
        """Carleman weight B~(x, y) splits as a(|x|) b(|y|) (true for alpha = 0)."""
        return self.alpha == 0.0

    def b(self, relative_speed):
        return self.c_alpha * np.power(relative_speed, self.alpha)

    def carleman_weight(self, r, t, dim: int = 2):
        """B~ for orthogonal x, y with |x| = r, |y| = t: 2^{d-1} B(|x + y|) |x + y|^{2-d}."""
        speed = np.sqrt(r * r + t * t)
        return 2.0 ** (dim - 1) * self.b(speed) * speed ** (2 - dim)

    def descriptor(self) -> str:
        return f"{self.kind}(alpha={self.alpha!r},c={self.c_alpha!r})"

    def __eq__(self, other):
        if not isinstance(other, CollisionKernel):
            return NotImplemented
        return self.descriptor() == other.descriptor()

    def __hash__(self):
        return hash(self.descriptor())

    def __repr__(self):
        return f"CollisionKernel({self.descriptor()})"

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "c_alpha": self.c_alpha}

    @staticmethod
    def from_dict(data: dict):
        return CollisionKernel(data["kind"], data.get("alpha", 0.0), data.get("c_alpha"))


class SpectralCoefficients:
    """Fourier coefficients of f on the mapped cube.

    ``coeffs`` holds every DFT mode k in {-n/2, ..., n/2 - 1}^d in centered
    order (index i <-> k = i - n/2), with optional leading cell axes. The
    symmetric band |k_i| <= N = n/2 - 1 is what the collision operators use.
    """

    def __init__(self, grid: VelocityGrid, coeffs: np.ndarray):
        self.grid = grid
        self.coeffs = np.asarray(coeffs, dtype=complex)

    @property
    def velocity_axes(self) -> tuple:
        nd = self.coeffs.ndim
        return tuple(range(nd - self.grid.dim, nd))

    @property
    def cell_shape(self) -> tuple:
        return self.coeffs.shape[: self.coeffs.ndim - self.grid.dim]

    def band(self) -> np.ndarray:
        """Coefficients with |k_i| <= N, shape (*cells, 2N+1, ..., 2N+1)."""
        index = (Ellipsis,) + (slice(1, None),) * self.grid.dim
        return self.coeffs[index]

    @staticmethod
    def from_band(grid: VelocityGrid, band: np.ndarray) -> "SpectralCoefficients":
        """Embed band coefficients, Nyquist modes set to zero."""
        band = np.asarray(band, dtype=complex)
        cells = band.shape[: band.ndim - grid.dim]
        coeffs = np.zeros(cells + grid.shape, dtype=complex)
        coeffs[(Ellipsis,) + (slice(1, None),) * grid.dim] = band
        return SpectralCoefficients(grid, coeffs)

    def mode(self, k) -> complex:
        """Coefficient of wave vector k (single-cell coefficients)."""
        offset = self.grid.n_per_dim // 2
        return complex(self.coeffs[tuple(int(ki) + offset for ki in k)])

    def l1_norm(self) -> np.ndarray:
        """sum_k |f_k| over the band, per cell."""
        band = self.band()
        axes = tuple(range(band.ndim - self.grid.dim, band.ndim))
        return np.abs(band).sum(axis=axes)


class KernelModes:
    """Kernel-mode table beta(l, m) over the band multi-indices.

    ``table`` is (P^d, P^d) with P = 2N + 1, rows l and columns m flattened
    row-major over [-N, N]^d. beta_hat(l, m) = beta(l, m) - beta(m, m).
    """

    def __init__(
        self,
        n_modes: int,
        dim: int,
        kernel: CollisionKernel,
        trunc_radius: float,
        quadrature_level: int,
        table: np.ndarray,
        self_check_defect: Optional[float] = None,
    ):
        self.n_modes = int(n_modes)
        self.dim = int(dim)
        self.kernel = kernel
        self.trunc_radius = float(trunc_radius)
        self.quadrature_level = int(quadrature_level)
        self.table = np.asarray(table)
        self.self_check_defect = self_check_defect

    @property
    def band_size(self) -> int:
        return 2 * self.n_modes + 1

    @property
    def diagonal(self) -> np.ndarray:
        """beta(m, m) per column m."""
        return np.diagonal(self.table).copy()

    @property
    def beta_hat(self) -> np.ndarray:
        return self.table - self.diagonal[None, :]

    def wave_vectors(self) -> np.ndarray:
        p = np.arange(-self.n_modes, self.n_modes + 1)
        mesh = np.meshgrid(*([p] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def index_of(self, k) -> int:
        flat = 0
        for ki in k:
            flat = flat * self.band_size + (int(ki) + self.n_modes)
        return flat

    def beta(self, l, m) -> complex:
        return complex(self.table[self.index_of(l), self.index_of(m)])

    def matches(self, grid: VelocityGrid) -> bool:
        """beta depends on N, d and R only, not on the physical half width."""
        return (
            grid.dim == self.dim
            and grid.n_modes == self.n_modes
            and math.isclose(grid.trunc_radius, self.trunc_radius, rel_tol=1e-12)
        )

    def cache_descriptor(self) -> dict:
        return {
            "dim": self.dim,
            "n_modes": self.n_modes,
            "trunc_radius": repr(self.trunc_radius),
            "kernel": self.kernel.descriptor(),
            "quadrature_level": self.quadrature_level,
        }


class SeparatedKernel:
    """Rank-A factorization beta(l, m) ~ sum_p alpha_p(l) alpha'_p(m).

    ``diagonal`` keeps the exact beta(m, m) for the loss term.
    ``reconstruction_error`` is the max over the table of
    |beta - sum_p alpha_p alpha'_p|, computed when the factorization is built.
    """

    def __init__(
        self,
        modes: KernelModes,
        left: np.ndarray,
        right: np.ndarray,
        reconstruction_error: float,
        method: str = "svd",
        singular_values: Optional[np.ndarray] = None,
    ):
        self.modes = modes
        self.left = np.asarray(left)
        self.right = np.asarray(right)
        self.reconstruction_error = float(reconstruction_error)
        self.method = method
        self.singular_values = singular_values

    @property
    def rank(self) -> int:
        return self.left.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.modes.diagonal

    @property
    def kernel(self) -> CollisionKernel:
        return self.modes.kernel

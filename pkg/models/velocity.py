import math
from typing import Optional, Tuple

import numpy as np

from errors import DegenerateDensityError


class VelocityGrid:
    """Uniform half-open Cartesian velocity lattice on [-L, L)^d.

    Node j along an axis sits at -L + j*h, h = 2L/n; the +L endpoint is
    dropped so the node set is periodic. Every node except those with a
    coordinate equal to -L has its mirror image in the grid.
    ``trunc_radius`` is measured on the mapped cube [-pi, pi)^d.
    """

    def __init__(
        self,
        dim: int,
        n_per_dim: int,
        half_width: float,
        trunc_radius: float,
    ):
        self.dim = int(dim)
        self.n_per_dim = int(n_per_dim)
        self.half_width = float(half_width)
        self.trunc_radius = float(trunc_radius)

        self.spacing = 2.0 * self.half_width / self.n_per_dim
        self.axis = -self.half_width + self.spacing * np.arange(self.n_per_dim)
        self.shape = (self.n_per_dim,) * self.dim
        self.cell_volume = self.spacing ** self.dim
        # v = scale * xi maps [-pi, pi)^d onto [-L, L)^d
        self.scale = self.half_width / math.pi
        self.n_modes = self.n_per_dim // 2 - 1

    @property
    def n_nodes(self) -> int:
        return self.n_per_dim ** self.dim

    def mesh(self) -> Tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays of shape ``self.shape`` (ij indexing)."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @property
    def nodes(self) -> np.ndarray:
        """Node velocities in row-major order, shape (n_nodes, dim)."""
        return np.stack([c.ravel() for c in self.mesh()], axis=-1)

    def speed_squared(self) -> np.ndarray:
        return sum(c * c for c in self.mesh())

    def mapped_axis(self) -> np.ndarray:
        """Axis nodes on the mapped cube [-pi, pi)."""
        return self.axis / self.scale

    def key(self) -> tuple:
        return (self.dim, self.n_per_dim, self.half_width, self.trunc_radius)

    def __eq__(self, other):
        if not isinstance(other, VelocityGrid):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return (
            f"VelocityGrid(dim={self.dim}, n_per_dim={self.n_per_dim}, "
            f"half_width={self.half_width}, trunc_radius={self.trunc_radius})"
        )

    def to_dict(self):
        return {
            "dim": self.dim,
            "n_per_dim": self.n_per_dim,
            "half_width": self.half_width,
            "trunc_radius": self.trunc_radius,
        }

    @staticmethod
    def from_dict(data: dict):
        return VelocityGrid(
            dim=data["dim"],
            n_per_dim=data["n_per_dim"],
            half_width=data["half_width"],
            trunc_radius=data["trunc_radius"],
        )


class Distribution:
    """Real samples of f on a velocity grid.

    ``values`` has shape ``(*cells, *grid.shape)``; the leading axes (if any)
    index spatial cells.
    """

    def __init__(self, grid: VelocityGrid, values: np.ndarray):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        if self.values.shape[self.values.ndim - grid.dim:] != grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not end with grid shape {grid.shape}"
            )

    @property
    def cell_shape(self) -> tuple:
        return self.values.shape[: self.values.ndim - self.grid.dim]

    @property
    def velocity_axes(self) -> tuple:
        return tuple(range(self.values.ndim - self.grid.dim, self.values.ndim))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def min_value(self) -> float:
        return float(self.values.min())

    def with_values(self, values: np.ndarray) -> "Distribution":
        return Distribution(self.grid, values)

    def copy(self) -> "Distribution":
        return Distribution(self.grid, self.values.copy())

    def __repr__(self):
        return f"Distribution(grid={self.grid!r}, shape={self.values.shape})"


class Moments:
    """Density, momentum and energy of a distribution (per cell if batched).

    Mean velocity and temperature are derived on access and are only
    defined where rho > rho_floor.
    """

    def __init__(
        self,
        density,
        momentum,
        energy,
        dim: int,
        rho_floor: float = 1e-12,
    ):
        self.density = np.asarray(density, dtype=float)
        self.momentum = np.asarray(momentum, dtype=float)
        self.energy = np.asarray(energy, dtype=float)
        self.dim = int(dim)
        self.rho_floor = float(rho_floor)

    @property
    def is_degenerate(self) -> bool:
        return bool(np.any(self.density <= self.rho_floor))

    def _require_density(self, what: str):
        if self.is_degenerate:
            raise DegenerateDensityError(
                f"{what} undefined: density {float(np.min(self.density)):.3e} <= "
                f"rho_floor {self.rho_floor:.1e}"
            )

    @property
    def mean_velocity(self) -> np.ndarray:
        self._require_density("mean velocity")
        return self.momentum / self.density[..., None]

    @property
    def temperature(self) -> np.ndarray:
        self._require_density("temperature")
        u = self.mean_velocity
        kinetic = 0.5 * self.density * np.sum(u * u, axis=-1)
        return 2.0 * (self.energy - kinetic) / (self.dim * self.density)

    @property
    def pressure(self) -> np.ndarray:
        return self.density * self.temperature

    def conserved(self) -> np.ndarray:
        """Stacked (rho, rho*u, E) along the last axis."""
        return np.concatenate(
            [self.density[..., None], self.momentum, self.energy[..., None]], axis=-1
        )

    @staticmethod
    def from_primitive(
        density, mean_velocity, temperature, dim: int, rho_floor: float = 1e-12
    ) -> "Moments":
        rho = np.asarray(density, dtype=float)
        u = np.asarray(mean_velocity, dtype=float)
        temp = np.asarray(temperature, dtype=float)
        momentum = rho[..., None] * u
        energy = 0.5 * dim * rho * temp + 0.5 * rho * np.sum(u * u, axis=-1)
        return Moments(rho, momentum, energy, dim, rho_floor)

    def cell(self, index) -> "Moments":
        return Moments(
            self.density[index],
            self.momentum[index],
            self.energy[index],
            self.dim,
            self.rho_floor,
        )

    def to_dict(self, include_primitive: Optional[bool] = None):
        data = {
            "density": self.density.tolist(),
            "momentum": self.momentum.tolist(),
            "energy": self.energy.tolist(),
        }
        if include_primitive or (include_primitive is None and not self.is_degenerate):
            data["mean_velocity"] = self.mean_velocity.tolist()
            data["temperature"] = self.temperature.tolist()
        return data

    @staticmethod
    def from_dict(data: dict, dim: int, rho_floor: float = 1e-12):
        return Moments(
            density=data["density"],
            momentum=data["momentum"],
            energy=data["energy"],
            dim=dim,
            rho_floor=rho_floor,
        )

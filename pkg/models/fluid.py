from typing import Optional

import numpy as np

from errors import InvalidParameterError

BOUNDARIES = ("periodic", "free-outflow")


class SpatialMesh:
    """Uniform 1D cell-centered mesh on [x_min, x_max]."""

    def __init__(self, n_cells: int, x_min: float, x_max: float, boundary: str = "free-outflow"):
        if int(n_cells) != n_cells or n_cells < 2:
            raise InvalidParameterError(f"n_cells must be an integer >= 2, got {n_cells}")
        if not x_max > x_min:
            raise InvalidParameterError(f"x_max must exceed x_min, got [{x_min}, {x_max}]")
        if boundary not in BOUNDARIES:
            raise InvalidParameterError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
        self.n_cells = int(n_cells)
        self.x_min = float(x_min)
        self.x_max = float(x_max)
        self.boundary = boundary

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + self.dx * (np.arange(self.n_cells) + 0.5)

    def with_cells(self, n_cells: int) -> "SpatialMesh":
        return SpatialMesh(n_cells, self.x_min, self.x_max, self.boundary)

    def __repr__(self):
        return (
            f"SpatialMesh(n_cells={self.n_cells}, x=[{self.x_min}, {self.x_max}], "
            f"boundary={self.boundary})"
        )

    def to_dict(self):
        return {
            "n_cells": self.n_cells,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "boundary": self.boundary,
        }

    @staticmethod
    def from_dict(data: dict):
        return SpatialMesh(data["n_cells"], data["x_min"], data["x_max"], data.get("boundary", "free-outflow"))


class FluidState:
    """Per-cell conserved variables (rho, rho*w, E) of the 1D Euler system.

    ``gamma`` defaults to (d+2)/d = 2, the monatomic value for d = 2 velocity
    dimensions; the pressure is p = (gamma - 1)(E - rho w^2 / 2) = rho T.
    """

    def __init__(self, conserved: np.ndarray, gamma: float = 2.0):
        self.conserved = np.asarray(conserved, dtype=float)
        self.gamma = float(gamma)

    @property
    def density(self) -> np.ndarray:
        return self.conserved[:, 0]

    @property
    def momentum(self) -> np.ndarray:
        return self.conserved[:, 1]

    @property
    def energy(self) -> np.ndarray:
        return self.conserved[:, 2]

    @property
    def velocity(self) -> np.ndarray:
        return self.momentum / self.density

    @property
    def internal_energy(self) -> np.ndarray:
        return self.energy - 0.5 * self.momentum ** 2 / self.density

    @property
    def pressure(self) -> np.ndarray:
        return (self.gamma - 1.0) * self.internal_energy

    @property
    def temperature(self) -> np.ndarray:
        return self.pressure / self.density

    def sound_speed(self) -> np.ndarray:
        return np.sqrt(self.gamma * self.pressure / self.density)

    def max_wave_speed(self) -> float:
        return float(np.max(np.abs(self.velocity) + self.sound_speed()))

    def totals(self, dx: float) -> np.ndarray:
        """Total mass, momentum and energy."""
        return dx * self.conserved.sum(axis=0)

    @staticmethod
    def from_primitive(density, velocity, pressure, gamma: float = 2.0) -> "FluidState":
        rho = np.asarray(density, dtype=float)
        w = np.broadcast_to(np.asarray(velocity, dtype=float), rho.shape)
        p = np.broadcast_to(np.asarray(pressure, dtype=float), rho.shape)
        energy = p / (gamma - 1.0) + 0.5 * rho * w * w
        return FluidState(np.column_stack([rho, rho * w, energy]), gamma)

    def copy(self) -> "FluidState":
        return FluidState(self.conserved.copy(), self.gamma)

    def to_dict(self, mesh: Optional["SpatialMesh"] = None):
        data = {
            "gamma": self.gamma,
            "density": self.density.tolist(),
            "velocity": self.velocity.tolist(),
            "pressure": self.pressure.tolist(),
        }
        if mesh is not None:
            data["x"] = mesh.centers.tolist()
        return data

    @staticmethod
    def from_dict(data: dict):
        return FluidState.from_primitive(
            data["density"], data["velocity"], data["pressure"], data.get("gamma", 2.0)
        )

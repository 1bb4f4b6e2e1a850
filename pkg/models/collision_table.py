from typing import Optional

import numpy as np
from scipy import sparse

from models.velocity import VelocityGrid


class VelocityLattice:
    """Finite set of velocities lying on an integer lattice scaled by ``spacing``.

    Either wraps a VelocityGrid (``grid`` set) or an arbitrary point set such
    as {0, 1, 2, 3} or {0, 1}^2.
    """

    def __init__(
        self,
        nodes: np.ndarray,
        spacing: float = 1.0,
        grid: Optional[VelocityGrid] = None,
    ):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        self.nodes = nodes
        self.spacing = float(spacing)
        self.grid = grid

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @staticmethod
    def from_grid(grid: VelocityGrid) -> "VelocityLattice":
        return VelocityLattice(grid.nodes, grid.spacing, grid)

    @staticmethod
    def from_points(points, spacing: float = 1.0) -> "VelocityLattice":
        return VelocityLattice(np.asarray(points, dtype=float) * spacing, spacing)


class CollisionTable:
    """Admissible DVM collisions with their transition rates.

    Each row of ``quadruples`` is one collision class {{i, j}, {k, l}} with
    i != j, k != l and {i, j} != {k, l}; it stands for the 8 ordered tuples
    obtained by swapping i/j, k/l and input/output, all sharing the rate
    A = S |v_i - v_j| a with a = 1/|C_ij|. Permutation outputs (k, l) = (i, j)
    or (j, i) belong to C_ij (they enter a's normalization) but contribute
    nothing to Q and are not stored.
    """

    ORDERED_PER_CLASS = 8

    def __init__(
        self,
        lattice: VelocityLattice,
        quadruples: np.ndarray,
        weights: np.ndarray,
        rates: np.ndarray,
        cross_section: float = 1.0,
    ):
        self.lattice = lattice
        self.quadruples = np.asarray(quadruples, dtype=np.int64).reshape(-1, 4)
        self.weights = np.asarray(weights, dtype=float)
        self.rates = np.asarray(rates, dtype=float)
        self.cross_section = float(cross_section)
        self._incidence = None

    @property
    def n_classes(self) -> int:
        return self.quadruples.shape[0]

    @property
    def n_ordered_quadruples(self) -> int:
        return self.ORDERED_PER_CLASS * self.n_classes

    @property
    def max_rate(self) -> float:
        return float(self.rates.max()) if self.rates.size else 0.0

    def incidence(self) -> sparse.csr_matrix:
        """(n_classes x n_nodes) matrix with +1 at i, j and -1 at k, l."""
        if self._incidence is None:
            m = self.n_classes
            rows = np.repeat(np.arange(m), 4)
            cols = self.quadruples.ravel()
            vals = np.tile([1.0, 1.0, -1.0, -1.0], m)
            self._incidence = sparse.csr_matrix(
                (vals, (rows, cols)), shape=(m, self.lattice.n_nodes)
            )
        return self._incidence

    def to_dict(self):
        return {
            "nodes": self.lattice.nodes.tolist(),
            "spacing": self.lattice.spacing,
            "grid": self.lattice.grid.to_dict() if self.lattice.grid else None,
            "quadruples": self.quadruples.tolist(),
            "weights": self.weights.tolist(),
            "rates": self.rates.tolist(),
            "cross_section": self.cross_section,
        }

    @staticmethod
    def from_dict(data: dict):
        grid = VelocityGrid.from_dict(data["grid"]) if data.get("grid") else None
        lattice = VelocityLattice(data["nodes"], data["spacing"], grid)
        return CollisionTable(
            lattice=lattice,
            quadruples=data["quadruples"],
            weights=data["weights"],
            rates=data["rates"],
            cross_section=data["cross_section"],
        )

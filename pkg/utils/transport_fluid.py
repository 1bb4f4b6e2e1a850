"""Free transport v_1 d_x f on a 1D mesh and its coupling to collisions.

- advect: first-order upwind per velocity node
- split_step: Lie splitting, transport then per-cell collision
- conversions between kinetic cell moments and Euler fluid states
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from config import settings
from errors import CFLViolationError, GridMismatchError, InvalidParameterError
from logger import get_logger
from models.fluid import FluidState, SpatialMesh
from models.problem import StiffProblem
from models.velocity import Distribution, Moments, VelocityGrid
from utils.euler import CFL_SLACK, gamma_for_dimension, with_ghosts
from utils.time_integrators import get_stepper
from utils.velocity_grid import discrete_maxwellian

logger = get_logger(__name__)

SPLITTING_SCHEMES = ("lie",)
CELL_BLOCK = 8


def transport_cfl(grid: VelocityGrid, dt: float, mesh: SpatialMesh) -> float:
    return dt * float(np.max(np.abs(grid.axis))) / mesh.dx


def advect(f: Distribution, dt: float, mesh: SpatialMesh) -> Distribution:
    """Upwind update of df/dt + v_1 df/dx = 0, per velocity node.

    ``f.values`` has shape (n_cells, *grid.shape); the upwind direction of
    each node is the sign of its first velocity component.

    Raises:
        CFLViolationError: dt * max|v_1| / dx > 1
        GridMismatchError: leading axis is not the mesh's cells
    """
    if f.cell_shape != (mesh.n_cells,):
        raise GridMismatchError(f"expected {mesh.n_cells} cells, got cell shape {f.cell_shape}")
    courant = transport_cfl(f.grid, dt, mesh)
    if courant > 1.0 + CFL_SLACK:
        raise CFLViolationError(f"transport CFL number {courant:.4f} exceeds 1")

    v1 = f.grid.mesh()[0]
    forward = np.maximum(v1, 0.0)
    backward = np.minimum(v1, 0.0)
    extended = with_ghosts(f.values, mesh.boundary)
    flux = forward * extended[:-1] + backward * extended[1:]
    return f.with_values(f.values - dt / mesh.dx * (flux[1:] - flux[:-1]))


def split_step(
    f: Distribution,
    dt: float,
    problem: StiffProblem,
    mesh: SpatialMesh,
    stepper: str = "imex",
    scheme: str = "lie",
    threads: Optional[int] = None,
) -> Distribution:
    """Transport over dt, then one collision step in every cell.

    Cells are collided in fixed blocks of CELL_BLOCK, so the result does not
    depend on the thread count.
    """
    if scheme not in SPLITTING_SCHEMES:
        raise InvalidParameterError(f"splitting scheme {scheme!r} not supported; use 'lie'")
    step = get_stepper(stepper)
    transported = advect(f, dt, mesh)

    blocks = [np.arange(start, min(start + CELL_BLOCK, mesh.n_cells)) for start in range(0, mesh.n_cells, CELL_BLOCK)]

    def collide(block):
        return step(transported.with_values(transported.values[block]), dt, problem).values

    threads = threads or settings.threads
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(collide, blocks))
    else:
        parts = [collide(b) for b in blocks]
    return transported.with_values(np.concatenate(parts, axis=0))


def fluid_state_from_moments(m: Moments, gamma: Optional[float] = None) -> FluidState:
    """Euler variables (rho, rho w, E) from kinetic cell moments, w along x."""
    gamma = gamma_for_dimension(m.dim) if gamma is None else gamma
    conserved = np.column_stack([m.density, m.momentum[..., 0], m.energy])
    return FluidState(conserved, gamma)


def kinetic_state_from_fluid(state: FluidState, grid: VelocityGrid) -> Distribution:
    """Per-cell discrete Maxwellians carrying the fluid state's moments."""
    n_cells = state.density.shape[0]
    velocity = np.zeros((n_cells, grid.dim))
    velocity[:, 0] = state.velocity
    moments = Moments.from_primitive(
        state.density, velocity, state.pressure / state.density, grid.dim, settings.rho_floor
    )
    return discrete_maxwellian(moments, grid)


def density_deviation(kinetic: FluidState, reference: FluidState) -> float:
    """Normalized L1 density deviation sum|rho - rho_ref| / sum|rho_ref|."""
    return float(np.sum(np.abs(kinetic.density - reference.density)) / np.sum(np.abs(reference.density)))

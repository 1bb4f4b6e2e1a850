"""Discrete-velocity collision operator on integer lattices.

Provides functions for:
- Enumerating admissible collisions (v_i, v_j) <-> (v_k, v_l)
- Building uniform transition weights and rates A_ij^kl = S |v_i - v_j| a_ij^kl
- Evaluating Q_i = sum A_ij^kl (f_k f_l - f_i f_j)
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Union

import numpy as np

from config import settings
from errors import GridMismatchError, NonLatticeGridError
from logger import get_logger
from models.collision_table import CollisionTable, VelocityLattice
from models.velocity import Distribution, VelocityGrid

logger = get_logger(__name__)

LATTICE_TOLERANCE = 1e-9


def integer_coordinates(lattice: VelocityLattice) -> np.ndarray:
    """Nodes divided by the lattice spacing, as exact integers.

    Raises:
        NonLatticeGridError: a node is farther than 1e-9 from the scaled lattice
    """
    scaled = lattice.nodes / lattice.spacing
    rounded = np.rint(scaled)
    defect = float(np.max(np.abs(scaled - rounded))) if scaled.size else 0.0
    if defect > LATTICE_TOLERANCE:
        raise NonLatticeGridError(
            f"nodes are not integer multiples of spacing {lattice.spacing}: "
            f"max defect {defect:.3e}"
        )
    return rounded.astype(np.int64)


def enumerate_collisions(
    lattice: Union[VelocityLattice, VelocityGrid],
    cross_section: float = 1.0,
) -> CollisionTable:
    """Find every admissible collision on the lattice.

    Two input pairs are mutually admissible exactly when they share the
    integer sum z_i + z_j and the integer energy |z_i|^2 + |z_j|^2, i.e. they
    lie on the same circle (sphere) around (v_i + v_j)/2. Pairs are grouped by
    that key; outputs falling off the finite lattice are never generated,
    which is the truncation of the finite lattice.

    Args:
        lattice: VelocityLattice or VelocityGrid (its nodes are -n/2..n/2-1 times h)
        cross_section: S in A = S |v_i - v_j| a

    Returns:
        CollisionTable: deduplicated classes with uniform weights a = 1/|C_ij|
    """
    if isinstance(lattice, VelocityGrid):
        lattice = VelocityLattice.from_grid(lattice)
    z = integer_coordinates(lattice)
    n = lattice.n_nodes

    first, second = np.triu_indices(n, k=1)
    sums = z[first] + z[second]
    energies = np.sum(z[first] ** 2 + z[second] ** 2, axis=1)
    keys = np.column_stack([sums, energies])
    order = np.lexsort(keys.T[::-1])
    keys = keys[order]
    first, second = first[order], second[order]

    boundaries = np.flatnonzero(np.any(np.diff(keys, axis=0) != 0, axis=1)) + 1
    starts = np.concatenate([[0], boundaries])
    stops = np.concatenate([boundaries, [len(keys)]])

    quads, weights = [], []
    for start, stop in zip(starts, stops):
        size = stop - start
        if size < 2:
            continue
        p, q = np.triu_indices(size, k=1)
        block = np.column_stack(
            [first[start + p], second[start + p], first[start + q], second[start + q]]
        )
        quads.append(block)
        # C_ij holds the 2 * size ordered outputs of the group, permutations included
        weights.append(np.full(len(block), 1.0 / (2 * size)))

    if quads:
        quadruples = np.concatenate(quads)
        weights = np.concatenate(weights)
    else:
        quadruples = np.zeros((0, 4), dtype=np.int64)
        weights = np.zeros(0)

    relative = np.linalg.norm(
        lattice.nodes[quadruples[:, 0]] - lattice.nodes[quadruples[:, 1]], axis=1
    )
    rates = cross_section * relative * weights

    table = CollisionTable(lattice, quadruples, weights, rates, cross_section)
    logger.info(
        f"Enumerated {table.n_classes} collision classes "
        f"({table.n_ordered_quadruples} ordered quadruples) on {n} lattice nodes"
    )
    return table


def _lattice_values(f, table: CollisionTable) -> np.ndarray:
    grid = table.lattice.grid
    if isinstance(f, Distribution):
        if grid is None or f.grid != grid:
            raise GridMismatchError(
                f"distribution grid {f.grid!r} does not match collision table lattice"
            )
        return f.values.reshape(f.cell_shape + (-1,))
    values = np.asarray(f, dtype=float)
    if values.shape[-1] != table.lattice.n_nodes:
        raise GridMismatchError(
            f"expected {table.lattice.n_nodes} lattice values, got shape {values.shape}"
        )
    return values


def _chunk_contribution(flat: np.ndarray, table: CollisionTable, start: int, stop: int) -> np.ndarray:
    i, j, k, l = table.quadruples[start:stop].T
    # Each class appears in Q_i, Q_j (gain - loss) and Q_k, Q_l (mirror) twice
    delta = 2.0 * table.rates[start:stop] * (flat[:, k] * flat[:, l] - flat[:, i] * flat[:, j])
    incidence = table.incidence()[start:stop]
    return np.asarray((incidence.T @ delta.T).T)


def dvm_collision(
    f: Union[Distribution, np.ndarray],
    table: CollisionTable,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
):
    """Evaluate the discrete collision operator Q_i(f, f).

    Work is split into fixed chunks of quadruples reduced in chunk order, so
    the result does not depend on the number of threads.

    Args:
        f: Distribution on the table's grid, or array (..., n_nodes) for point lattices
        table: CollisionTable from enumerate_collisions
        threads: Worker threads (default: settings.threads)
        chunk_size: Quadruples per chunk (default: settings.dvm_chunk_size)

    Returns:
        Same type as f: the collision term Q

    Raises:
        GridMismatchError: f not defined on the table's lattice
    """
    threads = threads or settings.threads
    chunk_size = chunk_size or settings.dvm_chunk_size
    values = _lattice_values(f, table)
    flat = values.reshape(-1, values.shape[-1])

    bounds = [
        (start, min(start + chunk_size, table.n_classes))
        for start in range(0, table.n_classes, chunk_size)
    ]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _chunk_contribution(flat, table, *b), bounds))
    else:
        parts = [_chunk_contribution(flat, table, *b) for b in bounds]

    q = np.zeros_like(flat)
    for part in parts:
        q += part
    q = q.reshape(values.shape)

    if isinstance(f, Distribution):
        return f.with_values(q.reshape(f.values.shape))
    return q

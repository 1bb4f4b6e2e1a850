"""On-disk formats.

Distribution binary (little-endian):
    int32 dim, int32 n_per_dim, float64 half_width, float64 trunc_radius,
    int32 n_cells, then float64 values in row-major order (cells first).
Distribution CSV: four ``# key=value`` header lines, then one row per node
    with the node velocity components followed by the value of each cell.
Collision table text: ``# dim=<d> spacing=<h>``, then ``node`` lines and one
    ``i j k l rate`` line per class, sorted.
Kernel-mode cache (little-endian): magic ``KMOD``, uint32 format version,
    uint32 dim, uint32 N, uint32 quadrature level, float64 R,
    uint32 descriptor length + utf-8 descriptor JSON, then the complex128
    table in row-major order.
"""

import hashlib
import json
from pathlib import Path
from typing import Union

import numpy as np

from errors import GridMismatchError, InvalidParameterError
from logger import get_logger
from models.collision_table import CollisionTable, VelocityLattice
from models.spectral import CollisionKernel, KernelModes
from models.velocity import Distribution, VelocityGrid

logger = get_logger(__name__)

PathLike = Union[str, Path]

DISTRIBUTION_HEADER = np.dtype(
    [("dim", "<i4"), ("n_per_dim", "<i4"), ("half_width", "<f8"), ("trunc_radius", "<f8"), ("n_cells", "<i4")]
)
KERNEL_MAGIC = b"KMOD"
KERNEL_FORMAT_VERSION = 1
KERNEL_HEADER = np.dtype(
    [("version", "<u4"), ("dim", "<u4"), ("n_modes", "<u4"), ("level", "<u4"), ("trunc_radius", "<f8"), ("descriptor_length", "<u4")]
)


def write_distribution(path: PathLike, f: Distribution) -> Path:
    path = Path(path)
    grid = f.grid
    n_cells = int(np.prod(f.cell_shape)) if f.cell_shape else 1
    header = np.array(
        [(grid.dim, grid.n_per_dim, grid.half_width, grid.trunc_radius, n_cells)],
        dtype=DISTRIBUTION_HEADER,
    )
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(f.values.astype("<f8").tobytes(order="C"))
    return path


def read_distribution(path: PathLike) -> Distribution:
    raw = Path(path).read_bytes()
    header = np.frombuffer(raw, dtype=DISTRIBUTION_HEADER, count=1)[0]
    grid = VelocityGrid(
        int(header["dim"]),
        int(header["n_per_dim"]),
        float(header["half_width"]),
        float(header["trunc_radius"]),
    )
    values = np.frombuffer(raw, dtype="<f8", offset=DISTRIBUTION_HEADER.itemsize)
    n_cells = int(header["n_cells"])
    expected = n_cells * grid.n_nodes
    if values.size != expected:
        raise GridMismatchError(f"{path}: expected {expected} values, found {values.size}")
    shape = grid.shape if n_cells == 1 else (n_cells,) + grid.shape
    return Distribution(grid, values.reshape(shape).astype(float))


def write_distribution_csv(path: PathLike, f: Distribution) -> Path:
    path = Path(path)
    grid = f.grid
    columns = f.values.reshape((-1,) + grid.shape).reshape(-1, grid.n_nodes).T
    table = np.column_stack([grid.nodes, columns])
    header = "\n".join(
        [
            f"dim={grid.dim}",
            f"n_per_dim={grid.n_per_dim}",
            f"half_width={grid.half_width!r}",
            f"trunc_radius={grid.trunc_radius!r}",
        ]
    )
    np.savetxt(path, table, delimiter=",", header=header, fmt="%.17g")
    return path


def read_distribution_csv(path: PathLike) -> Distribution:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
    grid = VelocityGrid(
        int(meta["dim"]),
        int(meta["n_per_dim"]),
        float(meta["half_width"]),
        float(meta["trunc_radius"]),
    )
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    columns = table[:, grid.dim:]
    if columns.shape[1] == 1:
        return Distribution(grid, columns[:, 0].reshape(grid.shape))
    return Distribution(grid, columns.T.reshape((columns.shape[1],) + grid.shape))


def write_collision_table(path: PathLike, table: CollisionTable) -> Path:
    """Text form with classes sorted so that equal tables give equal files."""
    path = Path(path)
    order = np.lexsort(table.quadruples.T[::-1])
    lines = [f"# dim={table.lattice.dim} spacing={table.lattice.spacing!r} cross_section={table.cross_section!r}"]
    for node in table.lattice.nodes:
        lines.append("node " + " ".join(repr(float(x)) for x in node))
    for row in order:
        i, j, k, l = table.quadruples[row]
        lines.append(f"{i} {j} {k} {l} {table.rates[row]!r} {table.weights[row]!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_collision_table(path: PathLike) -> CollisionTable:
    text = Path(path).read_text().splitlines()
    meta = dict(item.split("=") for item in text[0].lstrip("# ").split())
    nodes, quads, rates, weights = [], [], [], []
    for line in text[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "node":
            nodes.append([float(x) for x in parts[1:]])
        else:
            quads.append([int(x) for x in parts[:4]])
            rates.append(float(parts[4]))
            weights.append(float(parts[5]))
    lattice = VelocityLattice(np.array(nodes), float(meta["spacing"]))
    return CollisionTable(lattice, np.array(quads).reshape(-1, 4), weights, rates, float(meta["cross_section"]))


def kernel_cache_key(descriptor: dict) -> str:
    """Content address of a kernel-mode table."""
    payload = json.dumps({**descriptor, "format": KERNEL_FORMAT_VERSION}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def write_kernel_modes(path: PathLike, km: KernelModes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    descriptor = json.dumps(
        {"kernel": km.kernel.to_dict(), "self_check_defect": km.self_check_defect}
    ).encode()
    header = np.array(
        [(KERNEL_FORMAT_VERSION, km.dim, km.n_modes, km.quadrature_level, km.trunc_radius, len(descriptor))],
        dtype=KERNEL_HEADER,
    )
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(KERNEL_MAGIC)
        fh.write(header.tobytes())
        fh.write(descriptor)
        fh.write(np.ascontiguousarray(km.table, dtype="<c16").tobytes())
    tmp.replace(path)
    return path


def read_kernel_modes(path: PathLike) -> KernelModes:
    raw = Path(path).read_bytes()
    if raw[:4] != KERNEL_MAGIC:
        raise InvalidParameterError(f"{path} is not a kernel-mode cache file")
    offset = len(KERNEL_MAGIC)
    header = np.frombuffer(raw, dtype=KERNEL_HEADER, count=1, offset=offset)[0]
    if int(header["version"]) != KERNEL_FORMAT_VERSION:
        raise InvalidParameterError(
            f"{path}: cache format {int(header['version'])}, expected {KERNEL_FORMAT_VERSION}"
        )
    offset += KERNEL_HEADER.itemsize
    length = int(header["descriptor_length"])
    meta = json.loads(raw[offset: offset + length].decode())
    offset += length

    dim, n_modes = int(header["dim"]), int(header["n_modes"])
    size = (2 * n_modes + 1) ** dim
    table = np.frombuffer(raw, dtype="<c16", offset=offset)
    if table.size != size * size:
        raise GridMismatchError(f"{path}: truncated kernel table ({table.size} of {size * size} entries)")
    table = table.reshape(size, size).astype(complex)
    if not np.any(table.imag):
        table = table.real.copy()
    return KernelModes(
        n_modes=n_modes,
        dim=dim,
        kernel=CollisionKernel.from_dict(meta["kernel"]),
        trunc_radius=float(header["trunc_radius"]),
        quadrature_level=int(header["level"]),
        table=table,
        self_check_defect=meta.get("self_check_defect"),
    )

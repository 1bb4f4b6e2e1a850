"""Scenario orchestration.

Provides:
- load_scenario / validate_scenario: TOML -> ScenarioConfig with field paths
- builders for the grid, collision operator, stiff problem and initial data
- run_scenario: one run per kind, writing series.csv, final.dist and
  report.json into the output directory

A failed acceptance gate raises AcceptanceCheckError after the report has
been written.
"""

import math
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from contextlib import contextmanager
from datetime import datetime, timezone
from functools import partial
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError

from config import settings
from errors import AcceptanceCheckError, ConfigValidationError, InvalidParameterError, SolverError
from logger import get_logger
from models.fluid import SpatialMesh
from models.problem import StiffProblem
from models.spectral import CollisionKernel, KernelModes, SeparatedKernel
from models.velocity import Distribution, Moments, VelocityGrid
from schemas.report import AcceptanceCheck, APRow, RunReport
from schemas.scenario import (
    GridConfig,
    InitialConfig,
    InitialKind,
    KernelConfig,
    OperatorKind,
    ScenarioConfig,
    ScenarioKind,
    StepperKind,
    TimeConfig,
)
from utils.bkw import bkw_distribution, bkw_fourth_moment, bkw_profile, bkw_time_derivative, fourth_moment
from utils.dvm import enumerate_collisions
from utils.euler import euler_solve, gamma_for_dimension, riemann_state
from utils.kernel_modes import compute_kernel_modes, maxwell_beta_origin
from utils.riemann import exact_riemann
from utils.serialization import kernel_cache_key, write_distribution
from utils.spectral_collision import collision_quadrature_oracle, decompose_kernel, select_rank
from utils.time_integrators import (
    ap_diagnostic,
    collision_evaluator,
    get_stepper,
    is_unstable,
    step_penalized_imex,
)
from utils.transport_fluid import (
    density_deviation,
    fluid_state_from_moments,
    kinetic_state_from_fluid,
    split_step,
    transport_cfl,
)
from utils.velocity_grid import (
    anisotropic_gaussian,
    build_grid,
    compute_moments,
    distance_to_equilibrium,
    entropy,
    maxwellian,
)

logger = get_logger(__name__)

PathLike = Union[str, Path]
SERIES_FILE = "series.csv"
DISTRIBUTION_FILE = "final.dist"
REPORT_FILE = "report.json"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def validate_scenario(data: dict) -> ScenarioConfig:
    """Validate a parsed scenario mapping.

    Raises:
        ConfigValidationError: one (dotted field path, message) pair per problem
    """
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        errors = [
            (".".join(str(part) for part in err["loc"]) or "<root>", err["msg"])
            for err in exc.errors()
        ]
        raise ConfigValidationError(errors) from None


def load_scenario(path: PathLike) -> ScenarioConfig:
    """Parse and validate a TOML scenario file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigValidationError([("<file>", f"cannot read {path}: {exc.strerror}")]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigValidationError([("<file>", f"{path}: {exc}")]) from None
    cfg = validate_scenario(data)
    logger.info(f"Loaded scenario {cfg.label} ({cfg.kind.value}) from {path}")
    return cfg


def apply_overrides(
    cfg: ScenarioConfig,
    threads: Optional[int] = None,
    seed: Optional[int] = None,
) -> ScenarioConfig:
    """Command-line values win over the file."""
    update = {}
    if threads is not None:
        if threads < 1:
            raise ConfigValidationError([("threads", "must be >= 1")])
        update["threads"] = threads
    if seed is not None:
        update["seed"] = seed
    return cfg.model_copy(update=update) if update else cfg


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_velocity_grid(grid_cfg: GridConfig) -> VelocityGrid:
    return build_grid(grid_cfg.dim, grid_cfg.n_per_dim, grid_cfg.half_width, grid_cfg.trunc_radius)


def build_kernel(kernel_cfg: KernelConfig) -> CollisionKernel:
    return CollisionKernel(kernel_cfg.kind.value, kernel_cfg.alpha, kernel_cfg.c_alpha)


def build_collision(
    grid: VelocityGrid,
    kernel_cfg: KernelConfig,
    threads: Optional[int] = None,
):
    """Collision discretization selected by ``kernel_cfg.operator``.

    Returns:
        CollisionTable (dvm), KernelModes (direct) or SeparatedKernel (fast).
        The fast rank is ``kernel_cfg.rank`` or the smallest rank whose SVD
        tail is below ``rank_tolerance`` relative to the largest singular value.
    """
    if kernel_cfg.operator == OperatorKind.DVM:
        return enumerate_collisions(grid, kernel_cfg.cross_section)

    km = compute_kernel_modes(
        grid,
        build_kernel(kernel_cfg),
        quadrature_level=kernel_cfg.quadrature_level,
        threads=threads,
    )
    if kernel_cfg.operator == OperatorKind.DIRECT:
        return km

    rank = kernel_cfg.rank or select_rank(km, kernel_cfg.rank_tolerance)
    rank = min(rank, km.table.shape[0])
    separated = decompose_kernel(km, rank, kernel_cfg.decomposition.value)
    logger.diag(
        f"fast operator N={km.n_modes}: rank {rank}/{km.table.shape[0]}, "
        f"certified error {separated.reconstruction_error:.3e}"
    )
    return separated


def build_problem(time_cfg: TimeConfig, operator, threads: Optional[int] = None) -> StiffProblem:
    return StiffProblem(
        epsilon=time_cfg.epsilon,
        collision=collision_evaluator(operator, threads),
        penalization=time_cfg.penalization,
        penalization_constant=settings.penalization_constant,
        penalization_floor=settings.penalization_floor,
        explicit_method=time_cfg.explicit_method.value,
    )


def build_stepper(time_cfg: TimeConfig):
    if time_cfg.stepper == StepperKind.IMEX:
        return partial(step_penalized_imex, damp_deviation=time_cfg.damp_deviation)
    return get_stepper(time_cfg.stepper.value)


def build_mesh(cfg: ScenarioConfig) -> Optional[SpatialMesh]:
    if cfg.space is None:
        return None
    space = cfg.space
    return SpatialMesh(space.n_cells, space.x_min, space.x_max, space.boundary.value)


def build_initial(
    initial_cfg: InitialConfig,
    grid: VelocityGrid,
    mesh: Optional[SpatialMesh] = None,
    rng: Optional[np.random.Generator] = None,
) -> Distribution:
    """Initial distribution, one copy per cell when a mesh is given.

    ``perturbation`` > 0 multiplies every value by 1 + p * U(-1, 1) drawn
    from ``rng``, which keeps f positive.
    """
    kind = initial_cfg.kind
    if kind == InitialKind.RIEMANN:
        if mesh is None:
            raise InvalidParameterError("riemann initial data needs a [space] section")
        state = riemann_state(
            mesh, initial_cfg.left, initial_cfg.right, initial_cfg.x0, gamma_for_dimension(grid.dim)
        )
        f = kinetic_state_from_fluid(state, grid)
    else:
        if kind == InitialKind.ANISOTROPIC_GAUSSIAN:
            f = anisotropic_gaussian(
                grid, initial_cfg.density, initial_cfg.mean_velocity, initial_cfg.temperatures
            )
        elif kind == InitialKind.MAXWELLIAN:
            moments = Moments.from_primitive(
                initial_cfg.density, initial_cfg.mean_velocity, initial_cfg.temperature, grid.dim
            )
            f = maxwellian(moments, grid)
        else:
            f = bkw_distribution(grid, 0.0)
        if mesh is not None:
            f = f.with_values(np.broadcast_to(f.values, (mesh.n_cells,) + grid.shape).copy())

    if initial_cfg.perturbation > 0:
        rng = rng or np.random.default_rng(0)
        noise = rng.uniform(-1.0, 1.0, size=f.values.shape)
        f = f.with_values(f.values * (1.0 + initial_cfg.perturbation * noise))
    return f


# ---------------------------------------------------------------------------
# Run state
# ---------------------------------------------------------------------------

class ScenarioRun:
    """Checks, metrics, series rows and written files of one run."""

    def __init__(self, cfg: ScenarioConfig, out_dir: Path, force: bool = False):
        self.cfg = cfg
        self.out_dir = out_dir
        self.force = force
        self.threads = cfg.threads or settings.threads
        self.rng = np.random.default_rng(cfg.seed)
        self.checks = []
        self.metrics = {}
        self.timings = {}
        self.conservation_defects = {}
        self.outputs = []
        self.convergence = None
        self.ap_sweep = None
        self._columns = None
        self._rows = []

    @contextmanager
    def timed(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def check(self, name: str, passed: bool, value=None, threshold=None, detail: Optional[str] = None):
        value = None if value is None else float(value)
        threshold = None if threshold is None else float(threshold)
        self.checks.append(
            AcceptanceCheck(name=name, passed=bool(passed), value=value, threshold=threshold, detail=detail)
        )
        message = f"[{self.cfg.label}] check {name}: {'pass' if passed else 'FAIL'} value={value} threshold={threshold}"
        if passed:
            logger.diag(message)
        else:
            logger.warning(message)

    def record(self, **row):
        if self._columns is None:
            self._columns = list(row)
        self._rows.append([float(row[c]) for c in self._columns])

    def write_series(self):
        if not self._rows:
            return
        path = self.out_dir / SERIES_FILE
        np.savetxt(
            path,
            np.asarray(self._rows),
            delimiter=",",
            header=",".join(self._columns),
            comments="",
            fmt="%.17g",
        )
        self.outputs.append(str(path))

    def write_final(self, f: Distribution):
        if self.cfg.output.write_distributions:
            self.outputs.append(str(write_distribution(self.out_dir / DISTRIBUTION_FILE, f)))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _moment_columns(f: Distribution) -> dict:
    """Totals over cells of rho, rho u and E."""
    m = compute_moments(f)
    momentum = np.reshape(m.momentum, (-1, m.dim)).sum(axis=0)
    return {
        "density": float(np.sum(m.density)),
        "momentum_x": float(momentum[0]),
        "momentum_y": float(momentum[1]),
        "energy": float(np.sum(m.energy)),
    }


def _conservation(run: ScenarioRun, first: dict, last: dict, gate_all: bool):
    mass0 = abs(first["density"])
    energy0 = abs(first["energy"])
    defects = {
        "mass": abs(last["density"] - first["density"]) / mass0,
        "momentum": max(
            abs(last["momentum_x"] - first["momentum_x"]), abs(last["momentum_y"] - first["momentum_y"])
        ) / mass0,
        "energy": abs(last["energy"] - first["energy"]) / energy0,
    }
    run.conservation_defects.update(defects)
    logger.diag(f"[{run.cfg.label}] conservation defects {defects}")
    tolerance = run.cfg.acceptance.conservation_tolerance
    for name in ("mass", "momentum", "energy") if gate_all else ("mass",):
        run.check(f"{name}_conservation", defects[name] <= tolerance, defects[name], tolerance)


def _entropy_check(run: ScenarioRun, values):
    """Step-to-step increases of H must stay below tol * |H|."""
    h = np.asarray(values)
    if h.size < 2:
        return
    increase = np.diff(h)
    relative = increase / np.maximum(np.abs(h[1:]), np.finfo(float).tiny)
    tolerance = run.cfg.acceptance.entropy_increase_tolerance
    worst = float(np.max(relative))
    run.check("entropy_nonincreasing", worst <= tolerance, worst, tolerance)


def _n_steps(time_cfg: TimeConfig, dt: Optional[float] = None) -> tuple:
    """Step count and the uniform dt that lands exactly on t_final."""
    dt = time_cfg.dt if dt is None else dt
    if time_cfg.t_final == 0:
        return 0, dt
    n = max(1, math.ceil(time_cfg.t_final / dt - 1e-9))
    return n, time_cfg.t_final / n


# ---------------------------------------------------------------------------
# Scenario kinds
# ---------------------------------------------------------------------------

def _relax(run: ScenarioRun, f: Distribution, problem: StiffProblem, step, with_bkw: bool = False):
    """Homogeneous time loop with moment, entropy and distance series.

    H is taken after every step for the entropy gate; the series rows follow
    the output cadence.
    """
    cfg = run.cfg
    n_steps, dt = _n_steps(cfg.time)
    reference_max = float(np.max(np.abs(f.values)))
    entropies = [float(entropy(f, clip_negative=True))]
    lowest = []

    def record(index, t, f):
        row = {"step": index, "t": t, **_moment_columns(f)}
        row["entropy"] = entropies[-1]
        row["distance_to_equilibrium"] = float(distance_to_equilibrium(f))
        lowest.append(f.min_value())
        if with_bkw:
            row["fourth_moment"] = float(fourth_moment(f))
            row["fourth_moment_exact"] = bkw_fourth_moment(t)
        run.record(**row)
        return row

    first = record(0, 0.0, f)
    last = first
    stable = True
    with run.timed("time_loop"):
        for index in range(1, n_steps + 1):
            f = step(f, dt, problem)
            if is_unstable(f, reference_max):
                stable = False
                logger.diag(f"[{cfg.label}] blowup detected at step {index}")
                break
            entropies.append(float(entropy(f, clip_negative=True)))
            if index % cfg.output.every == 0 or index == n_steps:
                last = record(index, index * dt, f)

    run.check("stable", stable, detail=f"{n_steps} steps of dt={dt:g}")
    if not stable:
        return f, first, last, entropies
    run.metrics.update(
        {
            "n_steps": n_steps,
            "dt": dt,
            "initial_distance": first["distance_to_equilibrium"],
            "final_distance": last["distance_to_equilibrium"],
            "min_value": min(lowest),
        }
    )
    _conservation(run, first, last, gate_all=cfg.kernel.operator == OperatorKind.DVM)
    _entropy_check(run, entropies)
    return f, first, last, entropies


def _run_homogeneous_relaxation(run: ScenarioRun):
    cfg = run.cfg
    with run.timed("build"):
        grid = build_velocity_grid(cfg.grid)
        operator = build_collision(grid, cfg.kernel, run.threads)
        problem = build_problem(cfg.time, operator, run.threads)
        f0 = build_initial(cfg.initial, grid, rng=run.rng)

    f, first, last, _ = _relax(run, f0, problem, build_stepper(cfg.time))
    if "final_distance" in run.metrics:
        factor = cfg.acceptance.relaxation_factor
        ratio = last["distance_to_equilibrium"] / max(first["distance_to_equilibrium"], np.finfo(float).tiny)
        run.check("relaxes_to_equilibrium", ratio <= factor, ratio, factor)
    run.write_final(f)


def bkw_provenance(
    kernel: CollisionKernel,
    n_per_dim: int = 24,
    half_width: float = 6.0,
    refine: int = 1,
    n_angle: int = 32,
    force: bool = False,
    threads: Optional[int] = None,
) -> float:
    """Relative L2 residual of the analytic BKW family in the quadrature oracle at t = 0.

    The oracle evaluates the family pointwise and keeps every collision, so
    the only errors are the trapezoidal v_* sum and the angle sum; both
    converge spectrally once the node spacing resolves exp(-|v|^2).
    """
    grid = build_grid(2, n_per_dim, half_width)
    q = collision_quadrature_oracle(
        bkw_distribution(grid, 0.0),
        kernel,
        n_angle=n_angle,
        refine=refine,
        truncation="none",
        force=force,
        threads=threads,
        profile=partial(bkw_profile, t=0.0),
    )
    dfdt = bkw_time_derivative(grid, 0.0).values
    residual = float(np.linalg.norm(q.values - dfdt) / np.linalg.norm(dfdt))
    logger.diag(
        f"BKW provenance: oracle residual {residual:.3e} "
        f"(n={n_per_dim}, L={half_width:g}, refine={refine}, n_angle={n_angle})"
    )
    return residual


def _run_bkw_verification(run: ScenarioRun):
    cfg = run.cfg
    acceptance = cfg.acceptance
    if cfg.kernel.kind.value != "maxwell" or cfg.kernel.operator == OperatorKind.DVM:
        raise ConfigValidationError([("kernel", "bkw-verification needs a spectral Maxwell operator")])

    with run.timed("provenance"):
        residual = bkw_provenance(
            build_kernel(cfg.kernel),
            acceptance.provenance_n_per_dim,
            acceptance.provenance_half_width,
            acceptance.provenance_refine,
            acceptance.provenance_n_angle,
            run.force,
            run.threads,
        )
        coarse_n = max(4, 2 * (acceptance.provenance_n_per_dim // 4))
        coarse = bkw_provenance(
            build_kernel(cfg.kernel),
            coarse_n,
            acceptance.provenance_half_width,
            acceptance.provenance_refine,
            acceptance.provenance_n_angle,
            run.force,
            run.threads,
        )
    run.metrics["provenance_residual"] = residual
    run.metrics["provenance_residual_coarse"] = coarse
    run.check("bkw_provenance", residual <= acceptance.provenance_tolerance, residual, acceptance.provenance_tolerance)
    # halving the spacing must shrink the residual
    ratio = residual / max(coarse, np.finfo(float).tiny)
    run.check("bkw_provenance_refines", ratio < 1.0, ratio, 1.0, detail=f"n={coarse_n} -> n={acceptance.provenance_n_per_dim}")

    with run.timed("build"):
        grid = build_velocity_grid(cfg.grid)
        operator = build_collision(grid, cfg.kernel, run.threads)
        problem = build_problem(cfg.time, operator, run.threads)
        f0 = bkw_distribution(grid, 0.0)

    f, _, _, _ = _relax(run, f0, problem, build_stepper(cfg.time), with_bkw=True)
    columns = run._columns
    rows = np.asarray(run._rows)
    computed = rows[:, columns.index("fourth_moment")]
    exact = rows[:, columns.index("fourth_moment_exact")]
    m4_error = float(np.max(np.abs(computed - exact) / np.abs(exact)))
    run.metrics["fourth_moment_max_relative_error"] = m4_error
    run.check("bkw_fourth_moment", m4_error <= acceptance.m4_relative_tolerance, m4_error, acceptance.m4_relative_tolerance)
    if isinstance(operator, SeparatedKernel):
        run.metrics["rank"] = operator.rank
        run.metrics["reconstruction_error"] = operator.reconstruction_error
    run.write_final(f)


def _run_sod_kinetic(run: ScenarioRun):
    cfg = run.cfg
    acceptance = cfg.acceptance
    with run.timed("build"):
        grid = build_velocity_grid(cfg.grid)
        mesh = build_mesh(cfg)
        operator = build_collision(grid, cfg.kernel, run.threads)
        problem = build_problem(cfg.time, operator, run.threads)
        initial_cfg = cfg.initial
        if initial_cfg.kind != InitialKind.RIEMANN:
            initial_cfg = initial_cfg.model_copy(update={"kind": InitialKind.RIEMANN})
        f0 = build_initial(initial_cfg, grid, mesh, run.rng)

    # dt is capped by the transport CFL bound of the fastest velocity node
    dt_cap = cfg.space.cfl * mesh.dx / float(np.max(np.abs(grid.axis)))
    n_steps, dt = _n_steps(cfg.time, min(cfg.time.dt, dt_cap))
    run.metrics.update({"n_steps": n_steps, "dt": dt, "transport_cfl": transport_cfl(grid, dt, mesh)})

    def record(index, f):
        run.record(step=index, t=index * dt, **_moment_columns(f), entropy=float(np.sum(entropy(f, clip_negative=True))))

    f = f0
    record(0, f)
    first = _moment_columns(f0)
    with run.timed("time_loop"):
        for index in range(1, n_steps + 1):
            f = split_step(f, dt, problem, mesh, cfg.time.stepper.value, threads=run.threads)
            if index % cfg.output.every == 0 or index == n_steps:
                record(index, f)

    last = _moment_columns(f)
    # free-outflow boundaries exchange mass once waves reach them; report only
    run.conservation_defects.update(
        {
            "mass": abs(last["density"] - first["density"]) / first["density"],
            "energy": abs(last["energy"] - first["energy"]) / first["energy"],
        }
    )

    gamma = gamma_for_dimension(grid.dim)
    with run.timed("euler_reference"):
        reference = euler_solve(fluid_state_from_moments(compute_moments(f0), gamma), cfg.time.t_final, mesh, cfg.space.cfl)
    kinetic = fluid_state_from_moments(compute_moments(f), gamma)
    deviation = density_deviation(kinetic, reference)
    run.metrics["euler_density_deviation"] = deviation
    run.metrics["final_max_distance_to_equilibrium"] = float(np.max(distance_to_equilibrium(f)))
    run.check(
        "kinetic_matches_euler", deviation <= acceptance.euler_deviation_tolerance, deviation,
        acceptance.euler_deviation_tolerance,
    )

    with run.timed("riemann_reference"):
        riemann_error = euler_vs_exact_riemann(
            cfg.initial.left, cfg.initial.right, cfg.time.t_final,
            mesh.with_cells(acceptance.riemann_n_cells), cfg.initial.x0, gamma, cfg.space.cfl,
        )
    run.metrics["euler_vs_exact_riemann"] = riemann_error
    run.check(
        "euler_matches_exact_riemann", riemann_error <= acceptance.riemann_l1_tolerance, riemann_error,
        acceptance.riemann_l1_tolerance,
    )
    run.write_final(f)


def euler_vs_exact_riemann(left, right, t_final: float, mesh: SpatialMesh, x0=None, gamma: float = 2.0, cfl: float = 0.9) -> float:
    """Normalized L1 density error of the finite-volume Euler solver against the exact solution."""
    x0 = 0.5 * (mesh.x_min + mesh.x_max) if x0 is None else x0
    state = euler_solve(riemann_state(mesh, left, right, x0, gamma), t_final, mesh, cfl)
    exact = exact_riemann(left, right, mesh.centers, t_final, x0, gamma)[:, 0]
    return float(np.sum(np.abs(state.density - exact)) / np.sum(np.abs(exact)))


def _run_kernel_mode_build(run: ScenarioRun):
    cfg = run.cfg
    if cfg.kernel.operator == OperatorKind.DVM:
        raise ConfigValidationError([("kernel.operator", "kernel-mode-build needs a spectral operator")])
    grid = build_velocity_grid(cfg.grid)
    kernel = build_kernel(cfg.kernel)
    with run.timed("build"):
        km = compute_kernel_modes(grid, kernel, quadrature_level=cfg.kernel.quadrature_level, threads=run.threads)
    summary = kernel_summary(km, cfg.kernel.rank, cfg.kernel.decomposition.value)
    run.metrics.update(summary)

    defect = km.self_check_defect
    if defect is not None:
        tolerance = settings.quadrature_self_check_tolerance
        run.check("quadrature_self_check", defect <= tolerance, defect, tolerance)
    if kernel.is_decoupled and kernel.kind == "maxwell":
        expected = maxwell_beta_origin(km.trunc_radius)
        error = abs(summary["beta_origin"] - expected) / expected
        run.check("beta_origin_closed_form", error <= cfg.acceptance.beta_origin_tolerance, error, cfg.acceptance.beta_origin_tolerance)
    cache = Path(settings.kernel_cache_dir) / f"{summary['cache_key']}.kmod"
    if cache.exists():
        run.outputs.append(str(cache))


def kernel_summary(km: KernelModes, rank: Optional[int] = None, method: str = "svd") -> dict:
    """Cache key, shape, beta(0, 0), self-check defect and optional separated error."""
    origin = km.index_of((0,) * km.dim)
    summary = {
        "cache_key": kernel_cache_key(km.cache_descriptor()),
        "kernel": km.kernel.descriptor(),
        "n_modes": km.n_modes,
        "table_shape": list(km.table.shape),
        "beta_origin": float(np.real(km.table[origin, origin])),
        "self_check_defect": km.self_check_defect,
        "rank": None,
        "reconstruction_error": None,
    }
    if rank is not None:
        separated = decompose_kernel(km, min(rank, km.table.shape[0]), method)
        summary["rank"] = separated.rank
        summary["reconstruction_error"] = separated.reconstruction_error
    return summary


def _run_convergence_study(run: ScenarioRun):
    from utils.convergence import convergence_checks, convergence_report

    with run.timed("study"):
        table = convergence_report(run.cfg, force=run.force, threads=run.threads)
    run.convergence = table
    for row in table.rows:
        run.record(n=row.n, error=row.error, observed_order=np.nan if row.observed_order is None else row.observed_order)
    for name, passed, value, threshold in convergence_checks(table, run.cfg.acceptance):
        run.check(name, passed, value, threshold)


def _run_ap_sweep(run: ScenarioRun):
    cfg = run.cfg
    ap = cfg.ap
    acceptance = cfg.acceptance
    with run.timed("build"):
        grid = build_velocity_grid(cfg.grid)
        mesh = build_mesh(cfg)
        operator = build_collision(grid, cfg.kernel, run.threads)
        problem = build_problem(cfg.time, operator, run.threads)
        f0 = build_initial(cfg.initial, grid, mesh, run.rng)

    stepper = cfg.time.stepper.value
    dt = cfg.time.dt
    with run.timed("sweep"):
        single = ap_diagnostic(f0, dt, problem, stepper, ap.epsilons, ap.n_steps, mesh)
        repeated = ap_diagnostic(f0, dt, problem, stepper, ap.epsilons, ap.stability_steps, mesh)

    rows = []
    for one, many in zip(single, repeated):
        rows.append(APRow(stepper=stepper, **{**one, "stable": one["stable"] and many["stable"]}))
    stiffest = min(ap.epsilons)
    with run.timed("explicit"):
        if ap.check_explicit:
            explicit = ap_diagnostic(f0, dt, problem, "explicit", [stiffest], ap.stability_steps, mesh)
            rows.extend(APRow(stepper="explicit", **row) for row in explicit)
            run.check(
                "explicit_flagged_unstable", not explicit[0]["stable"],
                detail=f"{cfg.time.explicit_method.value} at eps={stiffest:g}, dt={dt:g}",
            )
    run.ap_sweep = rows
    for row in rows:
        run.record(
            epsilon=row.epsilon,
            implicit=float(row.stepper != "explicit"),
            stable=float(row.stable),
            distance_to_equilibrium=np.nan if row.distance_to_equilibrium is None else row.distance_to_equilibrium,
            euler_deviation=np.nan if row.euler_deviation is None else row.euler_deviation,
        )

    penalized = [r for r in rows if r.stepper == stepper]
    run.check("stable_for_all_epsilon", all(r.stable for r in penalized), detail=f"{stepper}, dt={dt:g}")
    limit = next((r for r in penalized if r.epsilon == stiffest), None)
    if limit is not None and limit.distance_to_equilibrium is not None:
        run.metrics["stiffest_distance_to_equilibrium"] = limit.distance_to_equilibrium
        run.check(
            "projects_to_equilibrium", limit.distance_to_equilibrium <= acceptance.distance_tolerance,
            limit.distance_to_equilibrium, acceptance.distance_tolerance,
        )


RUNNERS = {
    ScenarioKind.HOMOGENEOUS_RELAXATION: _run_homogeneous_relaxation,
    ScenarioKind.BKW_VERIFICATION: _run_bkw_verification,
    ScenarioKind.SOD_KINETIC: _run_sod_kinetic,
    ScenarioKind.KERNEL_MODE_BUILD: _run_kernel_mode_build,
    ScenarioKind.CONVERGENCE_STUDY: _run_convergence_study,
    ScenarioKind.AP_SWEEP: _run_ap_sweep,
}


def run_scenario(
    cfg: ScenarioConfig,
    out_dir: Optional[PathLike] = None,
    force: bool = False,
) -> RunReport:
    """Run one scenario and write its outputs.

    Args:
        cfg: Validated scenario
        out_dir: Output directory (default settings.output_dir / cfg.label)
        force: Lift resource guards (quadrature oracle size)

    Returns:
        RunReport: also written as report.json

    Raises:
        ConfigValidationError: parameters rejected by a builder
        AcceptanceCheckError: some acceptance gate failed (report attached)
        SolverError: runtime failure, message prefixed with the scenario label
    """
    out_dir = Path(out_dir) if out_dir is not None else Path(settings.output_dir) / cfg.label
    out_dir.mkdir(parents=True, exist_ok=True)
    run = ScenarioRun(cfg, out_dir, force)
    started_at = datetime.now(timezone.utc)
    start = time.perf_counter()
    logger.info(f"Starting scenario {cfg.label} ({cfg.kind.value}), seed={cfg.seed}, threads={run.threads}")

    try:
        RUNNERS[cfg.kind](run)
    except (ConfigValidationError, AcceptanceCheckError):
        raise
    except InvalidParameterError as exc:
        logger.error(f"Scenario {cfg.label} rejected: {exc}")
        raise ConfigValidationError([(cfg.kind.value, str(exc))]) from exc
    except SolverError as exc:
        logger.error(f"Scenario {cfg.label} failed: {exc}")
        exc.args = (f"scenario {cfg.label}: {exc}",)
        raise

    run.write_series()
    elapsed = time.perf_counter() - start
    report = RunReport(
        scenario=cfg.label,
        kind=cfg.kind.value,
        seed=cfg.seed,
        threads=run.threads,
        started_at=started_at,
        elapsed_seconds=elapsed,
        passed=run.passed,
        checks=run.checks,
        conservation_defects=run.conservation_defects,
        metrics=run.metrics,
        timings=run.timings,
        convergence=run.convergence,
        ap_sweep=run.ap_sweep,
        outputs=run.outputs + [str(out_dir / REPORT_FILE)],
    )
    (out_dir / REPORT_FILE).write_text(report.model_dump_json(indent=2))
    logger.info(
        f"Finished scenario {cfg.label} in {elapsed:.2f}s: "
        f"{sum(c.passed for c in run.checks)}/{len(run.checks)} checks passed"
    )

    if cfg.acceptance.enabled and not report.passed:
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        raise AcceptanceCheckError(f"scenario {cfg.label}: acceptance checks failed: {failed}", report)
    return report

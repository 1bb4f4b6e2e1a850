"""Time integrators for df/dt = Q(f, f) / epsilon.

Provides:
- explicit forward Euler and RK4 (need dt of order epsilon)
- the BGK-penalized IMEX step, asymptotic preserving
- an exponential relaxation step, exact on the BGK core
- an epsilon sweep reporting stability and distance to equilibrium

The penalized schemes split Q = [Q - mu (M - f)] + mu (M - f) and treat the
BGK part implicitly. M = M[f] is the discrete Maxwellian of f; the right-hand
side conserves moments, so M[f'] = M[f] and the implicit part is closed form.
"""

from typing import Callable, Iterable, Optional, Union

import numpy as np

from config import settings
from errors import InvalidParameterError
from logger import get_logger
from models.collision_table import CollisionTable
from models.problem import StiffProblem
from models.spectral import KernelModes, SeparatedKernel
from models.velocity import Distribution
from utils.dvm import dvm_collision
from utils.spectral_collision import collision_operator
from utils.velocity_grid import compute_moments, discrete_maxwellian, distance_to_equilibrium

logger = get_logger(__name__)

DEFAULT_EPSILONS = (1.0, 1e-2, 1e-4, 1e-6, 1e-8)


def collision_evaluator(
    operator: Union[KernelModes, SeparatedKernel, CollisionTable, Callable],
    threads: Optional[int] = None,
) -> Callable[[Distribution], Distribution]:
    """Wrap a collision discretization as f -> Q(f, f)."""
    if isinstance(operator, (KernelModes, SeparatedKernel)):
        return lambda f: collision_operator(f, operator, threads)
    if isinstance(operator, CollisionTable):
        return lambda f: dvm_collision(f, operator, threads)
    if callable(operator):
        return operator
    raise InvalidParameterError(f"not a collision operator: {operator!r}")


def _check_dt(dt: float):
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")


def _expand(x, dim: int):
    return np.asarray(x)[(...,) + (None,) * dim]


def step_explicit(f: Distribution, dt: float, problem: StiffProblem, method: Optional[str] = None) -> Distribution:
    """Forward Euler or classical RK4 on df/dt = Q(f, f)/epsilon.

    Stable only for dt of order epsilon; see ``is_unstable``.
    """
    _check_dt(dt)
    method = method or problem.explicit_method
    rate = 1.0 / problem.epsilon

    def rhs(values):
        return rate * problem.collision(f.with_values(values)).values

    y = f.values
    if method == "euler":
        return f.with_values(y + dt * rhs(y))
    if method == "rk4":
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        return f.with_values(y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    raise InvalidParameterError(f"unknown explicit method {method!r}")


def _penalized_parts(f: Distribution, dt: float, problem: StiffProblem):
    moments = compute_moments(f)
    equilibrium = discrete_maxwellian(moments, f.grid).values
    mu = _expand(problem.mu(moments), f.grid.dim)
    deviation = problem.collision(f).values - mu * (equilibrium - f.values)
    z = mu * dt / problem.epsilon
    return equilibrium, mu, deviation, z


def step_penalized_imex(
    f: Distribution,
    dt: float,
    problem: StiffProblem,
    damp_deviation: bool = True,
) -> Distribution:
    """First-order IMEX step, BGK penalty implicit, deviation explicit.

    With z = mu dt / epsilon and D = Q(f, f) - mu (M - f):

        damp_deviation=True:   f' = [f + z M + (dt/eps) D / (1 + z)] / (1 + z)
        damp_deviation=False:  f' = [f + z M + (dt/eps) D] / (1 + z)

    Both are first-order consistent and exact on the BGK surrogate
    (D = 0: f' - M = (f - M)/(1 + z)). Only the damped form tends to M[f]
    as epsilon -> 0; the undamped one tends to M + D/mu.

    Raises:
        DegenerateDensityError: rho <= rho_floor in some cell
    """
    _check_dt(dt)
    equilibrium, _, deviation, z = _penalized_parts(f, dt, problem)
    explicit = (dt / problem.epsilon) * deviation
    if damp_deviation:
        explicit = explicit / (1.0 + z)
    return f.with_values((f.values + z * equilibrium + explicit) / (1.0 + z))


def step_exponential(f: Distribution, dt: float, problem: StiffProblem) -> Distribution:
    """Exponential relaxation step.

        f' = e^{-z} f + (1 - e^{-z}) [M + g(z) D / mu],   g(z) = (1 - e^{-z}) / z

    with z = mu dt / epsilon and D = Q(f, f) - mu (M - f). Exact BGK solution
    when D = 0, a convex combination of f and M (so positivity preserving)
    in that case, and f' -> M as epsilon -> 0.
    """
    _check_dt(dt)
    equilibrium, mu, deviation, z = _penalized_parts(f, dt, problem)
    decay = np.exp(-z)
    relaxed = -np.expm1(-z)
    weight = relaxed / z
    values = decay * f.values + relaxed * (equilibrium + weight * deviation / mu)
    return f.with_values(values)


STEPPERS = {
    "explicit": step_explicit,
    "imex": step_penalized_imex,
    "exponential": step_exponential,
}


def get_stepper(name: str) -> Callable:
    try:
        return STEPPERS[name]
    except KeyError:
        raise InvalidParameterError(f"unknown stepper {name!r}; expected one of {sorted(STEPPERS)}")


def is_unstable(f: Distribution, reference_max: float, factor: Optional[float] = None) -> bool:
    """Blowup detector: non-finite values or max|f| > factor * reference_max."""
    factor = settings.blowup_factor if factor is None else factor
    if not f.is_finite():
        return True
    return float(np.max(np.abs(f.values))) > factor * reference_max


def ap_diagnostic(
    f0: Distribution,
    dt: float,
    problem: StiffProblem,
    stepper: str = "imex",
    epsilons: Iterable[float] = DEFAULT_EPSILONS,
    n_steps: int = 1,
    mesh=None,
) -> list:
    """Run the same dt across a range of epsilon.

    Homogeneous when ``mesh`` is None, otherwise f0 carries one velocity
    distribution per cell and each step is a Lie split step; the final cell
    moments are then compared with the Euler reference at the same time.

    Returns:
        list of dicts with keys epsilon, stable, distance_to_equilibrium,
        euler_deviation (None without transport) and max_abs
    """
    from utils.euler import euler_solve
    from utils.transport_fluid import density_deviation, fluid_state_from_moments, split_step

    _check_dt(dt)
    step = get_stepper(stepper)
    reference_max = float(np.max(np.abs(f0.values)))
    rows = []

    for epsilon in epsilons:
        p = problem.with_epsilon(epsilon)
        f = f0.copy()
        stable = True
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for _ in range(n_steps):
                try:
                    f = split_step(f, dt, p, mesh, stepper) if mesh is not None else step(f, dt, p)
                except (ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
                    logger.diag(f"ap_diagnostic eps={epsilon:g}: step failed ({exc})")
                    stable = False
                    break
                if is_unstable(f, reference_max):
                    stable = False
                    break

        row = {"epsilon": float(epsilon), "stable": stable, "distance_to_equilibrium": None,
               "euler_deviation": None, "max_abs": None}
        if stable:
            row["max_abs"] = float(np.max(np.abs(f.values)))
            row["distance_to_equilibrium"] = float(np.max(distance_to_equilibrium(f)))
            if mesh is not None:
                initial = fluid_state_from_moments(compute_moments(f0))
                reference = euler_solve(initial, n_steps * dt, mesh)
                kinetic = fluid_state_from_moments(compute_moments(f))
                row["euler_deviation"] = density_deviation(kinetic, reference)
        logger.diag(
            f"ap_diagnostic {stepper} eps={epsilon:g} dt={dt:g}: stable={stable} "
            f"distance={row['distance_to_equilibrium']}"
        )
        rows.append(row)
    return rows


from typing import Callable, Optional, Union

import numpy as np

from errors import InvalidParameterError
from models.velocity import Distribution, Moments

CollisionEvaluator = Callable[[Distribution], Distribution]

EXPLICIT_METHODS = ("euler", "rk4")


class StiffProblem:
    """df/dt = Q(f, f) / epsilon, with BGK penalization L(f) = mu (M[f] - f).

    ``penalization`` is either a fixed mu > 0 or ``None`` for the density rule
    mu = c * rho (``penalization_constant`` c, floored by
    ``penalization_floor``).
    """

    def __init__(
        self,
        epsilon: float,
        collision: CollisionEvaluator,
        penalization: Optional[float] = None,
        penalization_constant: float = 1.0,
        penalization_floor: float = 1e-12,
        explicit_method: str = "rk4",
    ):
        if not epsilon > 0:
            raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
        if penalization is not None and not penalization > 0:
            raise InvalidParameterError(f"penalization must be positive, got {penalization}")
        if explicit_method not in EXPLICIT_METHODS:
            raise InvalidParameterError(
                f"explicit_method must be one of {EXPLICIT_METHODS}, got {explicit_method!r}"
            )
        self.epsilon = float(epsilon)
        self.collision = collision
        self.penalization = penalization
        self.penalization_constant = float(penalization_constant)
        self.penalization_floor = float(penalization_floor)
        self.explicit_method = explicit_method

    def mu(self, moments: Moments) -> Union[float, np.ndarray]:
        """Penalization per cell."""
        if self.penalization is not None:
            return np.full(moments.density.shape, float(self.penalization))
        return np.maximum(self.penalization_constant * moments.density, self.penalization_floor)

    def with_epsilon(self, epsilon: float) -> "StiffProblem":
        return StiffProblem(
            epsilon,
            self.collision,
            self.penalization,
            self.penalization_constant,
            self.penalization_floor,
            self.explicit_method,
        )

    def __repr__(self):
        mu = self.penalization if self.penalization is not None else f"{self.penalization_constant}*rho"
        return f"StiffProblem(epsilon={self.epsilon:g}, mu={mu}, explicit={self.explicit_method})"

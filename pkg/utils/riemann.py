"""Exact solution of the Riemann problem for the 1D Euler equations.

Star-region pressure from the Toro pressure function (root found with
scipy's Brent solver), then self-similar sampling in x/t. Used as the
independent reference for the finite-volume Euler solver.
"""

import math
from typing import Tuple

import numpy as np
from scipy import optimize

from errors import InvalidParameterError

Primitive = Tuple[float, float, float]  # (rho, w, p)


class RiemannProblem:
    """Exact Riemann solution for left/right primitive states (rho, w, p)."""

    def __init__(self, left: Primitive, right: Primitive, gamma: float = 2.0):
        self.rho_l, self.w_l, self.p_l = map(float, left)
        self.rho_r, self.w_r, self.p_r = map(float, right)
        self.gamma = float(gamma)
        if min(self.rho_l, self.rho_r, self.p_l, self.p_r) <= 0:
            raise InvalidParameterError("Riemann states need positive density and pressure")
        self.a_l = math.sqrt(self.gamma * self.p_l / self.rho_l)
        self.a_r = math.sqrt(self.gamma * self.p_r / self.rho_r)
        if 2.0 * (self.a_l + self.a_r) / (self.gamma - 1.0) <= self.w_r - self.w_l:
            raise InvalidParameterError("Riemann data generate vacuum")
        self.p_star, self.w_star = self._solve_star()

    def _pressure_function(self, p, rho_k, p_k, a_k):
        g = self.gamma
        if p > p_k:
            a = 2.0 / ((g + 1.0) * rho_k)
            b = (g - 1.0) / (g + 1.0) * p_k
            return (p - p_k) * math.sqrt(a / (p + b))
        return 2.0 * a_k / (g - 1.0) * ((p / p_k) ** ((g - 1.0) / (2.0 * g)) - 1.0)

    def _solve_star(self):
        def residual(p):
            return (
                self._pressure_function(p, self.rho_l, self.p_l, self.a_l)
                + self._pressure_function(p, self.rho_r, self.p_r, self.a_r)
                + (self.w_r - self.w_l)
            )

        low = 1e-14 * min(self.p_l, self.p_r)
        high = max(self.p_l, self.p_r)
        while residual(high) < 0:
            high *= 2.0
        p_star = optimize.brentq(residual, low, high, xtol=1e-15, rtol=1e-14, maxiter=200)
        f_l = self._pressure_function(p_star, self.rho_l, self.p_l, self.a_l)
        f_r = self._pressure_function(p_star, self.rho_r, self.p_r, self.a_r)
        w_star = 0.5 * (self.w_l + self.w_r) + 0.5 * (f_r - f_l)
        return p_star, w_star

    def sample_point(self, s: float) -> Primitive:
        """State at similarity coordinate s = (x - x0)/t."""
        g = self.gamma
        g6 = (g - 1.0) / (g + 1.0)
        p_star, w_star = self.p_star, self.w_star

        if s <= w_star:
            rho, w, p, a = self.rho_l, self.w_l, self.p_l, self.a_l
            ratio = p_star / p
            if p_star > p:
                speed = w - a * math.sqrt((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g))
                if s <= speed:
                    return rho, w, p
                return rho * (ratio + g6) / (g6 * ratio + 1.0), w_star, p_star
            if s <= w - a:
                return rho, w, p
            a_star = a * ratio ** ((g - 1.0) / (2.0 * g))
            if s > w_star - a_star:
                return rho * ratio ** (1.0 / g), w_star, p_star
            w_fan = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * w + s)
            a_fan = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * (w - s))
            return (
                rho * (a_fan / a) ** (2.0 / (g - 1.0)),
                w_fan,
                p * (a_fan / a) ** (2.0 * g / (g - 1.0)),
            )

        rho, w, p, a = self.rho_r, self.w_r, self.p_r, self.a_r
        ratio = p_star / p
        if p_star > p:
            speed = w + a * math.sqrt((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g))
            if s >= speed:
                return rho, w, p
            return rho * (ratio + g6) / (g6 * ratio + 1.0), w_star, p_star
        if s >= w + a:
            return rho, w, p
        a_star = a * ratio ** ((g - 1.0) / (2.0 * g))
        if s <= w_star + a_star:
            return rho * ratio ** (1.0 / g), w_star, p_star
        w_fan = 2.0 / (g + 1.0) * (-a + 0.5 * (g - 1.0) * w + s)
        a_fan = 2.0 / (g + 1.0) * (a - 0.5 * (g - 1.0) * (w - s))
        return (
            rho * (a_fan / a) ** (2.0 / (g - 1.0)),
            w_fan,
            p * (a_fan / a) ** (2.0 * g / (g - 1.0)),
        )

    def sample(self, x: np.ndarray, t: float, x0: float = 0.5) -> np.ndarray:
        """Primitive profile (rho, w, p) at positions x and time t > 0, shape (len(x), 3)."""
        x = np.asarray(x, dtype=float)
        return np.array([self.sample_point((xi - x0) / t) for xi in x])


def exact_riemann(left: Primitive, right: Primitive, x, t: float, x0: float = 0.5, gamma: float = 2.0) -> np.ndarray:
    return RiemannProblem(left, right, gamma).sample(x, t, x0)

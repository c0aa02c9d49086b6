"""Small log-densities with known answers, shared by the variational and sampler tests."""

import numpy as np


class QuadraticTarget:
    """f(theta) = -precision / 2 * ||theta - center||^2."""

    has_curvature = True

    def __init__(self, center: np.ndarray, precision: float = 1.0):
        self.center = np.asarray(center, dtype=float)
        self.precision = precision
        self.dim = self.center.shape[0]

    def value(self, theta):
        return float(-0.5 * self.precision * np.sum((theta - self.center) ** 2))

    def gradient(self, theta):
        return -self.precision * (theta - self.center)

    def hessian_trace(self, theta):
        return -self.precision * self.dim

    def hessian_trace_gradient(self, theta):
        return np.zeros_like(theta)

    def is_feasible(self, theta):
        return True


class BoxTarget:
    """f(theta) = -sum(theta) on the open box |theta_i| < half_width, -inf outside."""

    has_curvature = False

    def __init__(self, dim: int, half_width: float = 1.0):
        self.dim = dim
        self.half_width = half_width

    def is_feasible(self, theta):
        return bool(np.all(np.abs(theta) < self.half_width))

    def value(self, theta):
        return float(-np.sum(theta)) if self.is_feasible(theta) else -np.inf

    def gradient(self, theta):
        return -np.ones_like(theta)

    def hessian_trace(self, theta):
        return 0.0

    def hessian_trace_gradient(self, theta):
        return np.zeros_like(theta)

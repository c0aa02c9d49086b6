"""
Normal distribution truncated to [0, inf).

Inverse-CDF sampling while mean / sigma >= -4; deeper in the tail, rejection
from a translated exponential proposal with the optimal rate
(alpha + sqrt(alpha^2 + 4)) / 2, alpha being the standardized lower bound.
"""

from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import ndtr, ndtri

TAIL_SWITCH = 4.0

ArrayLike = Union[float, np.ndarray]


def _standard_tail(alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Exact draws of Z | Z > alpha for alpha > 0 by exponential rejection."""
    lam = 0.5 * (alpha + np.sqrt(alpha ** 2 + 4.0))
    out = np.empty_like(alpha)
    pending = np.arange(alpha.size)
    while pending.size:
        z = alpha[pending] + rng.exponential(1.0 / lam[pending])
        accept = rng.random(pending.size) <= np.exp(-0.5 * (z - lam[pending]) ** 2)
        out[pending[accept]] = z[accept]
        pending = pending[~accept]
    return out


def truncated_normal_samples(mean: ArrayLike, var: ArrayLike, rng: np.random.Generator,
                             size: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    """
    Vectorized draws from N(mean, var) restricted to [0, inf).

    Raises:
        ValueError: any var <= 0
    """
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise ValueError("truncated normal variance must be positive")
    mean = np.asarray(mean, dtype=float)
    shape = np.broadcast_shapes(mean.shape, var.shape) if size is None else tuple(size)
    mean_b = np.broadcast_to(mean, shape).ravel()
    sigma = np.sqrt(np.broadcast_to(var, shape).ravel())
    alpha = -mean_b / sigma

    z = np.empty_like(alpha)
    body = alpha <= TAIL_SWITCH
    if np.any(body):
        u = 1.0 - rng.random(int(body.sum()))
        z[body] = -ndtri(u * ndtr(-alpha[body]))
    if np.any(~body):
        z[~body] = _standard_tail(alpha[~body], rng)
    return np.maximum(mean_b + sigma * z, 0.0).reshape(shape)


def truncated_normal_sample(mean: float, var: float, rng: np.random.Generator) -> float:
    return float(truncated_normal_samples(mean, var, rng, size=(1,))[0])

"""
Synthetic data with two known exact NMFs.

A 4 x 4 rank-3 core admits the factorizations (A1, W1) and (A2, W2) with
A2 = A1 M and W1 = M W2, where M mixes a cyclic permutation with the all-ones
matrix: M = (1 - t) P + (t / 3) J. M is nonnegative, so both pairs are
nonnegative and A1 W1 = A2 W2. The core is embedded as P_e core Q_e with
entrywise Uniform(0, 1) mixing matrices, and Uniform noise is added.
"""

from typing import Optional

import numpy as np
import structlog

from app.services.coverage.wad import wad
from app.services.datasets.loaders import Dataset
from app.services.nmf_model import Factorization

logger = structlog.get_logger(__name__)

CORE_SIZE = 4
CORE_RANK = 3
BASE_MIX = 0.4
MIN_CORE_WAD_DEG = 5.0
MIN_EMBEDDED_WAD_DEG = 1.0
MAX_CONSTRUCTION_TRIES = 100


class ToyConstructionError(RuntimeError):
    """Raised when no admissible pair of factorizations is found."""


def _mixing_matrix(t: float) -> np.ndarray:
    P = np.roll(np.eye(CORE_RANK), 1, axis=1)
    return (1.0 - t) * P + (t / CORE_RANK) * np.ones((CORE_RANK, CORE_RANK))


def two_factorization_core(rng: np.random.Generator, t: float = BASE_MIX):
    """Return ((A1, W1), (A2, W2)) for one draw of the 4 x 4 core."""
    A1 = rng.uniform(0.0, 0.3, size=(CORE_SIZE, CORE_RANK))
    A1[:CORE_RANK] += np.diag(rng.uniform(0.7, 1.0, size=CORE_RANK))
    W2 = rng.uniform(0.1, 1.0, size=(CORE_RANK, CORE_SIZE))
    M = _mixing_matrix(t)
    return Factorization(A1, M @ W2), Factorization(A1 @ M, W2)


def gen_two_nmf_toy(D: int = 500, N: int = 500, noise_eps: float = 0.01, seed: int = 0,
                    name: Optional[str] = None) -> Dataset:
    """
    Embedded two-NMF toy with Uniform(-noise_eps, noise_eps) noise, clipped at 0.

    Raises:
        ValueError: D or N below 4, or negative noise_eps
        ToyConstructionError: separation checks failed on every retry
    """
    if D < CORE_SIZE or N < CORE_SIZE:
        raise ValueError(f"D and N must be >= {CORE_SIZE}, got {(D, N)}")
    if noise_eps < 0:
        raise ValueError(f"noise_eps must be >= 0, got {noise_eps}")
    rng = np.random.default_rng(seed)

    for attempt in range(MAX_CONSTRUCTION_TRIES):
        t = BASE_MIX + 0.05 * rng.uniform(-1.0, 1.0) if attempt else BASE_MIX
        first, second = two_factorization_core(rng, t)
        core_wad = wad(first, second)
        if core_wad <= MIN_CORE_WAD_DEG:
            continue
        P = rng.uniform(0.0, 1.0, size=(D, CORE_SIZE))
        Q = rng.uniform(0.0, 1.0, size=(CORE_SIZE, N))
        truths = [Factorization(P @ F.A, F.W @ Q) for F in (first, second)]
        embedded_wad = wad(truths[0], truths[1])
        if embedded_wad <= MIN_EMBEDDED_WAD_DEG:
            continue
        break
    else:
        raise ToyConstructionError(f"no admissible construction after {MAX_CONSTRUCTION_TRIES} tries")

    X_clean = truths[0].reconstruction()
    noise = rng.uniform(-noise_eps, noise_eps, size=X_clean.shape) if noise_eps > 0 else 0.0
    X = np.maximum(X_clean + noise, 0.0)
    logger.info("two_nmf_toy_generated", D=D, N=N, noise_eps=noise_eps, seed=seed,
                core_wad=core_wad, embedded_wad=embedded_wad, attempts=attempt + 1)
    provenance = {
        "source": "synthetic",
        "generator": "two_nmf_toy",
        "D": D,
        "N": N,
        "noise_eps": noise_eps,
        "seed": seed,
        "core_wad_deg": core_wad,
        "embedded_wad_deg": embedded_wad,
    }
    return Dataset(X, name or "two_nmf_toy", provenance, ground_truth=truths)

"""
Sample sinks and chain reports.

A sink receives every emitted state as a flattened parameter vector.
OnlineNVI satisfies the protocol directly; TraceSink keeps a thinned copy for
runs without an ONVI stage.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Protocol

import numpy as np

from app.services.nmf_model import Factorization


class SamplerInitError(ValueError):
    """Raised when a chain cannot start from the given state or model."""


class SampleSink(Protocol):
    @property
    def exhausted(self) -> bool: ...

    def propose(self, theta: np.ndarray, source: str = "unknown") -> Any: ...


@dataclass
class TraceSink:
    """Keeps every thin-th proposed vector."""

    thin: int = 1
    processed: int = 0
    samples: List[np.ndarray] = field(default_factory=list)

    @property
    def exhausted(self) -> bool:
        return False

    def propose(self, theta: np.ndarray, source: str = "unknown") -> None:
        if self.processed % self.thin == 0:
            self.samples.append(np.array(theta, dtype=float))
        self.processed += 1


@dataclass
class ChainState:
    """Sampler state; ``rng_state`` is a PCG64 bit-generator state dict."""

    factorization: Factorization
    iteration: int
    rng_state: Dict[str, Any]
    step_size: Optional[float] = None

    @classmethod
    def start(cls, factorization: Factorization, seed: int, step_size: Optional[float] = None) -> "ChainState":
        factorization.require_nonnegative()
        return cls(factorization, 0, np.random.PCG64(seed).state, step_size)

    def generator(self) -> np.random.Generator:
        bit_generator = np.random.PCG64()
        bit_generator.state = self.rng_state
        return np.random.Generator(bit_generator)


@dataclass
class ChainReport:
    sampler: str
    n_samples: int
    acceptance_rate: float
    step_size: Optional[float] = None
    adapt_acceptance_rate: Optional[float] = None
    log_joint_trace: List[float] = field(default_factory=list)
    thin: int = 1
    final_state: Optional[ChainState] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sampler": self.sampler,
            "n_samples": self.n_samples,
            "acceptance_rate": self.acceptance_rate,
            "step_size": self.step_size,
            "adapt_acceptance_rate": self.adapt_acceptance_rate,
            "thin": self.thin,
            "log_joint_trace": [float(v) for v in self.log_joint_trace],
        }

"""
Run Report Models

Per-repetition results and the aggregate summary written next to them.
Machine-readable files keep full precision; human tables round later.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class RepetitionResult(BaseModel):
    """Outcome of one repetition (seed = base seed + repetition)."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    repetition: int
    seed: int
    method: str
    dataset: str
    status: Literal["ok", "failed"]
    elbo: Optional[float] = None
    n_components: Optional[int] = None
    cover_at_001: Optional[int] = Field(default=None, description="Covering number at 0.01 degrees")
    runtime_seconds: float = 0.0
    error: Optional[str] = None
    error_type: Optional[str] = None
    details: Dict[str, Any] = Field(default_factory=dict, description="Method-specific counters")


class StatBlock(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    mean: float
    q25: float
    q75: float


class RunSummary(BaseModel):
    """Aggregate over the successful repetitions of one run."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: str
    dataset: str
    repetitions: int
    n_ok: int
    n_failed: int
    elbo: Optional[StatBlock] = None
    n_components: Optional[StatBlock] = None
    cover_at_001: Optional[StatBlock] = None
    failed_repetitions: List[int] = Field(default_factory=list)

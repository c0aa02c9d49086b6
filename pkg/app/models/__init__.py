"""
Configuration and Record Models
"""

from app.models.run_config import (
    DatasetSource,
    LikelihoodConfig,
    LinConfig,
    MetricsConfig,
    NVIConfig,
    ONVIConfig,
    RRTConfig,
    RunConfig,
    SamplerConfig,
    SyntheticParams,
)
from app.models.mixture_record import ComponentRecord, MixtureRecord
from app.models.run_report import RepetitionResult, RunSummary, StatBlock

__all__ = [
    "DatasetSource",
    "LikelihoodConfig",
    "LinConfig",
    "MetricsConfig",
    "NVIConfig",
    "ONVIConfig",
    "RRTConfig",
    "RunConfig",
    "SamplerConfig",
    "SyntheticParams",
    "ComponentRecord",
    "MixtureRecord",
    "RepetitionResult",
    "RunSummary",
    "StatBlock",
]

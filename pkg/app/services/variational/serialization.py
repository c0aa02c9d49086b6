"""
Mixture file I/O through MixtureRecord.
"""

from pathlib import Path
from typing import Union

from app.models.mixture_record import ComponentRecord, MixtureRecord
from app.services.nmf_model import ModelSpec
from app.services.storage.local_files import atomic_write_text
from app.services.variational.mixture import MixtureComponent, VariationalMixture


def to_record(mix: VariationalMixture, spec: ModelSpec, elbo_value: float) -> MixtureRecord:
    return MixtureRecord(
        D=spec.D,
        N=spec.N,
        R=spec.R,
        likelihood=spec.likelihood.value,
        elbo=elbo_value,
        components=[ComponentRecord(weight=c.w, sigma2=c.sigma2, mu=c.mu.tolist()) for c in mix.components],
    )


def from_record(record: MixtureRecord) -> VariationalMixture:
    dim = record.R * (record.D + record.N)
    for i, comp in enumerate(record.components):
        if len(comp.mu) != dim:
            raise ValueError(f"component {i} has {len(comp.mu)} entries, expected {dim}")
    return VariationalMixture(tuple(MixtureComponent(c.mu, c.sigma2, c.weight) for c in record.components))


def write_mixture(path: Union[str, Path], mix: VariationalMixture, spec: ModelSpec, elbo_value: float) -> None:
    atomic_write_text(Path(path), to_record(mix, spec, elbo_value).model_dump_json(indent=2))


def read_mixture(path: Union[str, Path]) -> MixtureRecord:
    return MixtureRecord.model_validate_json(Path(path).read_text())

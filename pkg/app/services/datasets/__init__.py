"""
Data ingestion: matrix loaders and the synthetic two-NMF toy.
"""

from app.services.datasets.loaders import (
    Dataset,
    MatrixFormatError,
    clip_negatives,
    load_factorizations,
    load_matrix,
    parse_coordinate_sparse,
    parse_dense_csv,
    save_dataset,
)
from app.services.datasets.synthetic import ToyConstructionError, gen_two_nmf_toy, two_factorization_core

__all__ = [
    "Dataset",
    "MatrixFormatError",
    "clip_negatives",
    "load_factorizations",
    "load_matrix",
    "parse_coordinate_sparse",
    "parse_dense_csv",
    "save_dataset",
    "ToyConstructionError",
    "gen_two_nmf_toy",
    "two_factorization_core",
]

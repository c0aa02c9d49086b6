"""
Storage Services

Atomic local writes for run outputs and datasets.
"""

from .local_files import atomic_write_text, read_json, save_matrix, write_json, write_jsonl

__all__ = [
    "atomic_write_text",
    "read_json",
    "save_matrix",
    "write_json",
    "write_jsonl",
]

"""
Matrix Loaders

Reads data matrices from dense CSV (one row per dimension, comma separated)
or coordinate-sparse text ("D N nnz" header, then 1-indexed "row col value"
triplets; leading % lines are comments, duplicates are summed).

Negative entries are clipped to zero and counted.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np
import scipy.sparse
import structlog

from app.services.storage.local_files import save_matrix
from app.services.nmf_model import Factorization

logger = structlog.get_logger(__name__)

MatrixFormat = Literal["dense-csv", "coordinate-sparse"]


class MatrixFormatError(ValueError):
    """Raised for malformed matrix files; carries the 1-based line number."""

    def __init__(self, message: str, line_number: Optional[int] = None, path: Optional[str] = None):
        self.line_number = line_number
        self.path = path
        where = f"{path or '<input>'}" + (f":{line_number}" if line_number is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass
class Dataset:
    X: np.ndarray
    name: str
    provenance: Dict[str, Any]
    ground_truth: List[Factorization] = field(default_factory=list)
    clipped_count: int = 0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.X.shape


def _parse_float(token: str, line_number: int, path: Optional[str]) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MatrixFormatError(f"not a number: {token!r}", line_number, path) from None
    if not np.isfinite(value):
        raise MatrixFormatError(f"non-finite value: {token!r}", line_number, path)
    return value


def parse_dense_csv(lines: Iterable[str], path: Optional[str] = None) -> np.ndarray:
    rows: List[List[float]] = []
    width = None
    for line_number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        row = [_parse_float(tok.strip(), line_number, path) for tok in line.split(",")]
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MatrixFormatError(f"expected {width} columns, found {len(row)}", line_number, path)
        rows.append(row)
    if not rows:
        raise MatrixFormatError("empty matrix", None, path)
    return np.array(rows, dtype=float)


def parse_coordinate_sparse(lines: Iterable[str], path: Optional[str] = None) -> np.ndarray:
    header: Optional[Tuple[int, int, int]] = None
    rows: List[int] = []
    cols: List[int] = []
    values: List[float] = []
    for line_number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 3:
                raise MatrixFormatError("header must be 'D N nnz'", line_number, path)
            try:
                header = tuple(int(p) for p in parts)
            except ValueError:
                raise MatrixFormatError(f"non-integer header: {line!r}", line_number, path) from None
            if header[0] < 1 or header[1] < 1 or header[2] < 0:
                raise MatrixFormatError(f"invalid header dimensions {header}", line_number, path)
            continue
        if len(parts) != 3:
            raise MatrixFormatError("entry must be 'row col value'", line_number, path)
        try:
            r, c = int(parts[0]), int(parts[1])
        except ValueError:
            raise MatrixFormatError(f"non-integer index in {line!r}", line_number, path) from None
        if not (1 <= r <= header[0] and 1 <= c <= header[1]):
            raise MatrixFormatError(f"index ({r}, {c}) outside {header[0]} x {header[1]}", line_number, path)
        rows.append(r - 1)
        cols.append(c - 1)
        values.append(_parse_float(parts[2], line_number, path))
    if header is None:
        raise MatrixFormatError("missing 'D N nnz' header", None, path)
    if len(values) != header[2]:
        raise MatrixFormatError(f"header declares {header[2]} entries, found {len(values)}", None, path)
    coo = scipy.sparse.coo_matrix((values, (rows, cols)), shape=header[:2])
    return coo.toarray()


def clip_negatives(X: np.ndarray) -> Tuple[np.ndarray, int]:
    negative = X < 0
    count = int(negative.sum())
    if count:
        X = np.where(negative, 0.0, X)
    return X, count


def load_matrix(path: Union[str, Path], format: MatrixFormat = "dense-csv",
                name: Optional[str] = None) -> Dataset:
    """
    Load a nonnegative data matrix.

    Raises:
        MatrixFormatError: unparseable content (with line number)
        FileNotFoundError: missing file
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        if format == "dense-csv":
            X = parse_dense_csv(handle, str(path))
        elif format == "coordinate-sparse":
            X = parse_coordinate_sparse(handle, str(path))
        else:
            raise ValueError(f"unknown matrix format {format!r}")
    X, clipped = clip_negatives(X)
    if clipped:
        logger.warning("negative_values_clipped", path=str(path), count=clipped)
    logger.info("matrix_loaded", path=str(path), format=format, shape=X.shape)
    return Dataset(X, name or path.stem, {"source": "loaded", "path": str(path), "format": format},
                   clipped_count=clipped)


def save_dataset(dataset: Dataset, out_dir: Union[str, Path]) -> Path:
    """Write X.csv and truth_<k>.A.csv / truth_<k>.W.csv at full precision."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_matrix(out_dir / "X.csv", dataset.X)
    for k, F in enumerate(dataset.ground_truth):
        save_matrix(out_dir / f"truth_{k}.A.csv", F.A)
        save_matrix(out_dir / f"truth_{k}.W.csv", F.W)
    return out_dir


def load_factorizations(directory: Union[str, Path]) -> Dict[str, Factorization]:
    """
    Read every ``<name>.A.csv`` / ``<name>.W.csv`` pair in a directory.

    Raises:
        MatrixFormatError: an A file without its W partner
    """
    directory = Path(directory)
    found: Dict[str, Factorization] = {}
    for a_path in sorted(directory.glob("*.A.csv")):
        stem = a_path.name[: -len(".A.csv")]
        w_path = directory / f"{stem}.W.csv"
        if not w_path.exists():
            raise MatrixFormatError(f"missing partner {w_path.name}", None, str(a_path))
        with a_path.open(encoding="utf-8") as fa, w_path.open(encoding="utf-8") as fw:
            found[stem] = Factorization(parse_dense_csv(fa, str(a_path)), parse_dense_csv(fw, str(w_path)))
    return found

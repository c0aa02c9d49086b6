"""
Local result files.

Every output is written to a temporary file in the target directory and
renamed over the destination, so a reader never sees a partial file.
"""

import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Union

import numpy as np
import structlog

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_matrix(path: PathLike, M: np.ndarray) -> None:
    """Dense CSV at full precision."""
    buffer = io.StringIO()
    np.savetxt(buffer, np.atleast_2d(M), delimiter=",", fmt="%.17g")
    atomic_write_text(path, buffer.getvalue())


def write_json(path: PathLike, payload: Any) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def write_jsonl(path: PathLike, records: Iterable[Mapping[str, Any]]) -> None:
    lines = [json.dumps(dict(r), sort_keys=True, default=_jsonable) for r in records]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_json(path: PathLike) -> Any:
    with Path(path).open(encoding="utf-8") as handle:
        return json.load(handle)


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")

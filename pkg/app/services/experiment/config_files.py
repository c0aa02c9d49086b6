"""
Flat Run-Config Files

One ``dotted.key = value`` per line; ``#`` starts a comment; ``none`` and
``null`` mean unset. Values stay strings here and are coerced by the pydantic
models, so a single ConfigError lists every invalid field.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import structlog
from pydantic import ValidationError

from app.models.run_config import RunConfig

logger = structlog.get_logger(__name__)

NULL_TOKENS = {"none", "null"}


class ConfigError(ValueError):
    """Invalid run configuration; ``errors`` holds one message per problem."""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        self.errors = errors or []
        detail = "".join(f"\n  - {e}" for e in self.errors)
        super().__init__(message + detail)


def _set_dotted(tree: Dict[str, Any], key: str, value: Any, origin: str) -> None:
    parts = key.split(".")
    if any(not p for p in parts):
        raise ConfigError(f"{origin}: malformed key {key!r}")
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"{origin}: {key!r} nests under a scalar")
        node = child
    node[parts[-1]] = value


def _parse_value(raw: str) -> Optional[str]:
    value = raw.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return None if value.lower() in NULL_TOKENS else value


def parse_assignment(line: str, origin: str) -> tuple:
    if "=" not in line:
        raise ConfigError(f"{origin}: expected 'key = value', got {line.strip()!r}")
    key, raw = line.split("=", 1)
    return key.strip(), _parse_value(raw)


def parse_flat(lines: Iterable[str], source: str = "<config>") -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        origin = f"{source}:{number}"
        key, value = parse_assignment(line, origin)
        _set_dotted(tree, key, value, origin)
    return tree


def apply_overrides(tree: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    for i, item in enumerate(overrides):
        key, value = parse_assignment(item, f"--override #{i + 1}")
        _set_dotted(tree, key, value, f"--override #{i + 1}")
    return tree


def build_run_config(tree: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        errors = [
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors()
        ]
        raise ConfigError(f"{len(errors)} invalid config value(s)", errors) from None


def load_run_config(path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Read a flat config file (optional) and apply overrides.

    Raises:
        ConfigError: syntax errors or validation failures (all listed)
    """
    tree: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with path.open(encoding="utf-8") as handle:
            tree = parse_flat(handle, str(path))
    apply_overrides(tree, overrides)
    config = build_run_config(tree)
    logger.debug("run_config_loaded", path=str(path) if path else None, overrides=len(overrides))
    return config


def _flatten(prefix: str, value: Any, out: List[str]) -> None:
    if isinstance(value, dict):
        for key, child in value.items():
            _flatten(f"{prefix}.{key}" if prefix else key, child, out)
        return
    if value is None:
        text = "none"
    elif isinstance(value, bool):
        text = "true" if value else "false"
    elif isinstance(value, float):
        text = repr(value)
    else:
        text = str(value)
    out.append(f"{prefix} = {text}")


def dump_flat(config: RunConfig) -> str:
    """Every field, defaults included, in the format parse_flat reads."""
    lines: List[str] = []
    _flatten("", config.model_dump(mode="json"), lines)
    return "\n".join(lines) + "\n"

"""Key/value configuration files.

Parameter, gain and scenario files are YAML mappings.  Every field of the
configuration dataclasses can be overridden by a key of the same name.  A key
ending in ``_deg`` is accepted for any angle field and converted to radians,
so ``kappa_deg: 90`` sets ``kappa``.  Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Any, Mapping, TypeVar

import numpy as np
import yaml


class ConfigurationError(ValueError):
    """Invalid parameters, bounds or files."""


T = TypeVar("T")


def load_yaml(path) -> dict:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return data


def _convert(value, current):
    if isinstance(current, np.ndarray):
        return np.asarray(value, dtype=float)
    if isinstance(current, bool):
        return bool(value)
    if isinstance(current, (int, float)) and not isinstance(value, (list, tuple)):
        return type(current)(value) if isinstance(current, float) else value
    if isinstance(current, tuple):
        return tuple(value)
    return value


def from_mapping(cls: type[T], data: Mapping[str, Any] | None, base: T | None = None) -> T:
    """Build (or update ``base`` of) dataclass ``cls`` from a flat mapping."""
    obj = base if base is not None else cls()
    if not data:
        return obj
    names = {f.name for f in dataclasses.fields(cls)}
    updates = {}
    for key, value in data.items():
        if key in names:
            updates[key] = _convert(value, getattr(obj, key))
        elif key.endswith("_deg") and key[:-4] in names:
            name = key[:-4]
            rad = np.radians(np.asarray(value, dtype=float))
            updates[name] = float(rad) if rad.ndim == 0 else rad
        else:
            raise ConfigurationError(f"unknown {cls.__name__} key: {key!r}")
    return dataclasses.replace(obj, **updates)


def to_mapping(obj) -> dict:
    """Plain-python view of a config dataclass, suitable for YAML dumping."""
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, np.ndarray):
            value = value.tolist()
        elif isinstance(value, float) and not math.isfinite(value):
            value = str(value)
        out[f.name] = value
    return out


def dump_yaml(data: Mapping, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        yaml.safe_dump(dict(data), fh, sort_keys=False)

"""CSV logs and JSON metric summaries.

Log layout: one comment line ``# liftwing-log schema=<n> columns=<k>``, a
header row with the column names, then one row per controller sample.  Floats
are written with ``repr`` so a log round-trips exactly and two identical runs
produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from liftwing.config import ConfigurationError
from liftwing.harness.metrics import ScenarioMetrics
from liftwing.harness.scenario import LOG_COLUMNS, LOG_SCHEMA_VERSION

INTEGER_COLUMNS = {"alloc_iters", "active_mask"}


def _fmt(name: str, value: float) -> str:
    if name in INTEGER_COLUMNS:
        return str(int(value))
    return repr(float(value))


def write_csv(result, path, decimate: int = 1) -> Path:
    """Write every ``decimate``-th controller sample of ``result``."""
    if decimate < 1:
        raise ConfigurationError("decimate must be >= 1")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(result.columns)
    lines = [f"# liftwing-log schema={LOG_SCHEMA_VERSION} columns={len(cols)}", ",".join(cols)]
    for row in result.rows[::decimate]:
        lines.append(",".join(_fmt(c, v) for c, v in zip(cols, row)))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().strip()
        if not first.startswith("# liftwing-log"):
            raise ConfigurationError(f"{path}: not a liftwing log")
        meta = dict(kv.split("=", 1) for kv in first.split()[2:])
        if int(meta["schema"]) != LOG_SCHEMA_VERSION:
            raise ConfigurationError(f"{path}: unsupported schema {meta['schema']}")
        cols = fh.readline().strip().split(",")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    if cols != list(LOG_COLUMNS):
        raise ConfigurationError(f"{path}: column mismatch")
    return cols, rows


def write_metrics(metrics: ScenarioMetrics, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def read_metrics(path) -> ScenarioMetrics:
    with Path(path).open() as fh:
        return ScenarioMetrics.from_dict(json.load(fh))

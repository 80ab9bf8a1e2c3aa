"""
Results bundle writer

Layout of an output directory:

    config.json       echo of the parsed configuration
    summary.json      final/best losses, recovered parameters, counters
    <run>.csv         one learning-curve row per epoch, appended as it is computed
    bench.csv         timing table (bench-backward)

CSV files are UTF-8 with LF line endings; JSON uses sorted keys.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Sequence, Union

import numpy as np
import pandas as pd

from ..exceptions import ConfigError
from ..imitation.train import CURVE_COLUMNS

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _jsonable(value: Any) -> Any:
    """Convert numpy values to plain JSON types; non-finite floats become None"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dump_json(data: Dict[str, Any]) -> str:
    """Stable JSON text (sorted keys, trailing newline)"""
    return json.dumps(_jsonable(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


class CurveWriter:
    """Appends learning-curve rows to one CSV file"""

    def __init__(self, path: Path, columns: Sequence[str] = CURVE_COLUMNS):
        self.path = path
        self.columns = list(columns)
        self.rows = 0
        pd.DataFrame(columns=self.columns).to_csv(path, index=False, lineterminator="\n", encoding="utf-8")

    def __call__(self, row: Dict[str, Any]) -> None:
        frame = pd.DataFrame([{c: row.get(c, float("nan")) for c in self.columns}], columns=self.columns)
        frame.to_csv(self.path, mode="a", header=False, index=False, lineterminator="\n", encoding="utf-8")
        self.rows += 1


class ResultsWriter:
    """
    Writes every artifact of one experiment below ``out_dir``.

    Example:
        >>> with ResultsWriter("results/pendulum") as writer:
        ...     writer.write_config(config)
        ...     on_epoch = writer.curve("mpc.dx_n100_trial0.csv")
        ...     writer.write_summary({"best_val": 0.1})
    """

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)

    def __enter__(self) -> "ResultsWriter":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is not None:
            logger.warning("experiment aborted; partial results kept in %s", self.out_dir)

    def path(self, name: str) -> Path:
        """
        Resolve a file name inside the output directory.

        Raises:
            ConfigError: The name escapes the output directory
        """
        root = self.out_dir.resolve()
        target = (root / name).resolve()
        if target != root and root not in target.parents:
            raise ConfigError(f"refusing to write {name!r} outside {root}")
        return target

    def curve(self, name: str) -> CurveWriter:
        return CurveWriter(self.path(name))

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.path(name)
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
        return path

    def write_summary(self, summary: Dict[str, Any]) -> Path:
        path = self.path("summary.json")
        data = dict(summary)
        data["schema_version"] = SCHEMA_VERSION
        path.write_text(dump_json(data), encoding="utf-8")
        return path

    def write_config(self, config) -> Path:
        path = self.path("config.json")
        path.write_text(dump_json(config.to_dict()), encoding="utf-8")
        return path

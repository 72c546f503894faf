"""CSV tables with a ``# key=<json>`` metadata header, plus JSON summaries."""

from __future__ import annotations

import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, TextIO, Tuple, Union

import numpy as np

__all__ = ["format_value", "write_csv", "read_csv", "write_json", "to_jsonable"]


def format_value(v: Any) -> str:
    """Shortest round-trip text for floats; ints and strings verbatim."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_jsonable(v: Any):
    if isinstance(v, dict):
        return {str(k): to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return to_jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    return v


def _dump_csv(fh: TextIO, metadata: Dict[str, Any], columns: Sequence[str], rows) -> None:
    for k, v in metadata.items():
        if "=" in k or "\n" in k:
            raise ValueError(f"invalid metadata key {k!r}")
        fh.write(f"# {k}={json.dumps(to_jsonable(v), sort_keys=True)}\n")
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(format_value(v) for v in row) + "\n")


def write_csv(target: Union[str, Path, TextIO], metadata: Dict[str, Any], columns: Sequence[str], rows) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            _dump_csv(fh, metadata, columns, rows)
    else:
        _dump_csv(target, metadata, columns, rows)


def read_csv(source: Union[str, Path, TextIO]) -> Tuple[Dict[str, Any], List[str], List[List[str]]]:
    """Inverse of :func:`write_csv`; data cells come back as strings."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    meta: Dict[str, Any] = {}
    columns: List[str] = []
    rows: List[List[str]] = []
    for line in io.StringIO(text):
        line = line.rstrip("\n")
        if line.startswith("# "):
            key, _, val = line[2:].partition("=")
            meta[key] = json.loads(val)
        elif not columns:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, columns, rows


def write_json(path: Union[str, Path], data: Dict[str, Any]) -> None:
    Path(path).write_text(json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")

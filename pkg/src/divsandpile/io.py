"""CSV and JSON output for fields, variograms and experiment reports.

JSON reports have the top-level layout ``{config, results, seeds, timing}``.
Floats are written with 17 significant digits so that a report read back
reproduces every double exactly.  Only the ``timing`` block varies between
reruns of the same configuration.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import os
import time
from pathlib import Path

import numpy as np

from .graph import Graph

__all__ = [
    "dumps_json",
    "write_json_report",
    "write_vertex_csv",
    "write_variogram_csv",
    "write_samples_csv",
    "report_filename",
]


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == int(x) and abs(x) < 1e17:
        return f"{x:.1f}"
    return format(x, ".17g")


def _encode(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, enum.Enum):
        _encode(obj.value, indent, level, out)
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(_quote(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(f"{pad}{_quote(str(k))}: ")
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            parts = []
            for v in seq:
                _encode(v, indent, level + 1, parts)
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(seq):
            out.append(pad)
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _quote(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def dumps_json(obj, indent: int = 2) -> str:
    """Serialize ``obj`` as JSON with 17-significant-digit floats.

    Each scalar in a list of scalars is encoded separately, so the output
    does not depend on how numpy would print the array.
    """
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def report_filename(experiment: str, seed) -> str:
    return f"{experiment}-seed{seed}.json"


def write_json_report(path, config: dict, results: dict, seeds: dict,
                      wall_time: float | None = None) -> Path:
    """Write ``{config, results, seeds, timing}``; ``path`` may be a directory."""
    path = Path(path)
    if path.is_dir() or path.suffix == "":
        path.mkdir(parents=True, exist_ok=True)
        path = path / report_filename(config.get("command", "report"), seeds.get("master", 0))
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    timing = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    if wall_time is not None:
        timing["wall_time_s"] = float(wall_time)
    doc = {"config": config, "results": results, "seeds": seeds, "timing": timing}
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(dumps_json(doc))
    os.replace(tmp, path)
    return path


def _num(x) -> str:
    return format(float(x), ".17g")


def write_vertex_csv(path, graph: Graph, values, name: str = "value") -> Path:
    """One row per vertex: ``index, x0..x{d-1}, value`` (no coordinates on general graphs)."""
    values = np.asarray(values, dtype=float)
    if values.shape != (graph.vertex_count,):
        raise ValueError("one value per vertex required")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coords = graph.coords_array() if graph.is_lattice else None
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        head = ["index"]
        if coords is not None:
            head += [f"x{i}" for i in range(graph.d)]
        w.writerow(head + [name])
        for v in range(graph.vertex_count):
            row = [v]
            if coords is not None:
                row += [int(c) for c in coords[v]]
            w.writerow(row + [_num(values[v])])
    return path


def write_variogram_csv(path, lags, values) -> Path:
    """One row per lag: ``x0..x{d-1}, norm2, value``."""
    lags = np.atleast_2d(np.asarray(lags, dtype=np.int64))
    values = np.asarray(values, dtype=float)
    if lags.shape[0] != values.size:
        raise ValueError("one value per lag required")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(lags.shape[1])] + ["norm2", "value"])
        for lag, val in zip(lags, values):
            w.writerow([int(c) for c in lag] + [_num(np.linalg.norm(lag)), _num(val)])
    return path


def write_samples_csv(path, samples, columns=None) -> Path:
    """One row per trial: ``trial, c0, c1, ...``."""
    arr = np.atleast_2d(np.asarray(samples, dtype=float))
    columns = list(columns) if columns is not None else [f"c{i}" for i in range(arr.shape[1])]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial"] + columns)
        for t, row in enumerate(arr):
            w.writerow([t] + [_num(v) for v in row])
    return path

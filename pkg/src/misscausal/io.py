"""File formats: adjacency/matrix CSV, parameter checkpoints, reward traces."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .datagen import format_float
from .numcore import Tensor

CHECKPOINT_FORMAT = "misscausal-checkpoint"
CHECKPOINT_VERSION = 1


class FormatError(ValueError):
    pass


def write_adjacency(path, A) -> None:
    A = np.asarray(A)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in A:
            w.writerow(int(v) for v in row)


def read_adjacency(path) -> np.ndarray:
    """Square 0/1 matrix with no header; row i, column j is the edge i -> j."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path}: empty adjacency file")
    d = len(rows)
    A = np.zeros((d, d), dtype=np.int8)
    for i, row in enumerate(rows):
        if len(row) != d:
            raise FormatError(f"{path}: row {i + 1} has {len(row)} entries, expected {d} (square matrix)")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell not in ("0", "1"):
                try:
                    value = float(cell)
                except ValueError:
                    value = None
                if value not in (0.0, 1.0):
                    raise FormatError(f"{path}: entry at row {i + 1}, column {j + 1} is not 0/1: {cell!r}")
                cell = str(int(value))
            A[i, j] = int(cell)
    return A


def write_matrix(path, X, header: Sequence[str] | None = None) -> None:
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in X:
            w.writerow(format_float(v) for v in row)


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# -- checkpoints -----------------------------------------------------------
def _encode(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "values": [float(v) for v in arr.ravel()]}


def _decode(blob: Mapping) -> np.ndarray:
    values = np.array(blob["values"], dtype=np.float64)
    shape = tuple(int(s) for s in blob["shape"])
    if values.size != int(np.prod(shape)):
        raise FormatError(f"checkpoint array has {values.size} values for shape {shape}")
    return values.reshape(shape)


def save_checkpoint(path, groups: Mapping[str, Mapping[str, Tensor | np.ndarray]],
                    meta: Mapping | None = None) -> None:
    """JSON checkpoint: ``{"format", "version", "meta", "groups": {group: {name: {shape, values}}}}``.
    Python's float repr round-trips, so reloading is bit-exact."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": dict(meta or {}),
        "groups": {
            g: {k: _encode(v.data if isinstance(v, Tensor) else v) for k, v in tensors.items()}
            for g, tensors in groups.items()
        },
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path) -> tuple[dict[str, dict[str, np.ndarray]], dict]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON checkpoint ({exc})") from None
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"{path}: unrecognised checkpoint format {doc.get('format')!r}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    groups = {g: {k: _decode(v) for k, v in t.items()} for g, t in doc["groups"].items()}
    return groups, doc.get("meta", {})


def imnet_groups(params) -> dict:
    return {"imnet": params.named(), "imnet_rescale": {"lo": params.lo, "hi": params.hi}}


def imnet_from_groups(groups: Mapping):
    from .imputer import ImNetParams

    try:
        t = groups["imnet"]
        r = groups["imnet_rescale"]
        return ImNetParams(*(Tensor(t[k], requires_grad=True) for k in ("W1", "b1", "W2", "b2", "W3", "b3")),
                           lo=r["lo"], hi=r["hi"])
    except KeyError as exc:
        raise FormatError(f"checkpoint lacks ImNet entry {exc}") from None


def save_imnet(path, params, meta: Mapping | None = None) -> None:
    save_checkpoint(path, imnet_groups(params), meta)


def load_imnet(path):
    groups, _ = load_checkpoint(path)
    return imnet_from_groups(groups)


# -- traces ------------------------------------------------------------------
TRACE_COLUMNS = ("epoch", "reward", "score", "h", "is_dag", "edges", "actor_loss", "critic_loss",
                 "literal_loss", "mean_value", "lambda1", "lambda2", "best_reward")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def write_trace(path, trace: Sequence[Mapping]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace:
            w.writerow(_cell(row[c]) for c in TRACE_COLUMNS)

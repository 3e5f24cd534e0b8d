"""File formats: binary snapshots with a JSON header, CSV tables and schema-checked JSON.

Snapshot layout (little endian)::

    b"VPLSNAP1" | uint64 header length | UTF-8 JSON header | zero padding to 8 bytes | float64 data

The header maps each field name to ``{"offset", "shape", "dtype"}``, with
offsets relative to the start of the data block, plus a free ``meta`` object.
"""

from __future__ import annotations

import csv
import json
import math
import os
import struct
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from .hermite_macro import TrajectoryFrame

__all__ = [
    "MAGIC",
    "output_name",
    "write_snapshot",
    "read_snapshot",
    "write_trajectory",
    "read_trajectory",
    "write_csv",
    "read_csv",
    "to_jsonable",
    "load_schema",
    "validate_json",
    "write_json",
]

MAGIC = b"VPLSNAP1"
_DTYPE = "<f8"


def output_name(command: str, seed: int, suffix: str = "", ext: str = "") -> str:
    """Deterministic file name ``{command}_{seed}[_suffix].ext``."""
    stem = f"{command.replace('-', '_')}_{int(seed)}"
    if suffix:
        stem += f"_{suffix}"
    return stem + (f".{ext}" if ext else "")


def _ensure_dir(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create directory {path.parent}: {exc}") from exc


# ---------------------------------------------------------------------------
# snapshots


def write_snapshot(path, fields: Dict[str, np.ndarray], meta: Optional[dict] = None) -> Path:
    """Write float64 arrays in insertion order behind a JSON header."""
    path = Path(path)
    entries, blobs, offset = {}, [], 0
    for name, arr in fields.items():
        a = np.ascontiguousarray(arr, dtype=_DTYPE)
        entries[name] = {"offset": offset, "shape": list(a.shape), "dtype": _DTYPE}
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"format": "vpl-snapshot", "version": 1, "meta": to_jsonable(meta or {}),
                         "fields": entries}, sort_keys=True).encode("utf-8")
    pad = (-(len(MAGIC) + 8 + len(header))) % 8
    _ensure_dir(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(b"\0" * pad)
        for b in blobs:
            fh.write(b)
    return path


def read_snapshot(path) -> Tuple[Dict[str, np.ndarray], dict]:
    """Inverse of :func:`write_snapshot`; returns ``(fields, meta)``."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    start = 16 + hlen
    start += (-start) % 8
    out = {}
    for name, e in header["fields"].items():
        count = int(np.prod(e["shape"], dtype=np.int64))
        out[name] = np.frombuffer(raw, dtype=e["dtype"], count=count,
                                  offset=start + e["offset"]).reshape(e["shape"]).copy()
    return out, header["meta"]


def write_trajectory(path, frames: Sequence[TrajectoryFrame], meta: dict) -> Path:
    """Store a list of frames; per-frame scalars go to ``meta["frames"]``."""
    fields: Dict[str, np.ndarray] = {}
    info = []
    for k, fr in enumerate(frames):
        info.append({"t": float(fr.t), "gamma": float(fr.gamma)})
        fields[f"F_minus/{k}"] = fr.F_minus
        fields[f"E/{k}"] = fr.E
        fields[f"psi/{k}"] = fr.psi
        if fr.F_plus is not None:
            fields[f"F_plus/{k}"] = fr.F_plus
    return write_snapshot(path, fields, {**meta, "frames": info})


def read_trajectory(path) -> Tuple[List[TrajectoryFrame], dict]:
    fields, meta = read_snapshot(path)
    frames = []
    for k, info in enumerate(meta["frames"]):
        frames.append(TrajectoryFrame(info["t"], fields[f"F_minus/{k}"], fields[f"E/{k}"],
                                      info["gamma"], fields[f"psi/{k}"], fields.get(f"F_plus/{k}")))
    return frames, meta


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Fixed column order, ``%.17g`` floats, ``\\n`` line endings."""
    path = Path(path)
    _ensure_dir(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns))
        for row in rows:
            if isinstance(row, dict):
                row = [row[c] for c in columns]
            if len(row) != len(columns):
                raise ValueError(f"{path}: row has {len(row)} entries, expected {len(columns)}")
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> Tuple[List[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)


# ---------------------------------------------------------------------------
# JSON


def to_jsonable(obj):
    """Plain-Python copy with numpy scalars unwrapped and non-finite floats mapped to ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, os.PathLike):
        return os.fspath(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("vpl_limit").joinpath("schemas", f"{name}.json").read_text("utf-8")
    return json.loads(text)


def validate_json(obj, schema: str):
    """Raise ``jsonschema.ValidationError`` if ``obj`` does not match the named schema."""
    jsonschema.validate(obj, load_schema(schema))


def write_json(path, obj, schema: Optional[str] = None) -> Path:
    """Validate against ``schemas/<schema>.json`` (if given) and write sorted, indented JSON."""
    path = Path(path)
    data = to_jsonable(obj)
    if schema is not None:
        validate_json(data, schema)
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path

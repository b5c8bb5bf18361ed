"""Portable named-array checkpoint archives.

A checkpoint is an NPZ file (a zip of standard ``.npy`` members, one per
array) whose member names are slash-namespaced parameter names such as
``text/embed`` or ``projector/queries``.  Each ``.npy`` member carries its own
shape and dtype header with row-major (C-order) float data, so any NPY reader
can consume the archive.  A ``__meta__`` member holds a JSON string with
non-array state (config, counters).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["save_archive", "load_archive"]

_META_KEY = "__meta__"


def save_archive(path: str | Path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named arrays plus a JSON metadata blob; overwrites ``path``."""
    payload = {name: np.ascontiguousarray(arr) for name, arr in arrays.items()}
    payload[_META_KEY] = np.array(json.dumps(meta or {}))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_archive(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back (arrays, meta) exactly as stored."""
    with np.load(path, allow_pickle=False) as data:
        arrays = {name: data[name] for name in data.files if name != _META_KEY}
        meta = json.loads(str(data[_META_KEY])) if _META_KEY in data.files else {}
    return arrays, meta

"""Versioned parameter checkpoints.

A checkpoint is an .npz container holding one float64 array per parameter
name, plus a reserved ``__meta__`` entry carrying a JSON header:

    {"format_version": 1, "meta": {...caller metadata...}}

Parameter names may contain dots (e.g. "trunk.block2.w"); shared weights are
stored once under their canonical name. Loading an unknown format version is
refused. The round trip is lossless: arrays come back bit-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_META_KEY = "__meta__"


def save_params(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    if _META_KEY in arrays:
        raise ValueError(f"parameter name {_META_KEY!r} is reserved")
    header = json.dumps({"format_version": FORMAT_VERSION, "meta": meta or {}})
    payload = {name: np.asarray(a) for name, a in arrays.items()}
    payload[_META_KEY] = np.frombuffer(header.encode("utf-8"), dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_params(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path) as bundle:
        if _META_KEY not in bundle:
            raise ValueError(f"{path}: not a parameter checkpoint (missing header)")
        header = json.loads(bytes(bundle[_META_KEY].tobytes()).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('format_version')}")
        arrays = {name: bundle[name] for name in bundle.files if name != _META_KEY}
    return arrays, header.get("meta", {})

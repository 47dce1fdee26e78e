"""Versioned JSON container for tensors plus metadata.

Floats are written with ``repr`` precision, so a save/load round trip is
exact and identical inputs give byte-identical files.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataError

FORMAT = "fairlens-checkpoint"
VERSION = 1


def dumps(kind: str, tensors: dict, meta: dict) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "meta": meta,
        "tensors": {
            name: {"shape": list(np.shape(t)), "data": np.asarray(t, dtype=float).ravel().tolist()}
            for name, t in tensors.items()
        },
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def save(path, kind: str, tensors: dict, meta: dict) -> str:
    text = dumps(kind, tensors, meta)
    Path(path).write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode()).hexdigest()


def load(path, kind: str | None = None) -> tuple:
    """Return ``(tensors, meta)``; ``kind`` guards against loading the wrong artifact."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise DataError(f"{path} is not a fairlens checkpoint (v{VERSION})")
    if kind is not None and doc["kind"] != kind:
        raise DataError(f"{path} holds a {doc['kind']!r} checkpoint, expected {kind!r}")
    tensors = {
        name: np.array(t["data"], dtype=float).reshape(t["shape"]) for name, t in doc["tensors"].items()
    }
    return tensors, doc["meta"]

"""Checkpoint container.

A checkpoint is an ``.npz`` archive. Every parameter block is stored under
``param/<name>``, non-trained buffers under ``buffer/<name>``, the frozen
embedding table under ``emb/words`` and ``emb/vectors``, and a JSON
header under ``__meta__`` holding ``{"format", "version", "kind",
"config", "extra"}``. Writes are deterministic: the same model always
produces the same bytes.
"""

from __future__ import annotations

import io
import json
import os

import numpy as np

from .neural import EmbeddingTable

FORMAT = "kgqa-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save(path, kind: str, params: dict, config: dict, embeddings: EmbeddingTable,
         buffers: dict | None = None, extra: dict | None = None) -> None:
    meta = {"format": FORMAT, "version": VERSION, "kind": kind, "config": config,
            "extra": extra or {}}
    arrays = {"__meta__": np.array(json.dumps(meta, sort_keys=True))}
    for name in sorted(params):
        arrays[f"param/{name}"] = np.asarray(params[name], dtype=np.float64)
    for name in sorted(buffers or {}):
        arrays[f"buffer/{name}"] = np.asarray(buffers[name], dtype=np.float64)
    arrays["emb/words"] = np.array(embeddings.words)
    arrays["emb/vectors"] = embeddings.vectors
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def load(path, kind: str | None = None):
    """Return ``(meta, params, buffers, embeddings)``."""
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != FORMAT:
            raise CheckpointError(f"{path}: not a {FORMAT} file")
        if meta.get("version") != VERSION:
            raise CheckpointError(f"{path}: unsupported version {meta.get('version')}")
        if kind is not None and meta["kind"] != kind:
            raise CheckpointError(f"{path}: expected a {kind} checkpoint, found {meta['kind']}")
        params = {k[6:]: z[k].copy() for k in z.files if k.startswith("param/")}
        buffers = {k[7:]: z[k].copy() for k in z.files if k.startswith("buffer/")}
        emb = EmbeddingTable([str(w) for w in z["emb/words"]], z["emb/vectors"].copy())
    return meta, params, buffers, emb

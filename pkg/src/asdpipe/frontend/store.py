"""On-disk feature store.

One directory per (recipe, trial, machine type, split) holding
``header.json``, ``embeddings.f32le`` (row-major little-endian float32) and
``meta.jsonl`` (one clip projection per row, in row order).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import CorruptionError, ValidationError

META_FIELDS = ("clip_id", "machine_type", "section", "domain", "split", "label", "subset")


def project_record(rec) -> dict:
    return {k: getattr(rec, k) for k in META_FIELDS}


@dataclass
class EmbeddingSet:
    """Per-clip feature rows plus aligned clip metadata."""

    X: np.ndarray
    meta: list = field(default_factory=list)
    recipe_id: str = ""
    seed: int | None = None
    checkpoint_sha256: str | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float32)
        if X.ndim != 2:
            raise ValidationError("embedding matrix must be 2-D")
        if X.shape[0] != len(self.meta):
            raise ValidationError(f"{X.shape[0]} rows but {len(self.meta)} metadata entries")
        self.X = X

    @classmethod
    def from_records(cls, X, records, **provenance) -> "EmbeddingSet":
        return cls(np.asarray(X), [project_record(r) for r in records], **provenance)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    def column(self, key) -> np.ndarray:
        return np.array([m[key] for m in self.meta])

    def subset(self, mask) -> "EmbeddingSet":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return EmbeddingSet(self.X[idx], [self.meta[i] for i in idx], self.recipe_id, self.seed,
                            self.checkpoint_sha256)


def store_embeddings(es: EmbeddingSet, directory) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    blob = es.X.astype("<f4").tobytes()
    header = {
        "rows": int(es.X.shape[0]),
        "dim": int(es.X.shape[1]),
        "recipe_id": es.recipe_id,
        "seed": es.seed,
        "checkpoint_sha256": es.checkpoint_sha256,
        "embeddings_sha256": hashlib.sha256(blob).hexdigest(),
    }
    (d / "embeddings.f32le").write_bytes(blob)
    with open(d / "meta.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for m in es.meta:
            fh.write(json.dumps(m, sort_keys=True) + "\n")
    (d / "header.json").write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")
    return header


def load_embeddings(directory) -> EmbeddingSet:
    d = Path(directory)
    try:
        header = json.loads((d / "header.json").read_text())
        blob = (d / "embeddings.f32le").read_bytes()
        meta = [json.loads(line) for line in (d / "meta.jsonl").read_text(encoding="utf-8").splitlines() if line]
    except FileNotFoundError as exc:
        raise CorruptionError(f"incomplete feature store at {d}: {exc.filename} missing") from None
    rows, dim = header["rows"], header["dim"]
    if len(blob) != 4 * rows * dim:
        raise CorruptionError(f"{d}: header declares {rows}x{dim} floats but blob holds {len(blob) // 4}")
    if "embeddings_sha256" in header and hashlib.sha256(blob).hexdigest() != header["embeddings_sha256"]:
        raise CorruptionError(f"{d}: embedding blob hash mismatch")
    if len(meta) != rows:
        raise CorruptionError(f"{d}: {len(meta)} metadata rows for {rows} embeddings")
    X = np.frombuffer(blob, dtype="<f4").reshape(rows, dim).astype(np.float32)
    return EmbeddingSet(X, meta, header["recipe_id"], header["seed"], header["checkpoint_sha256"])

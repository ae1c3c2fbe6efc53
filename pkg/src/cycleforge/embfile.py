"""Embedding file formats.

EMB1 binary layout (all little-endian)::

    offset 0   4 bytes   magic b"EMB1"
    offset 4   uint32    dim
    offset 8   uint32    count
    offset 12  float32   count * dim values, row-major

An optional sidecar ``<stem>.jsonl`` holds one ``{"index", "id", "path"}``
object per row. CSV files with header ``id,path,v0,...,v{d-1}`` are accepted
as an alternative.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"EMB1"
HEADER = struct.Struct("<4sII")


class EmbeddingFormatError(ValidationError):
    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = str(path)
        self.offset = offset


@dataclass
class EmbeddingTable:
    vectors: np.ndarray
    ids: list[str] | None = None
    paths: list[str] | None = None

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def write_emb(path: str | Path, vectors, ids=None, paths=None) -> None:
    v = np.asarray(vectors, dtype="<f4")
    if v.ndim != 2:
        raise ValidationError(f"expected a (count, dim) matrix, got shape {v.shape}")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, v.shape[1], v.shape[0]))
        fh.write(np.ascontiguousarray(v).tobytes())
    if ids is not None:
        rows = [{"index": i, "id": str(ids[i]), "path": None if paths is None else str(paths[i])}
                for i in range(v.shape[0])]
        sidecar_path(path).write_text("".join(json.dumps(r) + "\n" for r in rows))


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".jsonl")


def read_emb(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise EmbeddingFormatError(path, len(data), f"truncated header ({len(data)} < {HEADER.size} bytes)")
    magic, dim, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise EmbeddingFormatError(path, 0, f"bad magic {magic!r}")
    expected = HEADER.size + 4 * dim * count
    if len(data) != expected:
        offset = min(len(data), expected)
        raise EmbeddingFormatError(
            path, offset, f"payload length {len(data) - HEADER.size} != 4*dim*count = {4 * dim * count}")
    vectors = np.frombuffer(data, dtype="<f4", offset=HEADER.size).reshape(count, dim)
    bad = np.flatnonzero(~np.isfinite(vectors.ravel()))
    if bad.size:
        raise EmbeddingFormatError(path, HEADER.size + 4 * int(bad[0]), "non-finite value")
    return vectors.astype(np.float32)


def read_sidecar(path: str | Path, count: int) -> tuple[list[str], list[str | None]]:
    ids: list[str | None] = [None] * count
    paths: list[str | None] = [None] * count
    offset = 0
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            if raw.strip():
                try:
                    rec = json.loads(raw)
                    idx = int(rec["index"])
                    ident = str(rec["id"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise EmbeddingFormatError(path, offset, f"line {lineno}: {exc}") from None
                if not 0 <= idx < count:
                    raise EmbeddingFormatError(path, offset, f"line {lineno}: index {idx} out of range")
                if ids[idx] is not None:
                    raise EmbeddingFormatError(path, offset, f"line {lineno}: duplicate index {idx}")
                ids[idx] = ident
                paths[idx] = rec.get("path")
            offset += len(raw)
    missing = [i for i, v in enumerate(ids) if v is None]
    if missing:
        raise EmbeddingFormatError(path, offset, f"no sidecar entry for row {missing[0]}")
    return ids, paths  # type: ignore[return-value]


def read_csv_embeddings(path: str | Path) -> EmbeddingTable:
    ids, paths, rows = [], [], []
    offset = 0
    with open(path, newline="") as fh:
        lines = fh.read().splitlines(keepends=True)
    reader = csv.reader(lines)
    header = next(reader, None)
    if not header or header[:2] != ["id", "path"]:
        raise EmbeddingFormatError(path, 0, "CSV header must start with id,path")
    dim = len(header) - 2
    if header[2:] != [f"v{i}" for i in range(dim)]:
        raise EmbeddingFormatError(path, 0, "CSV value columns must be v0..v{d-1}")
    offset = len(lines[0])
    for lineno, rec in enumerate(reader, 2):
        if len(rec) != dim + 2:
            raise EmbeddingFormatError(path, offset, f"line {lineno}: {len(rec)} fields, expected {dim + 2}")
        try:
            vals = [float(x) for x in rec[2:]]
        except ValueError as exc:
            raise EmbeddingFormatError(path, offset, f"line {lineno}: {exc}") from None
        if not all(np.isfinite(vals)):
            raise EmbeddingFormatError(path, offset, f"line {lineno}: non-finite value")
        ids.append(rec[0])
        paths.append(rec[1])
        rows.append(vals)
        offset += len(lines[lineno - 1])
    vectors = np.asarray(rows, dtype=np.float32).reshape(len(rows), dim)
    return EmbeddingTable(vectors, ids, paths)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read an EMB1 file (plus sidecar when present) or a CSV embedding file."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        vectors = read_emb(path)
        side = sidecar_path(path)
        if side.exists():
            ids, paths = read_sidecar(side, vectors.shape[0])
            return EmbeddingTable(vectors, ids, paths)
        return EmbeddingTable(vectors)
    if path.suffix.lower() == ".csv":
        return read_csv_embeddings(path)
    raise EmbeddingFormatError(path, 0, f"bad magic {head!r} and not a .csv file")

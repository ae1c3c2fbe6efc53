import json
import struct

import numpy as np
import pytest

from cycleforge.embfile import (
    EmbeddingFormatError,
    load_embeddings,
    read_emb,
    sidecar_path,
    write_emb,
)


def test_layout_is_byte_exact(tmp_path):
    v = np.array([[1.0, -2.0, 0.5], [0.0, 3.25, 1.0]], np.float32)
    write_emb(tmp_path / "e.emb", v)
    raw = (tmp_path / "e.emb").read_bytes()
    assert raw[:4] == b"EMB1"
    assert struct.unpack("<II", raw[4:12]) == (3, 2)
    assert raw[12:] == v.astype("<f4").tobytes()
    assert np.array_equal(read_emb(tmp_path / "e.emb"), v)


def test_sidecar_roundtrip(tmp_path, rng):
    v = rng.standard_normal((4, 8)).astype(np.float32)
    write_emb(tmp_path / "g.emb", v, ids=["a", "b", "a", "c"], paths=["1.png", "2.png", "3.png", "4.png"])
    assert sidecar_path(tmp_path / "g.emb").name == "g.jsonl"
    table = load_embeddings(tmp_path / "g.emb")
    assert table.ids == ["a", "b", "a", "c"]
    assert table.paths[3] == "4.png"
    assert table.dim == 8 and len(table) == 4


def test_csv_fallback(tmp_path):
    (tmp_path / "e.csv").write_text("id,path,v0,v1\nalice,a.png,1.0,2.0\nbob,b.png,-1,0.5\n")
    table = load_embeddings(tmp_path / "e.csv")
    assert table.ids == ["alice", "bob"]
    assert np.array_equal(table.vectors, np.array([[1, 2], [-1, 0.5]], np.float32))


@pytest.mark.parametrize("payload,offset", [
    (b"EMB2" + struct.pack("<II", 1, 1) + b"\0" * 4, 0),
    (b"EMB1" + struct.pack("<II", 2, 2) + b"\0" * 12, 24),
    (b"EMB1\x01", 5),
    (b"EMB1" + struct.pack("<II", 2, 1) + struct.pack("<ff", 1.0, float("nan")), 16),
])
def test_schema_errors_name_byte_offset(tmp_path, payload, offset):
    (tmp_path / "bad.emb").write_bytes(payload)
    with pytest.raises(EmbeddingFormatError) as info:
        load_embeddings(tmp_path / "bad.emb")
    assert info.value.offset == offset
    assert f"byte {offset}" in str(info.value)


def test_bad_csv(tmp_path):
    (tmp_path / "e.csv").write_text("id,path,v0,v1\nalice,a.png,1.0\n")
    with pytest.raises(EmbeddingFormatError, match="line 2"):
        load_embeddings(tmp_path / "e.csv")
    (tmp_path / "h.csv").write_text("name,v0\n")
    with pytest.raises(EmbeddingFormatError):
        load_embeddings(tmp_path / "h.csv")


def test_sidecar_gaps(tmp_path):
    write_emb(tmp_path / "g.emb", np.ones((2, 3)))
    (tmp_path / "g.jsonl").write_text(json.dumps({"index": 0, "id": "a"}) + "\n")
    with pytest.raises(EmbeddingFormatError, match="row 1"):
        load_embeddings(tmp_path / "g.emb")

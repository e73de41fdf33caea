"""Binary embedding stores, pooling, cosine, and deterministic stub encoders.

Two little-endian file formats are defined:

  sentence store: magic "RBQE", u32 version=1, u32 dim, u64 count,
                  then per record [u32 id_len, id UTF-8, dim*f32]
  token store:    magic "RBQT", same header,
                  then per record [u32 id_len, id UTF-8, u32 tokens, tokens*dim*f32]

Stores are immutable after load and safe to share across readers. The stub
encoders let the whole engine run and be tested without any ML runtime.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping

import numpy as np

SENTENCE_MAGIC = b"RBQE"
TOKEN_MAGIC = b"RBQT"
FORMAT_VERSION = 1


class StoreFormatError(ValueError):
    """Raised when an embedding store file violates the binary format."""


@dataclass
class SentenceStore:
    """Ordered id -> fixed-dim float32 vector mapping."""

    dim: int
    ids: list[str] = field(default_factory=list)
    vectors: np.ndarray = None  # (count, dim) float32

    def __post_init__(self) -> None:
        if self.vectors is None:
            self.vectors = np.zeros((0, self.dim), dtype=np.float32)
        self._index = {pid: i for i, pid in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, pair_id: str) -> bool:
        return pair_id in self._index

    def vector(self, pair_id: str) -> np.ndarray:
        return self.vectors[self._index[pair_id]]


@dataclass
class TokenStore:
    """Ordered id -> (tokens, dim) float32 matrix mapping."""

    dim: int
    ids: list[str] = field(default_factory=list)
    matrices: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, pair_id: str) -> bool:
        return pair_id in self.matrices

    def matrix(self, pair_id: str) -> np.ndarray:
        return self.matrices[pair_id]


def write_sentence_store(records: Iterable[tuple[str, np.ndarray]], path: str | Path) -> int:
    """Write (id, vector) records; returns the record count."""
    records = [(pid, np.asarray(vec, dtype=np.float32)) for pid, vec in records]
    dim = _uniform_dim(vec.shape for _, vec in records)
    with Path(path).open("wb") as fh:
        fh.write(SENTENCE_MAGIC)
        fh.write(struct.pack("<IIQ", FORMAT_VERSION, dim, len(records)))
        seen: set[str] = set()
        for pid, vec in records:
            if vec.ndim != 1:
                raise StoreFormatError(f"record {pid!r}: expected a 1-D vector")
            _check_record(pid, vec, seen)
            _write_id(fh, pid)
            fh.write(vec.tobytes())
    return len(records)


def write_token_store(records: Iterable[tuple[str, np.ndarray]], path: str | Path) -> int:
    """Write (id, token matrix) records; every matrix needs >= 1 row."""
    records = [(pid, np.ascontiguousarray(mat, dtype=np.float32)) for pid, mat in records]
    dim = _uniform_dim(mat.shape[1:] for _, mat in records)
    with Path(path).open("wb") as fh:
        fh.write(TOKEN_MAGIC)
        fh.write(struct.pack("<IIQ", FORMAT_VERSION, dim, len(records)))
        seen: set[str] = set()
        for pid, mat in records:
            if mat.ndim != 2 or mat.shape[0] < 1:
                raise StoreFormatError(f"record {pid!r}: token matrix must have >= 1 row")
            _check_record(pid, mat, seen)
            _write_id(fh, pid)
            fh.write(struct.pack("<I", mat.shape[0]))
            fh.write(mat.tobytes())
    return len(records)


def read_sentence_store(path: str | Path) -> SentenceStore:
    with Path(path).open("rb") as fh:
        dim, count = _read_header(fh, SENTENCE_MAGIC, path)
        ids: list[str] = []
        vectors = np.empty((count, dim), dtype=np.float32)
        seen: set[str] = set()
        for i in range(count):
            pid = _read_id(fh, path)
            if pid in seen:
                raise StoreFormatError(f"{path}: duplicate id {pid!r}")
            seen.add(pid)
            vectors[i] = _read_floats(fh, dim, path).reshape(dim)
            ids.append(pid)
        _expect_eof(fh, path)
    _check_finite(vectors, path)
    return SentenceStore(dim=dim, ids=ids, vectors=vectors)


def read_token_store(path: str | Path) -> TokenStore:
    with Path(path).open("rb") as fh:
        dim, count = _read_header(fh, TOKEN_MAGIC, path)
        store = TokenStore(dim=dim)
        for _ in range(count):
            pid = _read_id(fh, path)
            if pid in store.matrices:
                raise StoreFormatError(f"{path}: duplicate id {pid!r}")
            (tokens,) = struct.unpack("<I", _read_exact(fh, 4, path))
            if tokens < 1:
                raise StoreFormatError(f"{path}: record {pid!r} has zero tokens")
            mat = _read_floats(fh, tokens * dim, path).reshape(tokens, dim)
            _check_finite(mat, path)
            store.ids.append(pid)
            store.matrices[pid] = mat
        _expect_eof(fh, path)
    return store


def mean_pool(matrix: np.ndarray) -> np.ndarray:
    """Component-wise mean over token rows, accumulated in float64 and
    emitted as float32."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise ValueError("mean_pool needs a non-empty (tokens, dim) matrix")
    return matrix.astype(np.float64).mean(axis=0).astype(np.float32)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two nonzero vectors, in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine is undefined for zero-norm vectors")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def stub_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic pseudo-random unit vector keyed by (text, seed).

    A model-free substitute for a sentence encoder: equal texts collide,
    the output is unit-norm float32, and results are platform-stable.
    """
    if dim < 2:
        raise ValueError("stub embeddings need dim >= 2")
    digest = hashlib.sha256(f"{seed}\x1f{text}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    vec = rng.standard_normal(dim)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:  # astronomically unlikely; keep the unit-norm contract total
        vec[0] = 1.0
        norm = 1.0
    return (vec / norm).astype(np.float32)


def stub_embed_tokens(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """One stub row per whitespace token of `text`; shape (tokens, dim)."""
    tokens = text.split()
    if not tokens:
        return np.zeros((0, dim), dtype=np.float32)
    return np.stack([stub_embed(tok, dim, seed) for tok in tokens])


def store_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- binary helpers ----------------------------------------------------------

def _uniform_dim(shapes: Iterable[tuple[int, ...]]) -> int:
    dims = {shape[-1] if shape else 0 for shape in shapes}
    if len(dims) > 1:
        raise StoreFormatError(f"mixed dimensions in store: {sorted(dims)}")
    if not dims:
        raise StoreFormatError("cannot write an empty store")
    return dims.pop()


def _check_record(pid: str, arr: np.ndarray, seen: set[str]) -> None:
    if pid in seen:
        raise StoreFormatError(f"duplicate id {pid!r}")
    seen.add(pid)
    if not np.all(np.isfinite(arr)):
        raise StoreFormatError(f"record {pid!r} contains non-finite values")


def _write_id(fh: BinaryIO, pid: str) -> None:
    raw = pid.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_header(fh: BinaryIO, magic: bytes, path: str | Path) -> tuple[int, int]:
    got = fh.read(4)
    if got != magic:
        raise StoreFormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    version, dim, count = struct.unpack("<IIQ", _read_exact(fh, 16, path))
    if version != FORMAT_VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise StoreFormatError(f"{path}: zero dimension")
    return dim, count


def _read_exact(fh: BinaryIO, size: int, path: str | Path) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise StoreFormatError(f"{path}: truncated file (wanted {size} bytes, got {len(data)})")
    return data


def _read_id(fh: BinaryIO, path: str | Path) -> str:
    (id_len,) = struct.unpack("<I", _read_exact(fh, 4, path))
    return _read_exact(fh, id_len, path).decode("utf-8")


def _read_floats(fh: BinaryIO, count: int, path: str | Path) -> np.ndarray:
    return np.frombuffer(_read_exact(fh, count * 4, path), dtype="<f4").copy()


def _expect_eof(fh: BinaryIO, path: str | Path) -> None:
    if fh.read(1):
        raise StoreFormatError(f"{path}: trailing bytes after last record")


def _check_finite(arr: np.ndarray, path: str | Path) -> None:
    if not np.all(np.isfinite(arr)):
        raise StoreFormatError(f"{path}: non-finite value in store")


def build_stub_stores(
    pairs: Iterable,
    dim: int,
    seed: int,
    text_unit: str = "question_answer",
) -> tuple[list[tuple[str, np.ndarray]], list[tuple[str, np.ndarray]]]:
    """Stub sentence and token records for a corpus of QA pairs.

    text_unit picks what gets encoded per pair: the concatenated
    "question answer" (the documented default) or the question alone.
    """
    if text_unit not in ("question_answer", "question"):
        raise ValueError(f"unknown text unit {text_unit!r}")
    sentence_records = []
    token_records = []
    for pair in pairs:
        text = pair.question if text_unit == "question" else f"{pair.question} {pair.answer}"
        sentence_records.append((pair.id, stub_embed(text, dim, seed)))
        token_records.append((pair.id, stub_embed_tokens(text, dim, seed)))
    return sentence_records, token_records

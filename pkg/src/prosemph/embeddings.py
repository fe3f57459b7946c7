"""Embedding tables and character-level semantic vector providers.

Semantic vectors normally arrive precomputed in a binary container (any
external encoder can produce it); a deterministic hashed fallback serves
tests and pipelines without an external encoder.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimMismatchError,
    IdOutOfRangeError,
    MalformedFileError,
    UnknownUtteranceError,
)

PEMB_MAGIC = b"PEMB"
PEMB_VERSION = 1

POS_DIM_DEFAULT = 30
REL_DIM_DEFAULT = 30
SEMANTIC_DIM_DEFAULT = 128
EMPHASIS_DIM_DEFAULT = 16


@dataclass
class EmbeddingTable:
    matrix: np.ndarray  # [vocab_size x dim]
    name: str

    @property
    def vocab_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def init_table(
    vocab_size: int, dim: int, name: str, seed: int, dtype=np.float32
) -> EmbeddingTable:
    """Uniform init in [-0.1, 0.1] from a seeded PRNG."""
    rng = np.random.default_rng(seed)
    m = rng.uniform(-0.1, 0.1, size=(vocab_size, dim)).astype(dtype)
    return EmbeddingTable(matrix=m, name=name)


def lookup(table: EmbeddingTable, ids) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.vocab_size):
        raise IdOutOfRangeError(
            f"table {table.name}: id out of range 0..{table.vocab_size - 1}"
        )
    return table.matrix[ids]


# ---------------------------------------------------------------------------
# hashed semantic fallback


def _fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def hash_embedding(chars, dim: int, seed: int) -> np.ndarray:
    """Deterministic unit-norm vector per character.

    Row i is drawn from PCG64 seeded with FNV-1a-64 of the UTF-8 character
    bytes XORed with the user seed, then L2-normalized. Identical
    characters always map to identical rows; stable across runs and
    platforms.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rows = np.empty((len(chars), dim))
    for i, ch in enumerate(chars):
        h = _fnv1a_64(ch.encode("utf-8")) ^ (seed & 0xFFFFFFFFFFFFFFFF)
        rng = np.random.default_rng(np.random.PCG64(h))
        v = rng.standard_normal(dim)
        rows[i] = v / np.linalg.norm(v)
    return rows


@dataclass
class SemanticProvider:
    """Serves one [num_chars x dim] matrix per utterance.

    mode "hash": rows derived from the characters alone (no store).
    mode "file_backed": exact matrices loaded from a PEMB container.
    """

    mode: str
    dim: int
    seed: int = 0
    store: dict[str, np.ndarray] = field(default_factory=dict)

    def rows(self, utterance_id: str, chars=None) -> np.ndarray:
        if self.mode == "hash":
            if chars is None:
                raise UnknownUtteranceError(
                    f"hash provider needs characters for {utterance_id}"
                )
            return hash_embedding(chars, self.dim, self.seed)
        if utterance_id not in self.store:
            raise UnknownUtteranceError(utterance_id)
        m = self.store[utterance_id]
        if chars is not None and len(chars) != m.shape[0]:
            raise DimMismatchError(
                f"{utterance_id}: {m.shape[0]} stored rows for {len(chars)} chars"
            )
        return m


def hash_provider(dim: int = SEMANTIC_DIM_DEFAULT, seed: int = 0) -> SemanticProvider:
    return SemanticProvider(mode="hash", dim=dim, seed=seed)


# ---------------------------------------------------------------------------
# PEMB container: header {magic, version, dim, count} then per-utterance
# records {id, num_chars, row-major float32 matrix}; little-endian.


def save_semantic(store: dict[str, np.ndarray], dim: int, path) -> None:
    for uid, m in store.items():
        if m.shape[1] != dim:
            raise DimMismatchError(f"{uid}: dim {m.shape[1]} != container dim {dim}")
    with open(path, "wb") as f:
        f.write(PEMB_MAGIC)
        f.write(struct.pack("<III", PEMB_VERSION, dim, len(store)))
        for uid in sorted(store):
            m = np.ascontiguousarray(store[uid], dtype="<f4")
            ub = uid.encode("utf-8")
            f.write(struct.pack("<I", len(ub)))
            f.write(ub)
            f.write(struct.pack("<I", m.shape[0]))
            f.write(m.tobytes())


def load_semantic(path) -> SemanticProvider:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    if len(data) < 16 or data[:4] != PEMB_MAGIC:
        raise MalformedFileError(f"{path}: not a PEMB container")
    version, dim, count = struct.unpack_from("<III", data, 4)
    if version != PEMB_VERSION:
        raise MalformedFileError(f"{path}: unsupported PEMB version {version}")
    off = 16
    store: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (id_len,) = struct.unpack_from("<I", data, off)
            off += 4
            uid = data[off : off + id_len].decode("utf-8")
            off += id_len
            (num_chars,) = struct.unpack_from("<I", data, off)
            off += 4
            nbytes = num_chars * dim * 4
            if off + nbytes > len(data):
                raise MalformedFileError(f"{path}: truncated record for {uid}")
            m = np.frombuffer(data[off : off + nbytes], dtype="<f4").reshape(
                num_chars, dim
            )
            off += nbytes
            store[uid] = m.astype(np.float64)
    except (struct.error, UnicodeDecodeError) as exc:
        raise MalformedFileError(f"{path}: corrupt container ({exc})") from exc
    return SemanticProvider(mode="file_backed", dim=dim, store=store)

"""Phone-level conditioning tensors for a downstream acoustic model.

The linguistic matrix sums three expanded components (dependency-relation
embedding, POS embedding, projected semantic vectors); the emphasis matrix
carries the per-phone emphasis embedding. Both are exported in a bit-exact
binary container.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .corpus import DepAnnotation, EmphasisLabels, Utterance
from .embeddings import EmbeddingTable, SemanticProvider, lookup
from .errors import DimMismatchError, LengthMismatchError, MalformedFileError
from .graph import expand_char_to_phone, expand_word_to_char, graph2relation
from .tagset import Tagset

PCND_MAGIC = b"PCND"
PCND_VERSION = 1

COND_DIM_DEFAULT = 256
EMPH_DIM_DEFAULT = 16


@dataclass(frozen=True)
class ConditioningBundle:
    utterance_id: str
    linguistic: np.ndarray  # [num_phones x cond_dim]
    emphasis: np.ndarray  # [num_phones x emph_dim]

    def __post_init__(self):
        if self.linguistic.shape[0] != self.emphasis.shape[0]:
            raise DimMismatchError("linguistic/emphasis row counts differ")
        if self.linguistic.shape[0] == 0:
            raise DimMismatchError("bundle must cover at least one phone")

    @property
    def num_phones(self) -> int:
        return self.linguistic.shape[0]

    @property
    def cond_dim(self) -> int:
        return self.linguistic.shape[1]

    @property
    def emph_dim(self) -> int:
        return self.emphasis.shape[1]


def build_linguistic(
    utt: Utterance,
    ann: DepAnnotation,
    provider: SemanticProvider,
    rel_table: EmbeddingTable,
    pos_table: EmbeddingTable,
    semantic_projection: np.ndarray,  # [sem_dim x cond_dim]
    tagset: Tagset,
) -> np.ndarray:
    """Summed phone-level linguistic embedding [num_phones x cond_dim]."""
    if rel_table.dim != pos_table.dim:
        raise DimMismatchError(
            f"relation dim {rel_table.dim} != POS dim {pos_table.dim}"
        )
    cond_dim = rel_table.dim
    if semantic_projection.shape != (provider.dim, cond_dim):
        raise DimMismatchError(
            f"semantic projection {semantic_projection.shape} incompatible with "
            f"sem dim {provider.dim}, cond dim {cond_dim}"
        )
    rel_ids = graph2relation(ann, tagset).relation_ids
    rel_vecs = expand_char_to_phone(
        expand_word_to_char(lookup(rel_table, rel_ids), utt), utt
    )
    pos_vecs = expand_char_to_phone(
        expand_word_to_char(lookup(pos_table, ann.pos_tags), utt), utt
    )
    sem = np.asarray(provider.rows(utt.id, utt.chars))
    sem_vecs = expand_char_to_phone(sem @ semantic_projection, utt)
    return rel_vecs + pos_vecs + sem_vecs


def build_emphasis(
    labels: EmphasisLabels, emph_table: EmbeddingTable, utt: Utterance
) -> np.ndarray:
    """Per-phone emphasis embedding [num_phones x emph_dim]."""
    if emph_table.vocab_size != 2:
        raise DimMismatchError("emphasis table must have exactly 2 rows")
    if len(labels.labels) != utt.num_chars:
        raise LengthMismatchError(
            f"{utt.id}: {len(labels.labels)} labels for {utt.num_chars} chars"
        )
    char_rows = lookup(emph_table, list(labels.labels))
    return expand_char_to_phone(char_rows, utt)


def export_bundle(bundle: ConditioningBundle, path) -> None:
    ling = np.ascontiguousarray(bundle.linguistic, dtype="<f4")
    emph = np.ascontiguousarray(bundle.emphasis, dtype="<f4")
    uid = bundle.utterance_id.encode("utf-8")
    with open(path, "wb") as f:
        f.write(PCND_MAGIC)
        f.write(
            struct.pack(
                "<IIII", PCND_VERSION, bundle.cond_dim, bundle.emph_dim,
                bundle.num_phones,
            )
        )
        f.write(struct.pack("<I", len(uid)))
        f.write(uid)
        f.write(ling.tobytes())
        f.write(emph.tobytes())


def load_bundle(path) -> ConditioningBundle:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    if len(data) < 24 or data[:4] != PCND_MAGIC:
        raise MalformedFileError(f"{path}: not a PCND bundle")
    version, cond_dim, emph_dim, num_phones = struct.unpack_from("<IIII", data, 4)
    if version != PCND_VERSION:
        raise MalformedFileError(f"{path}: unsupported version {version}")
    off = 20
    (id_len,) = struct.unpack_from("<I", data, off)
    off += 4
    try:
        uid = data[off : off + id_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFileError(f"{path}: bad utterance id") from exc
    off += id_len
    ling_bytes = num_phones * cond_dim * 4
    emph_bytes = num_phones * emph_dim * 4
    if len(data) != off + ling_bytes + emph_bytes:
        raise MalformedFileError(f"{path}: container size mismatch")
    ling = np.frombuffer(data[off : off + ling_bytes], dtype="<f4").reshape(
        num_phones, cond_dim
    )
    emph = np.frombuffer(data[off + ling_bytes :], dtype="<f4").reshape(
        num_phones, emph_dim
    )
    return ConditioningBundle(
        utterance_id=uid, linguistic=np.array(ling), emphasis=np.array(emph)
    )

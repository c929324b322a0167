"""Embedding tables, scoring functions, and checkpoint serialization."""

from __future__ import annotations

import enum
import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CorruptCheckpointError, UnknownEntityError
from .graph import Triple


class ScorerKind(enum.Enum):
    TRANSE = "transe"
    DISTMULT = "distmult"


@dataclass
class EmbeddingTable:
    """Dense entity/relation vectors, float64 while training."""

    entity_vecs: np.ndarray  # (entity_count, dim)
    relation_vecs: np.ndarray  # (relation_count, dim)

    @property
    def dim(self) -> int:
        return self.entity_vecs.shape[1]

    @property
    def entity_count(self) -> int:
        return self.entity_vecs.shape[0]

    @property
    def relation_count(self) -> int:
        return self.relation_vecs.shape[0]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.entity_vecs.copy(), self.relation_vecs.copy())

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.entity_vecs).all() and np.isfinite(self.relation_vecs).all())


def init_embeddings(entity_count: int, relation_count: int, dim: int, seed: int) -> EmbeddingTable:
    """Uniform init in [-6/sqrt(dim), +6/sqrt(dim)], reproducible from seed."""
    if entity_count < 1 or relation_count < 1 or dim < 1:
        raise ValueError("counts and dim must be >= 1")
    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(dim)
    return EmbeddingTable(
        entity_vecs=rng.uniform(-bound, bound, size=(entity_count, dim)),
        relation_vecs=rng.uniform(-bound, bound, size=(relation_count, dim)),
    )


def score_vecs(kind: ScorerKind, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Score rows of (h, r, t) vectors; higher means more plausible.

    Reductions use ndarray.sum (pairwise, single-threaded) rather than BLAS
    so results are bit-stable across thread counts.
    """
    if kind is ScorerKind.TRANSE:
        delta = h + r - t
        return -np.sqrt((delta * delta).sum(axis=-1))
    if kind is ScorerKind.DISTMULT:
        return (h * r * t).sum(axis=-1)
    raise ValueError(f"unknown scorer kind {kind!r}")


def score(table: EmbeddingTable, kind: ScorerKind, triple: Triple | tuple[int, int, int]) -> float:
    h, r, t = triple
    if not (0 <= h < table.entity_count and 0 <= t < table.entity_count):
        raise UnknownEntityError(f"entity id outside table: {triple}")
    if not 0 <= r < table.relation_count:
        raise UnknownEntityError(f"relation id outside table: {triple}")
    return float(
        score_vecs(kind, table.entity_vecs[h], table.relation_vecs[r], table.entity_vecs[t])
    )


def score_batch(
    table: EmbeddingTable, kind: ScorerKind, h: np.ndarray, r: np.ndarray, t: np.ndarray
) -> np.ndarray:
    return score_vecs(kind, table.entity_vecs[h], table.relation_vecs[r], table.entity_vecs[t])


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"SYME"
_CKPT_VERSION = 1
_SCORER_CODES = {ScorerKind.TRANSE: 0, ScorerKind.DISTMULT: 1}
_SCORER_FROM_CODE = {v: k for k, v in _SCORER_CODES.items()}


def save_checkpoint(table: EmbeddingTable, kind: ScorerKind, path: str | os.PathLike[str]) -> None:
    """Write embeddings as 32-bit floats with a trailing CRC32.

    Layout, little-endian: magic "SYME", then a payload of version u32,
    dim u32, entity count u64, relation count u64, scorer code u32, the
    entity matrix then the relation matrix row-major f32, then CRC32 of the
    payload as u32.
    """
    header = struct.pack(
        "<IIQQI",
        _CKPT_VERSION,
        table.dim,
        table.entity_count,
        table.relation_count,
        _SCORER_CODES[kind],
    )
    body = (
        np.ascontiguousarray(table.entity_vecs, dtype="<f4").tobytes()
        + np.ascontiguousarray(table.relation_vecs, dtype="<f4").tobytes()
    )
    payload = header + body
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def load_checkpoint(path: str | os.PathLike[str]) -> tuple[EmbeddingTable, ScorerKind]:
    """Read a SYME checkpoint back into a float64 table."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header_size = struct.calcsize("<IIQQI")
    if len(blob) < 4 + header_size + 4 or blob[:4] != _CKPT_MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint file")
    payload, (crc,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) != crc:
        raise CorruptCheckpointError(f"{path}: checksum mismatch")
    version, dim, entity_count, relation_count, scorer_code = struct.unpack_from("<IIQQI", payload, 0)
    if version != _CKPT_VERSION:
        raise CorruptCheckpointError(f"{path}: unsupported version {version}")
    if scorer_code not in _SCORER_FROM_CODE:
        raise CorruptCheckpointError(f"{path}: unknown scorer code {scorer_code}")
    expected = header_size + 4 * dim * (entity_count + relation_count)
    if len(payload) != expected:
        raise CorruptCheckpointError(f"{path}: payload size {len(payload)} != expected {expected}")
    data = np.frombuffer(payload, dtype="<f4", offset=header_size)
    entity = data[: entity_count * dim].reshape(entity_count, dim).astype(np.float64)
    relation = data[entity_count * dim :].reshape(relation_count, dim).astype(np.float64)
    return EmbeddingTable(entity, relation), _SCORER_FROM_CODE[scorer_code]

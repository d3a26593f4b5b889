"""Bit-exact binary containers for frame features and token tables.

Feature container layout (all integers little-endian u32, floats IEEE-754
binary32 little-endian, matrices row-major):

    magic "MCFV", version byte 0x01
    record_count
    per record:
        video_id_len, video_id (UTF-8), view_id, label_index, T, D,
        T*D float32 frame matrix

Token table layout:

    magic "MCTT", version byte 0x01
    vocab_size, D
    reserved_count, reserved ids (pad, sos, eos, slot ids...)
    vocab_size*D float32 embedding matrix
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .tokenizer import TokenTable

FEATURE_MAGIC = b"MCFV"
TABLE_MAGIC = b"MCTT"
VERSION = 0x01


class ContainerError(ValueError):
    """Parse failure; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagicError(ContainerError):
    pass


class TruncatedPayloadError(ContainerError):
    pass


class InvalidRecordError(ContainerError):
    pass


@dataclass
class FrameFeatureSequence:
    """One view of one video: a (T, D) float32 matrix of frame embeddings."""

    video_id: str
    view_id: int
    frames: np.ndarray
    label_index: int

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[0] < 2:
            raise ValueError(
                f"frames must be a (T, D) matrix with T >= 2, got shape {self.frames.shape}"
            )
        if not np.isfinite(self.frames).all():
            raise ValueError(f"non-finite value in frames of video {self.video_id!r}")
        if self.view_id < 0 or self.label_index < 0:
            raise ValueError("view_id and label_index must be nonnegative")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.payload):
            raise TruncatedPayloadError(
                f"truncated while reading {what}: expected {n} bytes, "
                f"only {len(self.payload) - self.pos} remain",
                self.pos,
            )
        chunk = self.payload[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def write_feature_file(path, records: list[FrameFeatureSequence]) -> None:
    chunks = [FEATURE_MAGIC, bytes([VERSION]), struct.pack("<I", len(records))]
    for rec in records:
        vid = rec.video_id.encode("utf-8")
        chunks.append(struct.pack("<I", len(vid)))
        chunks.append(vid)
        chunks.append(struct.pack("<IIII", rec.view_id, rec.label_index,
                                  rec.frames.shape[0], rec.frames.shape[1]))
        chunks.append(rec.frames.astype("<f4", copy=False).tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def read_feature_file(path) -> list[FrameFeatureSequence]:
    with open(path, "rb") as fh:
        payload = fh.read()
    r = _Reader(payload)
    magic = r.take(4, "magic")
    if magic != FEATURE_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {FEATURE_MAGIC!r}", 0)
    version = r.take(1, "version")[0]
    if version != VERSION:
        raise InvalidRecordError(f"unsupported container version {version}", 4)
    count = r.u32("record count")
    records = []
    for i in range(count):
        id_offset = r.pos
        id_len = r.u32(f"record {i} id length")
        vid = r.take(id_len, f"record {i} video id").decode("utf-8")
        view_id = r.u32(f"record {i} view id")
        label_index = r.u32(f"record {i} label index")
        frames_t = r.u32(f"record {i} frame count")
        dim = r.u32(f"record {i} dim")
        if frames_t < 2:
            raise InvalidRecordError(
                f"record {i} ({vid!r}) has T = {frames_t}, need at least 2 frames", id_offset
            )
        matrix_offset = r.pos
        raw = r.take(frames_t * dim * 4, f"record {i} frame matrix")
        frames = np.frombuffer(raw, dtype="<f4").reshape(frames_t, dim)
        if not np.isfinite(frames).all():
            bad = int(np.flatnonzero(~np.isfinite(frames.ravel()))[0])
            raise InvalidRecordError(
                f"record {i} ({vid!r}) contains a non-finite value", matrix_offset + bad * 4
            )
        records.append(FrameFeatureSequence(vid, view_id, frames.copy(), label_index))
    if r.pos != len(payload):
        raise InvalidRecordError(
            f"{len(payload) - r.pos} trailing bytes after last record", r.pos
        )
    return records


def write_token_table(path, table: TokenTable) -> None:
    reserved = table.reserved_ids()
    chunks = [
        TABLE_MAGIC,
        bytes([VERSION]),
        struct.pack("<II", table.vocab_size, table.dim),
        struct.pack("<I", len(reserved)),
        struct.pack(f"<{len(reserved)}I", *reserved),
        table.embedding.astype("<f4").tobytes(order="C"),
    ]
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def read_token_table(path) -> TokenTable:
    with open(path, "rb") as fh:
        payload = fh.read()
    r = _Reader(payload)
    magic = r.take(4, "magic")
    if magic != TABLE_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {TABLE_MAGIC!r}", 0)
    version = r.take(1, "version")[0]
    if version != VERSION:
        raise InvalidRecordError(f"unsupported table version {version}", 4)
    vocab_size = r.u32("vocab size")
    dim = r.u32("dim")
    n_reserved = r.u32("reserved count")
    if n_reserved < 3:
        raise InvalidRecordError("reserved block must hold at least pad/sos/eos", r.pos - 4)
    ids = struct.unpack(f"<{n_reserved}I", r.take(4 * n_reserved, "reserved ids"))
    matrix_offset = r.pos
    raw = r.take(vocab_size * dim * 4, "embedding matrix")
    emb = np.frombuffer(raw, dtype="<f4").reshape(vocab_size, dim).astype(np.float64)
    if not np.isfinite(emb).all():
        raise InvalidRecordError("embedding matrix contains a non-finite value", matrix_offset)
    return TokenTable(
        vocab_size=vocab_size,
        dim=dim,
        embedding=emb,
        pad_id=ids[0],
        sos_id=ids[1],
        eos_id=ids[2],
        slot_ids=list(ids[3:]),
    )

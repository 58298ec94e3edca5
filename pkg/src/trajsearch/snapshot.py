"""Versioned binary snapshots and the primitives they are built from.

All integers are little-endian. Posting lists and trajectory lengths are
written as LEB128 varints; posting lists are gap (delta) encoded first.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .model import OFFSET_DTYPE, POI_DTYPE, TrajectoryCorpus

CORPUS_MAGIC = b"TRJSCRP\x00"
CORPUS_VERSION = 1


class SnapshotError(ValueError):
    pass


def varint_encode(values: np.ndarray) -> bytes:
    v = np.asarray(values, dtype=np.uint64).reshape(-1)
    if v.shape[0] == 0:
        return b""
    nbytes = np.ones(v.shape[0], dtype=np.int64)
    rest = v >> np.uint64(7)
    while np.any(rest):
        nbytes += rest > 0
        rest >>= np.uint64(7)
    width = int(nbytes.max())
    shifts = (np.arange(width, dtype=np.uint64) * np.uint64(7))
    groups = ((v[:, None] >> shifts[None, :]) & np.uint64(0x7F)).astype(np.uint8)
    col = np.arange(width)[None, :]
    groups[col < (nbytes[:, None] - 1)] |= 0x80
    return groups[col < nbytes[:, None]].tobytes()


def varint_decode(data: bytes, count: int) -> np.ndarray:
    b = np.frombuffer(data, dtype=np.uint8)
    if count == 0:
        if b.shape[0]:
            raise SnapshotError("trailing varint bytes")
        return np.zeros(0, dtype=np.uint64)
    ends = np.flatnonzero((b & 0x80) == 0)
    if ends.shape[0] != count or ends[-1] != b.shape[0] - 1:
        raise SnapshotError("varint stream does not hold the expected value count")
    starts = np.concatenate(([0], ends[:-1] + 1))
    within = np.arange(b.shape[0]) - np.repeat(starts, ends - starts + 1)
    parts = (b & 0x7F).astype(np.uint64) << (within.astype(np.uint64) * np.uint64(7))
    return np.bitwise_or.reduceat(parts, starts)


def delta_encode(offsets: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Gap-encode each posting list ``ids[offsets[k]:offsets[k+1]]``."""
    ids = ids.astype(np.int64)
    gaps = np.diff(ids, prepend=0)
    heads = offsets[:-1][np.diff(offsets) > 0]
    gaps[heads] = ids[heads]
    return gaps


def delta_decode(offsets: np.ndarray, gaps: np.ndarray) -> np.ndarray:
    gaps = gaps.astype(np.int64)
    if gaps.shape[0] == 0:
        return gaps.astype(np.int32)
    total = np.cumsum(gaps)
    lengths = np.diff(offsets)
    nonempty = lengths > 0
    heads = offsets[:-1][nonempty]
    before = np.where(heads > 0, total[np.maximum(heads - 1, 0)], 0)
    return (total - np.repeat(before, lengths[nonempty])).astype(np.int32)


class Writer:
    def __init__(self, fh: BinaryIO):
        self.fh = fh

    def pack(self, fmt: str, *values) -> None:
        self.fh.write(struct.pack("<" + fmt, *values))

    def blob(self, data: bytes) -> None:
        self.pack("Q", len(data))
        self.fh.write(data)

    def strings(self, items: Sequence[str]) -> None:
        encoded = [s.encode("utf-8") for s in items]
        self.pack("Q", len(encoded))
        self.blob(varint_encode(np.array([len(e) for e in encoded], dtype=np.uint64)))
        self.fh.write(b"".join(encoded))

    def array(self, arr: np.ndarray, dtype) -> None:
        self.blob(np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())


class Reader:
    def __init__(self, fh: BinaryIO):
        self.fh = fh

    def read(self, n: int) -> bytes:
        data = self.fh.read(n)
        if len(data) != n:
            raise SnapshotError("truncated snapshot")
        return data

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))

    def blob(self) -> bytes:
        (n,) = self.unpack("Q")
        return self.read(n)

    def strings(self) -> list[str]:
        (count,) = self.unpack("Q")
        lengths = varint_decode(self.blob(), count).astype(np.int64)
        data = self.read(int(lengths.sum()))
        ends = np.cumsum(lengths)
        return [data[e - n:e].decode("utf-8") for e, n in zip(ends.tolist(), lengths.tolist())]

    def array(self, dtype) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        return np.frombuffer(self.blob(), dtype=dt).astype(np.dtype(dtype))

    def expect_end(self) -> None:
        if self.fh.read(1):
            raise SnapshotError("trailing bytes after snapshot")


def check_header(r: Reader, magic: bytes, version: int) -> None:
    got = r.read(len(magic))
    if got != magic:
        raise SnapshotError(f"bad magic {got!r}, expected {magic!r}")
    (v,) = r.unpack("H")
    if v != version:
        raise SnapshotError(f"unsupported snapshot version {v}")


def corpus_to_bytes(corpus: TrajectoryCorpus) -> bytes:
    buf = io.BytesIO()
    w = Writer(buf)
    w.fh.write(CORPUS_MAGIC)
    w.pack("H", CORPUS_VERSION)
    w.pack("Q", len(corpus))
    w.strings(corpus.vocabulary)
    w.blob(varint_encode(corpus.lengths))
    w.blob(varint_encode(corpus.pois))
    return buf.getvalue()


def corpus_from_bytes(data: bytes) -> TrajectoryCorpus:
    r = Reader(io.BytesIO(data))
    check_header(r, CORPUS_MAGIC, CORPUS_VERSION)
    (n,) = r.unpack("Q")
    vocabulary = r.strings()
    lengths = varint_decode(r.blob(), n).astype(OFFSET_DTYPE)
    offsets = np.concatenate(([0], np.cumsum(lengths))).astype(OFFSET_DTYPE)
    pois = varint_decode(r.blob(), int(offsets[-1])).astype(POI_DTYPE)
    r.expect_end()
    return TrajectoryCorpus(offsets, pois, vocabulary)


def save_corpus(corpus: TrajectoryCorpus, path: str | Path) -> None:
    Path(path).write_bytes(corpus_to_bytes(corpus))


def load_corpus(path: str | Path) -> TrajectoryCorpus:
    return corpus_from_bytes(Path(path).read_bytes())

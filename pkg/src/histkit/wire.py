"""Bit-exact binary envelope and JSON interchange for histograms.

Binary layout, all little-endian:

====================  =======  ==============================================
field                 size     contents
====================  =======  ==============================================
magic                 4        ASCII ``HGT1``
version               1        currently 1
flags                 1        bit 0: moments present, bit 1: name present
bin count B           4        unsigned 32-bit
breaks                8*(B+1)  IEEE-754 doubles
counts                8*B      unsigned 64-bit
moment order p        1        unsigned 8-bit          (flag bit 0 only)
power sums            8*p*B    doubles, order-major:   (flag bit 0 only)
                               all S_1, then all S_2, ...
name length           2        unsigned 16-bit         (flag bit 1 only)
name                  varies   UTF-8 bytes             (flag bit 1 only)
crc32                 4        IEEE CRC-32 of every preceding byte
====================  =======  ==============================================

Decoding validates magic, version, flags, length, CRC, and every histogram
invariant before returning; arbitrary byte strings never raise anything
outside the :class:`~histkit.errors.WireError` family.
"""

from __future__ import annotations

import json
import struct
import zlib
from typing import Any

import numpy as np

from .core import BinMoments, Histogram
from .errors import (
    HistkitError,
    JsonFormatError,
    ShapeError,
    WireContentError,
    WireCorruptionError,
    WireFormatError,
    WireTruncationError,
)

__all__ = ["decode", "encode", "encoded_size", "from_json", "to_json"]

MAGIC = b"HGT1"
VERSION = 1
FLAG_MOMENTS = 0x01
FLAG_NAME = 0x02


def encoded_size(bins: int, moment_order: int = 0, name_bytes: int = 0) -> int:
    """Exact envelope size in bytes for the given shape."""
    size = 4 + 1 + 1 + 4 + 8 * (bins + 1) + 8 * bins + 4
    if moment_order > 0:
        size += 1 + 8 * moment_order * bins
    if name_bytes > 0:
        size += 2 + name_bytes
    return size


def encode(h: Histogram) -> bytes:
    """Serialize a histogram; every valid histogram encodes without error."""
    flags = 0
    if h.moments is not None:
        flags |= FLAG_MOMENTS
    name_utf8 = b""
    if h.name is not None:
        flags |= FLAG_NAME
        name_utf8 = h.name.encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<BB", VERSION, flags),
        struct.pack("<I", h.bin_count),
        h.breaks.astype("<f8").tobytes(),
        h.counts.astype("<u8").tobytes(),
    ]
    if h.moments is not None:
        parts.append(struct.pack("<B", h.moments.order))
        parts.append(h.moments.sums.astype("<f8").tobytes())
    if h.name is not None:
        parts.append(struct.pack("<H", len(name_utf8)))
        parts.append(name_utf8)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    __slots__ = ("data", "offset")

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise WireTruncationError(
                f"need {n} more bytes but input has {len(self.data) - self.offset} left",
                offset=self.offset,
            )
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset


def decode(data: bytes) -> Histogram:
    """Inverse of :func:`encode`; expects one complete envelope."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise WireFormatError(f"expected bytes, got {type(data).__name__}")
    data = bytes(data)
    r = _Reader(data)
    magic = r.take(4)
    if magic != MAGIC:
        raise WireFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, flags = struct.unpack("<BB", r.take(2))
    if version != VERSION:
        raise WireFormatError(f"unsupported version {version}")
    if flags & ~(FLAG_MOMENTS | FLAG_NAME):
        raise WireFormatError(f"unknown flag bits 0x{flags:02x}")
    (bins,) = struct.unpack("<I", r.take(4))
    if bins == 0:
        raise WireContentError("bin count must be at least 1")
    breaks = np.frombuffer(r.take(8 * (bins + 1)), dtype="<f8")
    counts_u64 = np.frombuffer(r.take(8 * bins), dtype="<u8")
    moments = None
    if flags & FLAG_MOMENTS:
        (order,) = struct.unpack("<B", r.take(1))
        if order == 0:
            raise WireContentError("moments flag set but moment order is 0")
        sums = np.frombuffer(r.take(8 * order * bins), dtype="<f8").reshape(order, bins)
    name = None
    if flags & FLAG_NAME:
        (name_len,) = struct.unpack("<H", r.take(2))
        raw = r.take(name_len)
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WireContentError(f"metric name is not valid UTF-8: {exc}") from None
    if r.remaining < 4:
        raise WireTruncationError("missing CRC32 trailer", offset=r.offset)
    if r.remaining > 4:
        raise WireFormatError(f"{r.remaining - 4} trailing bytes after CRC32")
    (stored_crc,) = struct.unpack("<I", r.take(4))
    actual_crc = zlib.crc32(data[:-4])
    if stored_crc != actual_crc:
        raise WireCorruptionError(
            f"CRC mismatch: stored 0x{stored_crc:08x}, computed 0x{actual_crc:08x}"
        )
    counts = counts_u64.astype(np.int64)  # values beyond int64 go negative and fail validation
    try:
        bm = BinMoments(order, sums) if flags & FLAG_MOMENTS else None
        return Histogram(breaks, counts, bm, name)
    except HistkitError as exc:
        raise WireContentError(f"payload violates histogram invariants: {exc}") from exc


def to_json(h: Histogram) -> str:
    """Lossless JSON rendering with round-trip-safe float formatting."""
    doc: dict[str, Any] = {
        "breaks": h.breaks.tolist(),
        "counts": h.counts.tolist(),
    }
    if h.moments is not None:
        doc["moment_order"] = h.moments.order
        doc["moment_sums"] = h.moments.sums.reshape(-1).tolist()
    if h.name is not None:
        doc["name"] = h.name
    return json.dumps(doc)


def _require_number_list(doc: dict, field: str, integral: bool) -> list:
    if field not in doc:
        raise JsonFormatError(f"missing required field '{field}'", path="$")
    value = doc[field]
    if not isinstance(value, list):
        raise JsonFormatError(f"'{field}' must be an array", path=f"$.{field}")
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise JsonFormatError("expected a number", path=f"$.{field}[{i}]")
        if integral and not isinstance(item, int):
            raise JsonFormatError("expected an integer", path=f"$.{field}[{i}]")
    return value


def from_json(text: str) -> Histogram:
    """Parse the JSON rendering produced by :func:`to_json`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JsonFormatError(f"not valid JSON: {exc}", path="$") from None
    if not isinstance(doc, dict):
        raise JsonFormatError("top-level value must be an object", path="$")
    breaks = _require_number_list(doc, "breaks", integral=False)
    counts = _require_number_list(doc, "counts", integral=True)
    moments = None
    order = doc.get("moment_order")
    sums = doc.get("moment_sums")
    if (order is None) != (sums is None):
        raise JsonFormatError(
            "'moment_order' and 'moment_sums' must be given together", path="$"
        )
    if order is not None:
        if isinstance(order, bool) or not isinstance(order, int) or order < 1:
            raise JsonFormatError("'moment_order' must be an integer >= 1", path="$.moment_order")
        flat = _require_number_list(doc, "moment_sums", integral=False)
        bins = len(counts)
        if len(flat) != order * bins:
            raise ShapeError(
                f"moment_sums has {len(flat)} entries, expected order*bins = {order * bins}"
            )
        moments = BinMoments(order, np.asarray(flat, dtype=np.float64).reshape(order, bins))
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise JsonFormatError("'name' must be a string", path="$.name")
    return Histogram(breaks, counts, moments, name)

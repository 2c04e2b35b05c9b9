"""
WireBatch framing for sealed batches.

    version        1 byte   (0x01)
    instantiation  1 byte   (1 std_faae, 2 graphene_ae, 3 graphene_poly)
    agg_mode       1 byte
    start_index    8 bytes  big-endian
    count          4 bytes  big-endian
    uniform_len    1 byte   (1: one shared length follows, 0: count lengths)
    lengths        4 bytes each, big-endian
    ciphertexts    concatenated
    aggregate tag  32 / 16 / 17 bytes for hash / xor / add_q

Encoding is canonical: the single-length form is used exactly when the batch
is non-empty and every ciphertext has the same length, and decode rejects
anything encode would not produce.
"""

import logging
import struct
from typing import List

from .aggregator import TAG_WIDTH, AggregateTag
from .config import AggMode, Instantiation
from .engine import SealedBatch
from .exceptions import DecodeError, EncodeError

logger = logging.getLogger(__name__)

WIRE_VERSION = 1
_HEADER = struct.Struct(">BBBQIB")
_LENGTH = struct.Struct(">I")
MAX_COUNT = 0xFFFFFFFF
# Zero-length items take no buffer space, so the count needs its own bound.
MAX_DECODE_COUNT = 1 << 24


def header_size(count: int, uniform: bool) -> int:
    return _HEADER.size + _LENGTH.size * (1 if uniform else count)


def encode_batch(sealed: SealedBatch) -> bytes:
    count = sealed.count
    if count > MAX_COUNT:
        raise EncodeError(f"batch of {count} items does not fit a 32-bit count")
    if sealed.aggregate.count != count or sealed.aggregate.start_index != sealed.start_index:
        raise EncodeError("aggregate window does not match the batch")
    mode = sealed.aggregate.mode
    if len(sealed.aggregate.tag) != TAG_WIDTH[mode]:
        raise EncodeError(f"{mode.name} aggregate must be {TAG_WIDTH[mode]} bytes")
    lengths = [len(c) for c in sealed.ciphertexts]
    if any(length > 0xFFFFFFFF for length in lengths):
        raise EncodeError("ciphertext longer than 2^32 - 1 bytes")
    uniform = count > 0 and len(set(lengths)) == 1

    out = bytearray(_HEADER.pack(
        WIRE_VERSION, int(sealed.instantiation), int(mode),
        sealed.start_index, count, 1 if uniform else 0,
    ))
    if uniform:
        out += _LENGTH.pack(lengths[0])
    else:
        for length in lengths:
            out += _LENGTH.pack(length)
    for c in sealed.ciphertexts:
        out += c
    out += sealed.aggregate.tag
    return bytes(out)


def decode_batch(data: bytes, max_count: int = MAX_DECODE_COUNT) -> SealedBatch:
    """Strict parse; every declared length is checked against the buffer first."""
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise DecodeError("wire batch header truncated", position=len(data))
    version, inst, mode, start_index, count, uniform = _HEADER.unpack_from(data)
    if version != WIRE_VERSION:
        raise DecodeError(f"unsupported wire version {version}", position=0)
    try:
        instantiation = Instantiation(inst)
    except ValueError:
        raise DecodeError(f"unknown instantiation {inst}", position=1) from None
    try:
        agg_mode = AggMode(mode)
    except ValueError:
        raise DecodeError(f"unknown aggregation mode {mode}", position=2) from None
    if uniform not in (0, 1):
        raise DecodeError(f"bad uniform-length flag {uniform}", position=15)
    if uniform and count == 0:
        raise DecodeError("empty batch cannot use the shared-length form", position=15)
    if count > max_count:
        raise DecodeError(f"count {count} exceeds the decoder limit {max_count}", position=11)

    tag_width = TAG_WIDTH[agg_mode]
    pos = _HEADER.size
    length_fields = 1 if uniform else count
    if len(data) - pos < _LENGTH.size * length_fields + tag_width:
        raise DecodeError("length table truncated", position=len(data))
    if uniform:
        (shared,) = _LENGTH.unpack_from(data, pos)
        pos += _LENGTH.size
        payload = shared * count
        lengths: List[int] = [shared] * count if payload + tag_width == len(data) - pos else []
    else:
        lengths = [length for (length,) in _LENGTH.iter_unpack(data[pos:pos + _LENGTH.size * count])]
        pos += _LENGTH.size * count
        payload = sum(lengths)
        if count > 0 and len(set(lengths)) == 1:
            raise DecodeError("uniform lengths must use the shared-length form", position=15)

    if payload + tag_width != len(data) - pos:
        raise DecodeError(
            f"declared {payload} ciphertext bytes + {tag_width} tag bytes, "
            f"buffer holds {len(data) - pos}",
            position=pos,
        )
    ciphertexts = []
    for length in lengths:
        ciphertexts.append(data[pos:pos + length])
        pos += length
    tag = data[pos:]
    aggregate = AggregateTag(agg_mode, tag, start_index, count)
    return SealedBatch(instantiation, start_index, ciphertexts, aggregate)

"""
Sequential tag aggregation.

Mode 1 chains tags through SHA-256 (order sensitive, immutable), mode 2
XORs them, mode 3 adds them modulo q = 2^130 - 5.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

from . import primitives
from .config import AggMode
from .exceptions import DecodeError, InvalidArgumentError, InvalidConfigError, WindowMismatchError

logger = logging.getLogger(__name__)

Q = primitives.POLY_PRIME
TAG_WIDTH = {AggMode.HASH: 32, AggMode.XOR: 16, AggMode.ADD_Q: 17}
_HASH_SEED = bytes(32)


@dataclass(frozen=True)
class AggState:
    mode: AggMode
    acc: bytes
    folded: int = 0

    @property
    def value(self) -> int:
        """Accumulator of the xor/add_q modes as an integer."""
        return int.from_bytes(self.acc, "little")


@dataclass(frozen=True)
class AggregateTag:
    mode: AggMode
    tag: bytes
    start_index: int
    count: int

    @property
    def window(self) -> Tuple[int, int]:
        return self.start_index, self.count

    def to_bytes(self) -> bytes:
        """Tag wire form: mode, width, bytes."""
        return bytes((int(self.mode), len(self.tag))) + self.tag

    @classmethod
    def from_bytes(cls, data: bytes, start_index: int, count: int) -> "AggregateTag":
        if len(data) < 2:
            raise DecodeError("aggregate tag truncated", position=len(data))
        try:
            mode = AggMode(data[0])
        except ValueError:
            raise DecodeError(f"unknown aggregation mode {data[0]}", position=0) from None
        width = data[1]
        if width != TAG_WIDTH[mode]:
            raise DecodeError(f"mode {mode.name} tags are {TAG_WIDTH[mode]} bytes, got {width}", position=1)
        if len(data) != 2 + width:
            raise DecodeError("aggregate tag length mismatch", position=len(data))
        return cls(mode, bytes(data[2:]), start_index, count)


def agg_init(mode) -> AggState:
    try:
        mode = AggMode(mode)
    except ValueError:
        raise InvalidConfigError(f"aggregation mode must be 1, 2 or 3, got {mode}") from None
    if mode is AggMode.HASH:
        return AggState(mode, _HASH_SEED)
    # add_q keeps the reduced field element in 17 little-endian bytes
    return AggState(mode, bytes(16 if mode is AggMode.XOR else 17))


def agg_fold(state: AggState, tag: bytes) -> AggState:
    """Absorb one per-message tag. 32-byte tags are truncated for modes 2 and 3."""
    if len(tag) not in (16, 32):
        raise InvalidArgumentError(f"tags are 16 or 32 bytes, got {len(tag)}")
    if state.mode is AggMode.HASH:
        acc = primitives.hash(state.acc + bytes(tag))
    elif state.mode is AggMode.XOR:
        acc = primitives.xor_bytes(tag[:16], state.acc)
    else:
        value = (state.value + int.from_bytes(tag[:16], "little")) % Q
        acc = value.to_bytes(17, "little")
    return AggState(state.mode, acc, state.folded + 1)


def agg_final(state: AggState, start_index: int, count: int) -> AggregateTag:
    """Package the accumulator once exactly `count` tags have been folded."""
    if state.folded != count:
        raise WindowMismatchError(count, state.folded)
    return AggregateTag(state.mode, state.acc, start_index, count)

"""
Forward-secure key chain.

A KeyState holds the current pair (sk_i, sk_i') at absolute index i. upd()
replaces both with their SHA-256 images and wipes the old bytes, so nothing
earlier than the current index can be recovered from a live state.
Per-index one-time keys are derived with the AES PRF under the chain keys.
"""

import enum
import logging
import os
import struct
from typing import Callable, Optional

from . import primitives
from .config import InstantiationConfig
from .exceptions import (
    ChainExhaustedError,
    DecodeError,
    ForbiddenError,
    InvalidArgumentError,
    KeyGenerationError,
    OutOfWindowError,
)

logger = logging.getLogger(__name__)

GKS_MAGIC = b"GKS1"
_GKS_HEADER = struct.Struct(">4sBQ")
MAX_INDEX = (1 << 64) - 1

EntropySource = Callable[[int], bytes]


class Role(enum.Enum):
    ENC = "enc"
    MAC = "mac"


class KeyState:
    """Evolving key pair plus absolute index. Single owner, mutated in place."""

    def __init__(self, kappa: int, index: int, sk: bytes, sk_prime: bytes):
        key_bytes = kappa // 8
        if kappa not in (128, 256):
            raise InvalidArgumentError(f"kappa must be 128 or 256, got {kappa}")
        if len(sk) != key_bytes or len(sk_prime) != key_bytes:
            raise InvalidArgumentError(f"chain keys must be {key_bytes} bytes")
        if not 0 <= index <= MAX_INDEX:
            raise InvalidArgumentError(f"index {index} out of range")
        self.kappa = kappa
        self.index = index
        self.sk = bytearray(sk)
        self.sk_prime = bytearray(sk_prime)

    def __repr__(self):
        return f"KeyState(kappa={self.kappa}, index={self.index})"

    def copy(self) -> "KeyState":
        return KeyState(self.kappa, self.index, bytes(self.sk), bytes(self.sk_prime))

    def wipe(self) -> None:
        primitives.zeroize(self.sk)
        primitives.zeroize(self.sk_prime)

    def to_record(self) -> bytes:
        """GKS1 record: magic, kappa/8, index (8 bytes BE), sk, sk'."""
        return _GKS_HEADER.pack(GKS_MAGIC, self.kappa // 8, self.index) + bytes(self.sk) + bytes(self.sk_prime)

    @classmethod
    def from_record(cls, data: bytes) -> "KeyState":
        if len(data) < _GKS_HEADER.size:
            raise DecodeError("key record truncated", position=len(data))
        magic, width, index = _GKS_HEADER.unpack_from(data)
        if magic != GKS_MAGIC:
            raise DecodeError("bad key record magic", position=0)
        if width not in (16, 32):
            raise DecodeError(f"bad key width {width}", position=4)
        expected = _GKS_HEADER.size + 2 * width
        if len(data) != expected:
            raise DecodeError(f"key record must be {expected} bytes, got {len(data)}", position=len(data))
        body = data[_GKS_HEADER.size:]
        return cls(width * 8, index, body[:width], body[width:])


def kg(
    config: InstantiationConfig,
    entropy: Optional[EntropySource] = None,
    seed: Optional[bytes] = None,
) -> KeyState:
    """Generate the root key state at index 1.

    With `seed`, both components come from one seed (unified mode):
    sk = H(seed || 0x00), sk' = H(seed || 0x01), truncated to kappa bits.
    Otherwise 2*kappa bits are drawn from `entropy` (os.urandom by default).
    """
    width = config.key_bytes
    if seed is not None:
        sk = primitives.hash(bytes(seed) + b"\x00")[:width]
        sk_prime = primitives.hash(bytes(seed) + b"\x01")[:width]
        logger.info(f"Derived root key pair from a seed (kappa={config.kappa})")
        return KeyState(config.kappa, 1, sk, sk_prime)

    source = entropy or os.urandom
    try:
        material = source(2 * width)
    except Exception as e:
        raise KeyGenerationError(f"entropy source failed: {e}") from e
    if not isinstance(material, (bytes, bytearray)) or len(material) < 2 * width:
        raise KeyGenerationError(f"entropy source returned fewer than {2 * width} bytes")
    state = KeyState(config.kappa, 1, material[:width], material[width:2 * width])
    if isinstance(material, bytearray):
        primitives.zeroize(material)
    logger.info(f"Generated root key pair (kappa={config.kappa})")
    return state


def _evolve(key: bytearray, width: int) -> bytearray:
    return bytearray(primitives.hash(key)[:width])


def upd(state: KeyState) -> KeyState:
    """One chain step: sk <- H(sk), sk' <- H(sk'), index + 1. Wipes the old keys."""
    if state.index >= MAX_INDEX:
        raise ChainExhaustedError(f"key chain exhausted at index {state.index}")
    width = state.kappa // 8
    old_sk, old_sk_prime = state.sk, state.sk_prime
    state.sk = _evolve(old_sk, width)
    state.sk_prime = _evolve(old_sk_prime, width)
    primitives.zeroize(old_sk)
    primitives.zeroize(old_sk_prime)
    state.index += 1
    return state


def advance(state: KeyState, steps: int) -> KeyState:
    """Apply upd() `steps` times, wiping every intermediate key."""
    if steps < 0:
        raise InvalidArgumentError("cannot advance a key chain backwards")
    if state.index + steps > MAX_INDEX:
        raise ChainExhaustedError(f"cannot advance index {state.index} by {steps}")
    for _ in range(steps):
        upd(state)
    return state


def derive_intra(state: KeyState, j: int, role: Role, width: int, window: int) -> bytes:
    """One-time key for index j inside the window [state.index, state.index + window).

    enc: PRF_sk(j). mac, 16 bytes: PRF_sk'(j). mac, 32 bytes:
    PRF_sk'(2j) || PRF_sk'(2j+1).
    """
    if not state.index <= j < state.index + window:
        raise OutOfWindowError(j, state.index, window)
    role = Role(role)
    if role is Role.ENC:
        if width != 16:
            raise InvalidArgumentError("encryption keys are 16 bytes")
        return primitives.prf_block(state.sk, j)
    if width == 16:
        return primitives.prf_block(state.sk_prime, j)
    if width == 32:
        if 2 * j + 1 > MAX_INDEX:
            raise ChainExhaustedError(f"index {j} too large for 32-byte MAC derivation")
        return primitives.prf_block(state.sk_prime, 2 * j) + primitives.prf_block(state.sk_prime, 2 * j + 1)
    raise InvalidArgumentError(f"derived key width must be 16 or 32, got {width}")


def poly_window_r(state: KeyState) -> bytes:
    """Clamped Poly1305 r shared by the window starting at state.index."""
    return primitives.clamp_r(primitives.prf_block(state.sk_prime, MAX_INDEX))


def export_state(state: KeyState, breach_simulation: bool = False, sender: bool = True) -> bytes:
    """Serialize a key state. Sender state only leaves memory for breach simulation."""
    if sender and not breach_simulation:
        raise ForbiddenError("exporting sender key state requires breach simulation mode")
    return state.to_record()


def import_state(data: bytes) -> KeyState:
    return KeyState.from_record(data)

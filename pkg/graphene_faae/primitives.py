"""
Symmetric primitives behind the framework's roles.

PRF is AES in single-block mode, H is SHA-256, ENC-OO is AES counter mode,
MAC-OO is GHASH or Poly1305 and the baseline uses AES-CBC with HMAC-SHA-256.
All functions are pure except zeroize(), which wipes its argument in place.
"""

import hashlib
import hmac
import logging
from dataclasses import dataclass
from typing import List, Union

import cffi
from cryptography.hazmat.primitives import constant_time, padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.poly1305 import Poly1305

from .exceptions import InvalidArgumentError, PaddingError

logger = logging.getLogger(__name__)

BLOCK_SIZE = 16
DIGEST_SIZE = 32
ZERO_BLOCK = bytes(BLOCK_SIZE)
AES_KEY_SIZES = (16, 32)

# Poly1305 clamp mask on r, read as a little-endian integer.
POLY_CLAMP = 0x0FFFFFFC0FFFFFFC0FFFFFFC0FFFFFFF
POLY_PRIME = (1 << 130) - 5

# GF(2^128) reduction constant in GCM's reflected bit order.
_GCM_R = 0xE1 << 120

_ffi = cffi.FFI()
_ZEROS = bytes(4096)

Buffer = Union[bytes, bytearray, memoryview]


def _check_aes_key(key: Buffer) -> None:
    if len(key) not in AES_KEY_SIZES:
        raise InvalidArgumentError(f"AES key must be 16 or 32 bytes, got {len(key)}")


def prf_block(key: Buffer, index: int) -> bytes:
    """Keyed PRF: AES over the block holding `index` big-endian in its low 8 bytes."""
    _check_aes_key(key)
    if not 0 <= index < 1 << 64:
        raise InvalidArgumentError(f"PRF index {index} is not an unsigned 64-bit value")
    block = bytes(8) + index.to_bytes(8, "big")
    encryptor = Cipher(algorithms.AES(bytes(key)), modes.ECB()).encryptor()
    return encryptor.update(block) + encryptor.finalize()


def aes_block(key: Buffer, block: Buffer) -> bytes:
    """Raw single-block AES encryption."""
    _check_aes_key(key)
    if len(block) != BLOCK_SIZE:
        raise InvalidArgumentError("AES block must be 16 bytes")
    encryptor = Cipher(algorithms.AES(bytes(key)), modes.ECB()).encryptor()
    return encryptor.update(bytes(block)) + encryptor.finalize()


def hash(data: Buffer) -> bytes:  # noqa: A001 - the framework calls this role H
    """SHA-256 digest of data."""
    return hashlib.sha256(data).digest()


def keystream(key: Buffer, length: int, counter_block: bytes = ZERO_BLOCK) -> bytes:
    """AES-CTR keystream of `length` bytes.

    The default counter starts at the all-zero block, which is safe because
    each keystream key is used for exactly one index.
    """
    _check_aes_key(key)
    if length < 0:
        raise InvalidArgumentError("keystream length must be non-negative")
    if len(counter_block) != BLOCK_SIZE:
        raise InvalidArgumentError("counter block must be 16 bytes")
    if length == 0:
        return b""
    encryptor = Cipher(algorithms.AES(bytes(key)), modes.CTR(counter_block)).encryptor()
    return encryptor.update(bytes(length)) + encryptor.finalize()


def xor_bytes(data: Buffer, pad: Buffer) -> bytes:
    """XOR data with the prefix of pad of the same length."""
    n = len(data)
    if len(pad) < n:
        raise InvalidArgumentError("pad is shorter than data")
    if n == 0:
        return b""
    x = int.from_bytes(data, "big") ^ int.from_bytes(pad[:n], "big")
    return x.to_bytes(n, "big")


def ct_equal(a: Buffer, b: Buffer) -> bool:
    """Constant-time comparison."""
    return constant_time.bytes_eq(bytes(a), bytes(b))


# --- GHASH -----------------------------------------------------------------

def _gf_mulx(v: int) -> int:
    return (v >> 1) ^ _GCM_R if v & 1 else v >> 1


def _build_reduction_table() -> List[int]:
    table = []
    for low in range(16):
        v = low
        for _ in range(4):
            v = _gf_mulx(v)
        table.append(v)
    return table


# Reduction of the four bits shifted out by a multiplication with x^4.
_R4 = _build_reduction_table()


def _ghash_table(h: int) -> List[int]:
    """Multiples of H by every 4-bit polynomial (bit 0x8 is the x^0 term)."""
    m = [0] * 16
    m[8] = h
    m[4] = _gf_mulx(m[8])
    m[2] = _gf_mulx(m[4])
    m[1] = _gf_mulx(m[2])
    for hi in (2, 4, 8):
        for lo in range(1, hi):
            m[hi | lo] = m[hi] ^ m[lo]
    return m


def _gf_mul(x: int, m: List[int]) -> int:
    z = 0
    for shift in range(0, 128, 4):
        z = (z >> 4) ^ _R4[z & 0xF] ^ m[(x >> shift) & 0xF]
    return z


def gf_mul(x: int, y: int) -> int:
    """Multiply two field elements of GF(2^128) in GCM representation."""
    return _gf_mul(x, _ghash_table(y))


def ghash(hash_key: Buffer, data: Buffer) -> bytes:
    """GHASH of data (empty associated data) under hash_key."""
    if len(hash_key) != BLOCK_SIZE:
        raise InvalidArgumentError("GHASH key must be 16 bytes")
    m = _ghash_table(int.from_bytes(hash_key, "big"))
    y = 0
    data = bytes(data)
    for offset in range(0, len(data), BLOCK_SIZE):
        block = data[offset:offset + BLOCK_SIZE]
        if len(block) < BLOCK_SIZE:
            block = block + bytes(BLOCK_SIZE - len(block))
        y = _gf_mul(y ^ int.from_bytes(block, "big"), m)
    y = _gf_mul(y ^ (len(data) * 8), m)
    return y.to_bytes(BLOCK_SIZE, "big")


def ghash_tag(hash_key: Buffer, pad: Buffer, data: Buffer) -> bytes:
    """GHASH of data under hash_key, XORed with pad: the AES-GCM tag shape."""
    if len(pad) != BLOCK_SIZE:
        raise InvalidArgumentError("GHASH pad must be 16 bytes")
    return xor_bytes(ghash(hash_key, data), pad)


def gcm_nonce(index: int) -> bytes:
    """96-bit big-endian nonce for a message index."""
    return index.to_bytes(12, "big")


def gcm_j0(nonce: bytes) -> bytes:
    """Pre-counter block J0 for a 96-bit nonce."""
    return nonce + b"\x00\x00\x00\x01"


def gcm_counter(j0: bytes, step: int = 1) -> bytes:
    """inc32 applied `step` times to J0."""
    ctr = (int.from_bytes(j0[12:], "big") + step) & 0xFFFFFFFF
    return j0[:12] + ctr.to_bytes(4, "big")


# --- Poly1305 --------------------------------------------------------------

@dataclass(frozen=True)
class PolyKey:
    """Poly1305 one-time key: clamped r and pad s, 16 bytes each."""

    r: bytes
    s: bytes

    def __post_init__(self):
        if len(self.r) != BLOCK_SIZE or len(self.s) != BLOCK_SIZE:
            raise InvalidArgumentError("PolyKey halves must be 16 bytes each")
        if int.from_bytes(self.r, "little") & ~POLY_CLAMP:
            raise InvalidArgumentError("PolyKey.r is not clamped")

    @classmethod
    def from_material(cls, material: Buffer) -> "PolyKey":
        """Split 32 bytes of PRF output into a clamped key."""
        if len(material) != 2 * BLOCK_SIZE:
            raise InvalidArgumentError("Poly key material must be 32 bytes")
        return cls(clamp_r(material[:BLOCK_SIZE]), bytes(material[BLOCK_SIZE:]))

    def to_bytes(self) -> bytes:
        return self.r + self.s


def clamp_r(r: Buffer) -> bytes:
    value = int.from_bytes(r, "little") & POLY_CLAMP
    return value.to_bytes(BLOCK_SIZE, "little")


def poly_tag(key: PolyKey, data: Buffer) -> bytes:
    """Poly1305 tag: polynomial in r over GF(2^130 - 5), plus s mod 2^128."""
    return Poly1305.generate_tag(key.r + key.s, bytes(data))


def poly_tag_raw(key: bytes, data: Buffer) -> bytes:
    """Poly1305 under 32 bytes r || s whose r half is already clamped."""
    return Poly1305.generate_tag(key, bytes(data))


# --- Standard baseline -----------------------------------------------------

def hmac_sha256(key: Buffer, data: Buffer) -> bytes:
    return hmac.new(bytes(key), bytes(data), hashlib.sha256).digest()


def cbc_encrypt(key: Buffer, iv: Buffer, plaintext: Buffer) -> bytes:
    """AES-CBC with PKCS#7 padding; an empty plaintext yields one block."""
    _check_aes_key(key)
    if len(iv) != BLOCK_SIZE:
        raise InvalidArgumentError("CBC IV must be 16 bytes")
    padder = padding.PKCS7(128).padder()
    padded = padder.update(bytes(plaintext)) + padder.finalize()
    encryptor = Cipher(algorithms.AES(bytes(key)), modes.CBC(bytes(iv))).encryptor()
    return encryptor.update(padded) + encryptor.finalize()


def cbc_decrypt(key: Buffer, iv: Buffer, ciphertext: Buffer) -> bytes:
    _check_aes_key(key)
    if len(iv) != BLOCK_SIZE:
        raise InvalidArgumentError("CBC IV must be 16 bytes")
    if not ciphertext or len(ciphertext) % BLOCK_SIZE:
        raise PaddingError("CBC ciphertext is not a positive multiple of the block size")
    decryptor = Cipher(algorithms.AES(bytes(key)), modes.CBC(bytes(iv))).decryptor()
    padded = decryptor.update(bytes(ciphertext)) + decryptor.finalize()
    unpadder = padding.PKCS7(128).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError as e:
        raise PaddingError(str(e)) from e


def cbc_length(plaintext_length: int) -> int:
    """Ciphertext length produced by cbc_encrypt for a plaintext length."""
    return (plaintext_length // BLOCK_SIZE + 1) * BLOCK_SIZE


# --- Memory hygiene --------------------------------------------------------

def zeroize(buffer: bytearray) -> None:
    """Overwrite every byte of a mutable buffer with zero through cffi."""
    if isinstance(buffer, bytes):
        raise InvalidArgumentError("cannot zeroize an immutable bytes object")
    size = len(buffer)
    if size:
        _ffi.memmove(buffer, _ZEROS if size <= len(_ZEROS) else bytes(size), size)

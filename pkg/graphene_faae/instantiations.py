"""
Concrete instantiations of the framework.

Graphene-AE: AES-GCM per index (GCM keystream, GHASH authenticator).
Graphene-Poly: AES-CTR keystream with a Poly1305 one-time MAC.
Std FAAE: AES-CBC + HMAC-SHA-256 with a key update after every message.
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Tuple

from . import keychain, primitives
from .config import Instantiation, InstantiationConfig
from .exceptions import InvalidArgumentError
from .keychain import KeyState, Role

logger = logging.getLogger(__name__)


class BaseInstantiation(ABC):
    """Abstract base for the primitive bindings of one instantiation."""

    ident: Instantiation
    offline_online: bool = False

    def __init__(self, config: InstantiationConfig):
        self.config = config

    @property
    def name(self) -> str:
        return self.ident.label

    @abstractmethod
    def ciphertext_length(self, plaintext_length: int) -> int:
        """Ciphertext size for a plaintext of the given size."""
        pass


class OfflineOnlineInstantiation(BaseInstantiation):
    """Instantiation whose per-index material is input independent.

    The same derive() feeds the offline table, the direct (flags-off) path
    and the verifier, so all three compute identical outputs.
    """

    offline_online = True

    @abstractmethod
    def mac_width(self) -> int:
        """Bytes of one-time MAC material stored per index."""
        pass

    def window_context(self, keys: KeyState) -> Optional[bytes]:
        """Window-level public-size metadata derived before the chain advances."""
        return None

    def check_context(self, context: Optional[bytes]) -> Optional[bytes]:
        """Validate window metadata read back from a table, once per window."""
        return context

    @abstractmethod
    def derive(self, keys: KeyState, j: int) -> Tuple[bytearray, bytearray]:
        """(keystream r_j, MAC material r_j') for index j of the current window."""
        pass

    @abstractmethod
    def derive_mac(self, keys: KeyState, j: int) -> bytearray:
        """MAC material r_j' alone, for verification."""
        pass

    def derive_stream(self, keys: KeyState, j: int) -> bytearray:
        """Keystream r_j alone, for decryption."""
        stream, mac = self.derive(keys, j)
        primitives.zeroize(mac)
        return stream

    @abstractmethod
    def tag(self, ciphertext: bytes, mac_material: bytes, context: Optional[bytes]) -> bytes:
        """16-byte per-message tag over a ciphertext."""
        pass

    def ciphertext_length(self, plaintext_length: int) -> int:
        return plaintext_length

    def encrypt(self, message: bytes, keystream: bytes) -> bytes:
        return primitives.xor_bytes(message, keystream)

    def decrypt(self, ciphertext: bytes, keystream: bytes) -> bytes:
        return primitives.xor_bytes(ciphertext, keystream)


class GrapheneAE(OfflineOnlineInstantiation):
    """AES-GCM with a per-index key s_j = PRF_sk(j) and nonce j.

    The keystream starts at inc32(J0) and the MAC material is the GHASH
    subkey AES_sj(0) followed by the tag pad AES_sj(J0), so every per-message
    (ciphertext, tag) equals a standard AES-GCM encryption.
    """

    ident = Instantiation.GRAPHENE_AE

    def mac_width(self) -> int:
        return 32

    @staticmethod
    def _authenticator(s_j: bytearray, j0: bytes) -> bytearray:
        return bytearray(primitives.aes_block(s_j, primitives.ZERO_BLOCK) + primitives.aes_block(s_j, j0))

    def derive(self, keys: KeyState, j: int) -> Tuple[bytearray, bytearray]:
        s_j = bytearray(keychain.derive_intra(keys, j, Role.ENC, 16, self.config.n))
        try:
            j0 = primitives.gcm_j0(primitives.gcm_nonce(j))
            stream = bytearray(primitives.keystream(s_j, self.config.max_msg_len, primitives.gcm_counter(j0)))
            mac = self._authenticator(s_j, j0)
        finally:
            primitives.zeroize(s_j)
        return stream, mac

    def derive_mac(self, keys: KeyState, j: int) -> bytearray:
        s_j = bytearray(keychain.derive_intra(keys, j, Role.ENC, 16, self.config.n))
        try:
            return self._authenticator(s_j, primitives.gcm_j0(primitives.gcm_nonce(j)))
        finally:
            primitives.zeroize(s_j)

    def tag(self, ciphertext: bytes, mac_material: bytes, context: Optional[bytes]) -> bytes:
        return mac_oo_gcm(bytes(mac_material[:16]), bytes(mac_material[16:32]), ciphertext)


class GraphenePoly(OfflineOnlineInstantiation):
    """AES-CTR keystream per index and Poly1305 with one-time pad s_j.

    By default r is shared by the window and only s_j is per index; with
    poly_per_index_r each index gets its own (r_j, s_j).
    """

    ident = Instantiation.GRAPHENE_POLY

    def mac_width(self) -> int:
        return 32 if self.config.poly_per_index_r else 16

    def window_context(self, keys: KeyState) -> Optional[bytes]:
        if self.config.poly_per_index_r:
            return None
        return keychain.poly_window_r(keys)

    def check_context(self, context: Optional[bytes]) -> Optional[bytes]:
        if self.config.poly_per_index_r:
            return None
        if context is None:
            raise InvalidArgumentError("Graphene-Poly window has no shared r")
        # PolyKey checks width and clamp
        return primitives.PolyKey(bytes(context), primitives.ZERO_BLOCK).r

    def derive(self, keys: KeyState, j: int) -> Tuple[bytearray, bytearray]:
        return self.derive_stream(keys, j), self.derive_mac(keys, j)

    def derive_stream(self, keys: KeyState, j: int) -> bytearray:
        s_j = bytearray(keychain.derive_intra(keys, j, Role.ENC, 16, self.config.n))
        try:
            return bytearray(primitives.keystream(s_j, self.config.max_msg_len))
        finally:
            primitives.zeroize(s_j)

    def derive_mac(self, keys: KeyState, j: int) -> bytearray:
        material = keychain.derive_intra(keys, j, Role.MAC, self.mac_width(), self.config.n)
        if self.config.poly_per_index_r:
            material = primitives.PolyKey.from_material(material).to_bytes()
        return bytearray(material)

    def tag(self, ciphertext: bytes, mac_material: bytes, context: Optional[bytes]) -> bytes:
        # r is clamped by derive_mac or checked once by check_context
        if self.config.poly_per_index_r:
            return primitives.poly_tag_raw(bytes(mac_material), ciphertext)
        return primitives.poly_tag_raw(context + mac_material, ciphertext)


class StandardFAAE(BaseInstantiation):
    """AES-CBC + HMAC-SHA-256 under the chain keys of the message's own index."""

    ident = Instantiation.STD_FAAE

    def ciphertext_length(self, plaintext_length: int) -> int:
        return primitives.cbc_length(plaintext_length)

    def _cipher_key(self, keys: KeyState) -> bytes:
        return bytes(keys.sk)

    def seal_one(self, keys: KeyState, message: bytes) -> Tuple[bytes, bytes]:
        key = self._cipher_key(keys)
        iv = primitives.prf_block(key, 0)
        ciphertext = primitives.cbc_encrypt(key, iv, message)
        return ciphertext, primitives.hmac_sha256(keys.sk_prime, ciphertext)

    def tag_one(self, keys: KeyState, ciphertext: bytes) -> bytes:
        return primitives.hmac_sha256(keys.sk_prime, ciphertext)

    def open_one(self, keys: KeyState, ciphertext: bytes) -> bytes:
        key = self._cipher_key(keys)
        return primitives.cbc_decrypt(key, primitives.prf_block(key, 0), ciphertext)


def mac_oo_poly(key: primitives.PolyKey, ciphertext: bytes) -> bytes:
    return primitives.poly_tag(key, ciphertext)


def mac_oo_gcm(hash_key: bytes, pad: bytes, ciphertext: bytes) -> bytes:
    return primitives.ghash_tag(hash_key, pad, ciphertext)


_REGISTRY = {
    Instantiation.STD_FAAE: StandardFAAE,
    Instantiation.GRAPHENE_AE: GrapheneAE,
    Instantiation.GRAPHENE_POLY: GraphenePoly,
}


def for_config(config: InstantiationConfig) -> BaseInstantiation:
    return _REGISTRY[config.instantiation](config)

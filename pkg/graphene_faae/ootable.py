"""
Offline precomputation tables.

One OOTable covers one window [start_index, start_index + count). Each index
has a keystream entry (T^ENC) and a one-time MAC entry (T^MAC); every entry
can be taken exactly once, and whoever takes it wipes it after use.
"""

import logging
import struct
from typing import List, Optional, Tuple

from . import keychain, primitives
from .config import Instantiation, InstantiationConfig
from .exceptions import (
    DecodeError,
    InvalidConfigError,
    OutOfWindowError,
    PrecomputeError,
    ReuseError,
)
from .instantiations import OfflineOnlineInstantiation, for_config
from .keychain import KeyState

logger = logging.getLogger(__name__)

GOT_MAGIC = b"GOT1"
# magic, instantiation, start_index, count, max_msg_len, mac width, window r
_GOT_HEADER = struct.Struct(">4sBQIIB16s")


class OOTable:
    def __init__(
        self,
        instantiation: Instantiation,
        start_index: int,
        count: int,
        max_msg_len: int,
        mac_width: int,
        window_r: Optional[bytes] = None,
    ):
        self.instantiation = Instantiation(instantiation)
        self.start_index = start_index
        self.count = count
        self.max_msg_len = max_msg_len
        self.mac_width = mac_width
        self.window_r = window_r
        self.enc_entries: List[Optional[bytearray]] = [None] * count
        self.mac_entries: List[Optional[bytearray]] = [None] * count

    def __repr__(self):
        return (f"OOTable({self.instantiation.label}, start={self.start_index}, "
                f"count={self.count}, live={self.live_bytes()})")

    def _slot(self, j: int) -> int:
        if not self.start_index <= j < self.start_index + self.count:
            raise OutOfWindowError(j, self.start_index, self.count)
        return j - self.start_index

    def covers(self, start_index: int, count: int) -> bool:
        return self.start_index == start_index and self.count == count

    def _take(self, entries: List[Optional[bytearray]], j: int, what: str) -> bytearray:
        slot = self._slot(j)
        entry = entries[slot]
        if entry is None:
            raise ReuseError(j, what)
        entries[slot] = None
        return entry

    def take_enc(self, j: int) -> bytearray:
        """Remove and return the keystream for index j.

        The table drops its reference; the caller owns the buffer and must
        zeroize it after use.
        """
        return self._take(self.enc_entries, j, "keystream")

    def take_mac(self, j: int) -> bytearray:
        """Remove and return the one-time MAC material for index j (caller zeroizes)."""
        return self._take(self.mac_entries, j, "MAC key")

    def live_bytes(self) -> int:
        """Every precomputed byte still held."""
        enc = sum(len(e) for e in self.enc_entries if e is not None)
        mac = sum(len(e) for e in self.mac_entries if e is not None)
        return enc + mac

    def wipe(self) -> None:
        for entries in (self.enc_entries, self.mac_entries):
            for slot, entry in enumerate(entries):
                if entry is not None:
                    primitives.zeroize(entry)
                    entries[slot] = None


def table_bytes(table: OOTable) -> int:
    """Storage overhead in the analytical accounting.

    Graphene-Poly counts keystreams and one-time MAC keys, n*(|c| + kappa/8).
    Graphene-AE counts its keystream side only, n*|c|; the GHASH subkey/pad
    pairs are reported by live_bytes().
    """
    enc = sum(len(e) for e in table.enc_entries if e is not None)
    if table.instantiation is Instantiation.GRAPHENE_AE:
        return enc
    return enc + sum(len(e) for e in table.mac_entries if e is not None)


def expected_table_bytes(config: InstantiationConfig) -> int:
    """Closed form of table_bytes for a fresh table."""
    if config.instantiation is Instantiation.GRAPHENE_AE:
        return config.n * config.max_msg_len
    # s_j is one AES block whatever the chain key width
    mac = 32 if config.poly_per_index_r else 16
    return config.n * (mac + config.max_msg_len)


def precompute(state: KeyState, config: InstantiationConfig) -> Tuple[KeyState, OOTable]:
    """Fill a table for the window starting at state.index and advance the chain by n."""
    if not config.oo:
        raise InvalidConfigError("precompute requires b_enc_oo and b_mac_oo")
    inst = for_config(config)
    if not isinstance(inst, OfflineOnlineInstantiation):
        raise InvalidConfigError(f"{inst.name} has no offline-online path")
    start = state.index
    table = OOTable(
        config.instantiation, start, config.n, config.max_msg_len,
        inst.mac_width(), inst.window_context(state),
    )
    try:
        for slot in range(config.n):
            stream, mac = inst.derive(state, start + slot)
            table.enc_entries[slot] = stream
            table.mac_entries[slot] = mac
    except MemoryError as e:
        table.wipe()
        raise PrecomputeError(f"out of memory precomputing {config.n} entries") from e
    keychain.advance(state, config.n)
    logger.info(f"Precomputed {inst.name} window [{start}, {start + config.n}): "
                f"{table_bytes(table)} table bytes")
    return state, table


def serialize_table(table: OOTable) -> bytes:
    """GOT1 record; consumed entries are absent."""
    bitmap = bytearray((2 * table.count + 7) // 8)
    body = bytearray()
    for slot in range(table.count):
        enc, mac = table.enc_entries[slot], table.mac_entries[slot]
        if enc is not None:
            bitmap[(2 * slot) // 8] |= 1 << ((2 * slot) % 8)
            body += enc
        if mac is not None:
            bitmap[(2 * slot + 1) // 8] |= 1 << ((2 * slot + 1) % 8)
            body += mac
    header = _GOT_HEADER.pack(
        GOT_MAGIC, int(table.instantiation), table.start_index, table.count,
        table.max_msg_len, table.mac_width, table.window_r or bytes(16),
    )
    return header + bytes(bitmap) + bytes(body)


def deserialize_table(data: bytes) -> OOTable:
    data = bytes(data)
    if len(data) < _GOT_HEADER.size:
        raise DecodeError("table record truncated", position=len(data))
    magic, inst, start, count, max_len, mac_width, window_r = _GOT_HEADER.unpack_from(data)
    if magic != GOT_MAGIC:
        raise DecodeError("bad table magic", position=0)
    try:
        instantiation = Instantiation(inst)
    except ValueError:
        raise DecodeError(f"unknown instantiation {inst}", position=4) from None
    if instantiation is Instantiation.STD_FAAE:
        raise DecodeError("Std FAAE has no precomputation table", position=4)
    if mac_width not in (16, 32):
        raise DecodeError(f"bad MAC entry width {mac_width}", position=21)
    pos = _GOT_HEADER.size
    bitmap_len = (2 * count + 7) // 8
    if len(data) < pos + bitmap_len:
        raise DecodeError("presence bitmap truncated", position=len(data))
    bitmap = data[pos:pos + bitmap_len]
    pos += bitmap_len

    uses_window_r = instantiation is Instantiation.GRAPHENE_POLY and mac_width == 16
    table = OOTable(instantiation, start, count, max_len, mac_width,
                    window_r if uses_window_r else None)
    for slot in range(count):
        for bit, width, entries in ((2 * slot, max_len, table.enc_entries),
                                    (2 * slot + 1, mac_width, table.mac_entries)):
            if bitmap[bit // 8] >> (bit % 8) & 1:
                if len(data) < pos + width:
                    table.wipe()
                    raise DecodeError(f"entry for index {start + slot} truncated", position=len(data))
                entries[slot] = bytearray(data[pos:pos + width])
                pos += width
    if pos != len(data):
        table.wipe()
        raise DecodeError("trailing bytes after table entries", position=pos)
    return table

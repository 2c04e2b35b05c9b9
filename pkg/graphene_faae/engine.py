"""
Framework orchestration: seal a window of messages into ciphertexts plus one
aggregate tag, and verify-then-decrypt on the receiving side.
"""

import logging
import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Tuple

from . import keychain, ootable, primitives
from .aggregator import AggregateTag, agg_final, agg_fold, agg_init
from .config import Instantiation, InstantiationConfig, snapshot_allowed
from .exceptions import (
    DecodeError,
    ForbiddenError,
    GrapheneError,
    OutOfWindowError,
    OversizeError,
    ReuseError,
    SyncError,
    VerificationError,
    WindowMismatchError,
)
from .instantiations import OfflineOnlineInstantiation, StandardFAAE, for_config
from .keychain import KeyState
from .ootable import OOTable

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"GSN1"


@dataclass
class Batch:
    items: List[bytes]
    start_index: Optional[int] = None

    @property
    def count(self) -> int:
        return len(self.items)


@dataclass
class SealedBatch:
    instantiation: Instantiation
    start_index: int
    ciphertexts: List[bytes]
    aggregate: AggregateTag

    @property
    def count(self) -> int:
        return len(self.ciphertexts)


@dataclass
class EngineState:
    """One direction's state: config, key chain and precomputed tables.

    Sender tables are queued in window order; the verifier never uses tables.
    """

    config: InstantiationConfig
    keys: KeyState
    tables: Deque[OOTable] = field(default_factory=deque)
    breach_simulation: bool = False

    def __post_init__(self):
        self.instantiation = for_config(self.config)

    @property
    def table(self) -> Optional[OOTable]:
        return self.tables[0] if self.tables else None

    @property
    def window_start(self) -> int:
        """First index of the next window this state will process."""
        return self.tables[0].start_index if self.tables else self.keys.index


def precompute_window(state: EngineState) -> OOTable:
    """Run the offline phase for the next uncovered window and queue its table."""
    state.keys, table = ootable.precompute(state.keys, state.config)
    state.tables.append(table)
    return table


class WindowSealer:
    """Incremental EncMac over one window: push() each message, then finish()."""

    def __init__(self, state: EngineState):
        self.state = state
        self.config = state.config
        self.inst = state.instantiation
        self.start = state.window_start
        self.position = 0
        self.ciphertexts: List[bytes] = []
        self.agg = agg_init(self.config.b_agg)
        self.table: Optional[OOTable] = None
        self.context: Optional[bytes] = None
        if self.config.oo:
            table = state.table
            if table is None or not table.covers(self.start, self.config.n):
                raise ReuseError(self.start, "precomputed window")
            self.table = table
            self.context = self.inst.check_context(table.window_r)
        elif isinstance(self.inst, OfflineOnlineInstantiation):
            self.context = self.inst.window_context(state.keys)
        self._standard = isinstance(self.inst, StandardFAAE)

    @property
    def next_index(self) -> int:
        return self.start + self.position

    def push(self, message: bytes) -> bytes:
        """Encrypt and tag the next message of the window; returns its ciphertext."""
        n = self.config.n
        if self.position >= n:
            raise WindowMismatchError(n, self.position + 1)
        j = self.next_index
        if len(message) > self.config.max_msg_len:
            raise OversizeError(j, len(message), self.config.max_msg_len)

        if self._standard:
            ciphertext, tag = self.inst.seal_one(self.state.keys, message)
            keychain.upd(self.state.keys)
        else:
            if self.table is not None:
                stream = self.table.take_enc(j)
                mac = self.table.take_mac(j)
            else:
                stream, mac = self.inst.derive(self.state.keys, j)
            try:
                ciphertext = self.inst.encrypt(message, stream)
                tag = self.inst.tag(ciphertext, mac, self.context)
            finally:
                primitives.zeroize(stream)
                primitives.zeroize(mac)

        self.agg = agg_fold(self.agg, tag)
        self.ciphertexts.append(ciphertext)
        self.position += 1
        logger.debug("Sealed index %d", j)
        return ciphertext

    def finish(self) -> SealedBatch:
        aggregate = agg_final(self.agg, self.start, self.config.n)
        if self.table is not None:
            self.state.tables.popleft()
        elif isinstance(self.inst, OfflineOnlineInstantiation):
            keychain.advance(self.state.keys, self.config.n)
        logger.info(f"Sealed {self.inst.name} window [{self.start}, {self.start + self.config.n})")
        return SealedBatch(self.config.instantiation, self.start, list(self.ciphertexts), aggregate)


def seal(state: EngineState, messages: Batch) -> SealedBatch:
    """Encrypt and authenticate exactly one window of messages."""
    config = state.config
    if messages.count != config.n:
        raise WindowMismatchError(config.n, messages.count)
    if messages.start_index is not None and messages.start_index != state.window_start:
        raise OutOfWindowError(messages.start_index, state.window_start, config.n)
    for offset, item in enumerate(messages.items):
        if len(item) > config.max_msg_len:
            raise OversizeError(state.window_start + offset, len(item), config.max_msg_len)
    sealer = WindowSealer(state)
    for item in messages.items:
        sealer.push(item)
    return sealer.finish()


def _window_tags(state: EngineState, sealed: SealedBatch) -> Optional[List[bytes]]:
    """Recompute every per-message tag, or None if a ciphertext is malformed."""
    inst, keys, config = state.instantiation, state.keys, state.config
    tags = []
    if isinstance(inst, StandardFAAE):
        limit = primitives.cbc_length(config.max_msg_len)
        working = keys.copy()
        try:
            for c in sealed.ciphertexts:
                if not c or len(c) % primitives.BLOCK_SIZE or len(c) > limit:
                    return None
                tags.append(inst.tag_one(working, c))
                keychain.upd(working)
        finally:
            working.wipe()
        return tags

    context = inst.window_context(keys)
    for offset, c in enumerate(sealed.ciphertexts):
        if len(c) > config.max_msg_len:
            return None
        mac = inst.derive_mac(keys, sealed.start_index + offset)
        try:
            tags.append(inst.tag(c, mac, context))
        finally:
            primitives.zeroize(mac)
    return tags


def aggregate_for(state: EngineState, sealed: SealedBatch) -> Optional[AggregateTag]:
    """Aggregate tag the keys in `state` give the batch's ciphertexts, or None
    if a ciphertext is malformed. Does not touch the key chain."""
    tags = _window_tags(state, sealed)
    if tags is None:
        return None
    agg = agg_init(state.config.b_agg)
    for tag in tags:
        agg = agg_fold(agg, tag)
    return agg_final(agg, sealed.start_index, sealed.count)


def aver(state: EngineState, sealed: SealedBatch) -> bool:
    """Aggregate verification by recomputing and folding every tag."""
    config = state.config
    if sealed.start_index != state.keys.index:
        raise SyncError(state.keys.index, sealed.start_index)
    aggregate = sealed.aggregate
    if (sealed.instantiation != config.instantiation
            or sealed.count != config.n
            or aggregate.count != config.n
            or aggregate.start_index != sealed.start_index
            or aggregate.mode != config.b_agg):
        logger.warning(f"Rejected window at {sealed.start_index}: shape does not match the configured window")
        return False
    expected = aggregate_for(state, sealed)
    if expected is None:
        logger.warning(f"Rejected window at {sealed.start_index}: malformed ciphertext")
        return False
    ok = primitives.ct_equal(expected.tag, aggregate.tag)
    if not ok:
        logger.warning(f"Rejected window at {sealed.start_index}: aggregate tag mismatch")
    return ok


def verdec(state: EngineState, sealed: SealedBatch) -> Batch:
    """Verify the aggregate, then decrypt every item and advance the verifier.

    Nothing is decrypted unless the whole window verifies.
    """
    if not aver(state, sealed):
        raise VerificationError(sealed.start_index)
    inst, keys = state.instantiation, state.keys
    plaintexts = []
    if isinstance(inst, StandardFAAE):
        working = keys.copy()
        try:
            for c in sealed.ciphertexts:
                try:
                    plaintexts.append(inst.open_one(working, c))
                except GrapheneError:
                    raise VerificationError(sealed.start_index) from None
                keychain.upd(working)
        finally:
            working.wipe()
    else:
        for offset, c in enumerate(sealed.ciphertexts):
            stream = inst.derive_stream(keys, sealed.start_index + offset)
            try:
                plaintexts.append(inst.decrypt(c, stream))
            finally:
                primitives.zeroize(stream)
    keychain.advance(keys, state.config.n)
    logger.info(f"Verified and decrypted window [{sealed.start_index}, {sealed.start_index + sealed.count})")
    return Batch(plaintexts, sealed.start_index)


def snapshot_for_breach(state: EngineState) -> bytes:
    """Everything an attacker who compromises the sender right now would hold."""
    if not (state.breach_simulation and snapshot_allowed()):
        logger.warning("Refused sender snapshot: breach simulation is not enabled")
        raise ForbiddenError("snapshots need breach simulation and GRAPHENE_ALLOW_SNAPSHOT=1")
    key_record = keychain.export_state(state.keys, breach_simulation=True)
    out = bytearray(SNAPSHOT_MAGIC)
    out += struct.pack(">HI", len(key_record), len(state.tables))
    out += key_record
    for table in state.tables:
        record = ootable.serialize_table(table)
        out += struct.pack(">I", len(record)) + record
    return bytes(out)


def parse_snapshot(data: bytes) -> Tuple[KeyState, List[OOTable]]:
    if len(data) < 10 or data[:4] != SNAPSHOT_MAGIC:
        raise DecodeError("not a sender snapshot", position=0)
    key_len, table_count = struct.unpack_from(">HI", data, 4)
    pos = 10
    keys = KeyState.from_record(data[pos:pos + key_len])
    pos += key_len
    tables = []
    for _ in range(table_count):
        if len(data) < pos + 4:
            raise DecodeError("snapshot truncated", position=pos)
        (size,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if len(data) < pos + size:
            raise DecodeError("snapshot truncated", position=pos)
        tables.append(ootable.deserialize_table(data[pos:pos + size]))
        pos += size
    return keys, tables

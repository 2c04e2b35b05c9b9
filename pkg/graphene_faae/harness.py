"""
Drivers behind the command line: the store-and-forward pipeline, the
benchmark matrix and the key-compromise simulation.
"""

import csv
import io
import logging
import queue
import random
import statistics
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from . import engine, keychain, ootable, primitives, wire
from .config import Instantiation, InstantiationConfig
from .engine import Batch, EngineState, SealedBatch
from .aggregator import AggregateTag
from .exceptions import GrapheneError, UsageError
from .keychain import KeyState, Role

logger = logging.getLogger(__name__)

MIN_REPETITIONS = 100
_MEAN_GROUPS = 5

# Published reference speedups; printed, never asserted.
PUBLISHED_RATIOS = [
    ("graphene_poly", "overall", "cortex-m4", 8.1),
    ("graphene_poly", "online", "cortex-m4", 28.0),
    ("graphene_ae", "amortized", "x86-64", 2.4),
    ("graphene_ae", "online", "x86-64", 4.3),
    ("graphene_ae", "amortized", "cortex-m4", 2.55),
    ("graphene_ae", "online", "cortex-m4", 3.5),
]


# --- pipeline ----------------------------------------------------------------

@dataclass(frozen=True)
class Tamper:
    """Flip one bit of one window's wire bytes in transit."""
    window: int
    byte: int
    bit: int

    @classmethod
    def parse(cls, text: str) -> "Tamper":
        try:
            window, byte, bit = (int(part) for part in text.split(":"))
        except ValueError:
            raise UsageError(f"tamper must be window:byte:bit, got {text!r}") from None
        if window < 0 or byte < 0 or not 0 <= bit < 8:
            raise UsageError(f"tamper out of range: {text!r}")
        return cls(window, byte, bit)

    def apply(self, data: bytes) -> bytes:
        if self.byte >= len(data):
            raise UsageError(f"tamper byte {self.byte} beyond a {len(data)}-byte window")
        out = bytearray(data)
        out[self.byte] ^= 1 << self.bit
        return bytes(out)


@dataclass
class PipelineResult:
    windows: int
    failed_windows: List[int] = field(default_factory=list)
    plaintexts: List[bytes] = field(default_factory=list)
    wire_bytes: int = 0
    pending_tables: List[ootable.OOTable] = field(default_factory=list, compare=False, repr=False)

    @property
    def ok(self) -> bool:
        return not self.failed_windows


_DONE = object()


def _check_tables(config: InstantiationConfig, sender_keys: KeyState, tables: Sequence[ootable.OOTable]) -> None:
    """Stored tables must be consecutive windows ending where the sender chain stands."""
    if not tables:
        return
    if not config.oo:
        raise UsageError(f"{config.instantiation.label} without offline-online cannot use stored tables")
    start = tables[0].start_index
    for k, table in enumerate(tables):
        if (not table.covers(start + k * config.n, config.n)
                or table.instantiation is not config.instantiation
                or table.max_msg_len != config.max_msg_len):
            raise UsageError(f"stored table at index {table.start_index} does not fit the configured windows")
    if start + len(tables) * config.n != sender_keys.index:
        raise UsageError(f"stored tables end at {start + len(tables) * config.n}, "
                         f"sender chain is at {sender_keys.index}")


def run_pipeline(
    config: InstantiationConfig,
    sender_keys: KeyState,
    verifier_keys: KeyState,
    messages: Sequence[bytes],
    tamper: Optional[Tamper] = None,
    tables: Sequence[ootable.OOTable] = (),
) -> PipelineResult:
    """precompute -> seal -> encode -> decode -> verdec, one window at a time.

    Sender and verifier are separate state machines on separate threads,
    connected by a queue of encoded windows. Tables precomputed earlier are
    used first; later windows are precomputed on the fly.
    """
    if len(messages) % config.n:
        raise UsageError(f"{len(messages)} messages do not split into windows of {config.n}")
    _check_tables(config, sender_keys, tables)
    windows = len(messages) // config.n
    sender = EngineState(config, sender_keys, deque(tables))
    verifier = EngineState(config, verifier_keys)
    channel: "queue.Queue" = queue.Queue(maxsize=4)
    sender_error: List[BaseException] = []

    def _sender_worker():
        try:
            for w in range(windows):
                if config.oo and sender.table is None:
                    engine.precompute_window(sender)
                batch = Batch(list(messages[w * config.n:(w + 1) * config.n]))
                data = wire.encode_batch(engine.seal(sender, batch))
                if tamper is not None and tamper.window == w:
                    data = tamper.apply(data)
                channel.put((w, data))
        except BaseException as e:
            sender_error.append(e)
        finally:
            channel.put(_DONE)

    thread = threading.Thread(target=_sender_worker, name="graphene-sender", daemon=True)
    thread.start()

    result = PipelineResult(windows)
    while True:
        item = channel.get()
        if item is _DONE:
            break
        w, data = item
        result.wire_bytes += len(data)
        if result.failed_windows:
            # the verifier cannot resynchronize past a lost window; keep draining
            continue
        try:
            opened = engine.verdec(verifier, wire.decode_batch(data))
        except GrapheneError as e:
            logger.warning(f"Window {w} rejected: {e}")
            result.failed_windows.append(w)
            continue
        if opened.items != list(messages[w * config.n:(w + 1) * config.n]):
            result.failed_windows.append(w)
            continue
        result.plaintexts.extend(opened.items)
    thread.join()
    result.pending_tables = list(sender.tables)
    if sender_error:
        raise sender_error[0]
    logger.info(f"Pipeline finished: {windows - len(result.failed_windows)}/{windows} windows verified")
    return result


# --- benchmark -----------------------------------------------------------------

@dataclass
class BenchRecord:
    instantiation: str
    phase: str
    msg_len: int
    n: int
    ns_per_op: float
    table_bytes: int
    ratio_vs_std: Optional[float] = None


PHASES = ("offline", "online_encmac", "online_verify", "amortized")
CSV_COLUMNS = ["instantiation", "phase", "msg_len", "n", "ns_per_op", "table_bytes", "ratio_vs_std"]


def median_of_means(samples: Sequence[float], groups: int = _MEAN_GROUPS) -> float:
    groups = max(1, min(groups, len(samples)))
    size = len(samples) // groups
    means = [statistics.fmean(samples[g * size:(g + 1) * size]) for g in range(groups)]
    return statistics.median(means)


def _bench_cell(
    config: InstantiationConfig, repetitions: int, rng: random.Random,
    clock: Callable[[], int],
) -> Dict[str, float]:
    samples: Dict[str, List[float]] = {phase: [] for phase in PHASES}
    for rep in range(repetitions + 1):
        seed = rng.randbytes(32)
        sender = EngineState(config, keychain.kg(config, seed=seed))
        verifier = EngineState(config, keychain.kg(config, seed=seed))
        batch = Batch([rng.randbytes(config.max_msg_len) for _ in range(config.n)])

        t0 = clock()
        if config.oo:
            engine.precompute_window(sender)
        t1 = clock()
        sealed = engine.seal(sender, batch)
        t2 = clock()
        engine.verdec(verifier, sealed)
        t3 = clock()
        if rep == 0:
            continue  # warm-up
        offline, online = (t1 - t0) / config.n, (t2 - t1) / config.n
        samples["offline"].append(offline)
        samples["online_encmac"].append(online)
        samples["online_verify"].append((t3 - t2) / config.n)
        samples["amortized"].append(offline + online)
    return {phase: median_of_means(values) for phase, values in samples.items()}


def run_bench(
    msg_lens: Iterable[int],
    batch_sizes: Iterable[int],
    instantiations: Iterable[Instantiation],
    repetitions: int = MIN_REPETITIONS,
    seed: int = 0,
    clock: Callable[[], int] = time.perf_counter_ns,
) -> List[BenchRecord]:
    """Time offline/online/verify per message for every grid cell."""
    if repetitions < MIN_REPETITIONS:
        raise UsageError(f"at least {MIN_REPETITIONS} repetitions are required, got {repetitions}")
    rng = random.Random(seed)
    records: List[BenchRecord] = []
    instantiations = list(instantiations)
    for msg_len in msg_lens:
        for n in batch_sizes:
            cell: Dict[Instantiation, Dict[str, float]] = {}
            tables: Dict[Instantiation, int] = {}
            for inst in instantiations:
                config = InstantiationConfig.preset(inst, n=n, max_msg_len=msg_len)
                cell[inst] = _bench_cell(config, repetitions, rng, clock)
                tables[inst] = ootable.expected_table_bytes(config) if config.oo else 0
                logger.info(f"Bench {inst.label} |m|={msg_len} n={n}: "
                            f"online {cell[inst]['online_encmac']:.0f} ns/msg")
            std = cell.get(Instantiation.STD_FAAE)
            for inst in instantiations:
                for phase in PHASES:
                    value = cell[inst][phase]
                    if inst is Instantiation.STD_FAAE and phase == "offline":
                        continue
                    ratio = None
                    if std is not None and inst is not Instantiation.STD_FAAE and phase != "offline":
                        baseline = std["online_encmac"] if phase == "amortized" else std[phase]
                        ratio = baseline / value if value > 0 else None
                    records.append(BenchRecord(inst.label, phase, msg_len, n, value, tables[inst], ratio))
    return records


def bench_csv(records: Sequence[BenchRecord]) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for record in records:
        row = asdict(record)
        row["ns_per_op"] = f"{record.ns_per_op:.1f}"
        row["ratio_vs_std"] = "" if record.ratio_vs_std is None else f"{record.ratio_vs_std:.2f}"
        writer.writerow(row)
    return out.getvalue()


def bench_markdown(records: Sequence[BenchRecord]) -> str:
    lines = [
        "| instantiation | phase | msg_len | n | ns/op | table bytes | vs std |",
        "|---|---|---:|---:|---:|---:|---:|",
    ]
    for r in records:
        ratio = "" if r.ratio_vs_std is None else f"{r.ratio_vs_std:.2f}x"
        lines.append(f"| {r.instantiation} | {r.phase} | {r.msg_len} | {r.n} | "
                     f"{r.ns_per_op:.0f} | {r.table_bytes} | {ratio} |")
    lines.append("")
    lines.append("Reference ratios from the original measurements (platform bound, not asserted):")
    lines.append("")
    for inst, phase, platform, ratio in PUBLISHED_RATIOS:
        lines.append(f"- {inst} {phase} on {platform}: {ratio}x vs std_faae")
    return "\n".join(lines) + "\n"


def analytical_costs(config: InstantiationConfig, ciphertext_len: int) -> Dict[str, int]:
    """Storage and transmission overhead in bytes from the closed forms."""
    k, n, c = config.key_bytes, config.n, ciphertext_len
    if config.instantiation is Instantiation.STD_FAAE:
        return {"storage": 2 * k, "transmission": n * c + 2 * k}
    if config.instantiation is Instantiation.GRAPHENE_AE:
        return {"storage": k + n * c, "transmission": n * c + k}
    return {"storage": 2 * k + n * (k + c), "transmission": n * c + k}


# --- breach simulation --------------------------------------------------------

@dataclass
class BreachReport:
    compromise_index: int
    n: int
    instantiation: str
    snapshot_keys: int = 0
    snapshot_tables: int = 0
    decryption_attempts: int = 0
    decryption_successes: int = 0
    forgery_attempts: int = 0
    forgery_successes: int = 0
    leaked_prior_material: int = 0

    @property
    def passed(self) -> bool:
        return (self.decryption_successes == 0 and self.forgery_successes == 0
                and self.leaked_prior_material == 0)


def _candidate_keys(keys: KeyState, tables: List[ootable.OOTable], horizon: int) -> List[bytes]:
    """Every AES key an attacker can compute from a snapshot: the chain keys,
    their forward images and any key material left in tables."""
    width = keys.kappa // 8
    candidates = []
    for chain in (bytes(keys.sk), bytes(keys.sk_prime)):
        for _ in range(horizon + 1):
            candidates.append(chain)
            chain = primitives.hash(chain)[:width]
    for table in tables:
        for entry in table.mac_entries:
            if entry is not None:
                candidates.append(bytes(entry[:16]))
    return candidates


def _try_decrypt(config: InstantiationConfig, key: bytes, j: int, c: bytes) -> List[bytes]:
    """Plaintext guesses for c_j under one candidate key."""
    if len(key) not in (16, 32):
        return []
    if config.instantiation is Instantiation.STD_FAAE:
        try:
            return [primitives.cbc_decrypt(key, primitives.prf_block(key, 0), c)]
        except GrapheneError:
            return []
    s_j = primitives.prf_block(key, j)
    j0 = primitives.gcm_j0(primitives.gcm_nonce(j))
    return [
        primitives.xor_bytes(c, primitives.keystream(s_j, len(c), counter))
        for counter in (primitives.ZERO_BLOCK, primitives.gcm_counter(j0))
    ]


def _verify_rejects(config: InstantiationConfig, verifier_keys: KeyState, sealed: SealedBatch) -> bool:
    state = EngineState(config, verifier_keys.copy())
    try:
        engine.verdec(state, sealed)
    except GrapheneError:
        return True
    return False


def _forgeries(config: InstantiationConfig, sealed: SealedBatch,
               snapshot_keys: List[bytes]) -> List[SealedBatch]:
    start, inst = sealed.start_index, sealed.instantiation
    c = list(sealed.ciphertexts)
    agg = sealed.aggregate
    out = []
    flipped = list(c)
    flipped[0] = bytes([flipped[0][0] ^ 1]) + flipped[0][1:]
    out.append(SealedBatch(inst, start, flipped, agg))
    # drop the last item and re-label the aggregate window
    truncated = AggregateTag(agg.mode, agg.tag, start, len(c) - 1)
    out.append(SealedBatch(inst, start, c[:-1], truncated))
    if len(c) >= 2 and c[0] != c[1]:
        out.append(SealedBatch(inst, start, [c[1], c[0]] + c[2:], agg))
    # re-tag the modified window with every key the snapshot yields
    candidate = SealedBatch(inst, start, flipped, agg)
    for key in snapshot_keys:
        if len(key) != config.key_bytes:
            continue
        attacker = EngineState(config, KeyState(config.kappa, start, key, key))
        forged = engine.aggregate_for(attacker, candidate)
        if forged is not None:
            out.append(SealedBatch(inst, start, flipped, forged))
    return out


def run_breach(
    j_prime: int,
    n: int,
    instantiation: Instantiation = Instantiation.GRAPHENE_POLY,
    max_msg_len: int = 16,
    seed: int = 0,
) -> BreachReport:
    """Seal every index below j', compromise the sender, then attack the past."""
    if j_prime < 1:
        raise UsageError("the compromise index must be at least 1")
    config = InstantiationConfig.preset(instantiation, n=n, max_msg_len=max_msg_len)
    rng = random.Random(seed)
    root = keychain.kg(config, seed=rng.randbytes(32))
    reference = root.copy()
    sender = EngineState(config, root, breach_simulation=True)
    report = BreachReport(j_prime, n, instantiation.label)

    prior: List[Tuple[int, bytes, bytes]] = []
    finished: List[Tuple[SealedBatch, KeyState]] = []
    verifier_at_window = reference.copy()
    sealer: Optional[engine.WindowSealer] = None
    for j in range(1, j_prime):
        if sealer is None:
            if config.oo:
                engine.precompute_window(sender)
            sealer = engine.WindowSealer(sender)
        m = rng.randbytes(max_msg_len)
        prior.append((j, sealer.push(m), m))
        if sealer.position == n:
            finished.append((sealer.finish(), verifier_at_window.copy()))
            keychain.advance(verifier_at_window, n)
            sealer = None

    keys, tables = engine.parse_snapshot(engine.snapshot_for_breach(sender))
    candidates = _candidate_keys(keys, tables, horizon=n)
    streams = [bytes(e) for t in tables for e in t.enc_entries if e is not None]
    report.snapshot_keys = len(candidates) + len(streams)
    report.snapshot_tables = len(tables)

    # (a) decrypt every earlier ciphertext with everything recoverable
    for j, c, m in prior:
        guesses = [g for key in candidates for g in _try_decrypt(config, key, j, c)]
        guesses += [primitives.xor_bytes(c, s) for s in streams if len(s) >= len(c)]
        report.decryption_attempts += len(guesses)
        report.decryption_successes += sum(1 for g in guesses if g == m)

    # the snapshot must not contain any earlier one-time key or keystream
    snapshot = engine.snapshot_for_breach(sender)
    truth = reference.copy()
    for j, _, _ in prior:
        if config.instantiation is Instantiation.STD_FAAE:
            secrets = [bytes(truth.sk), bytes(truth.sk_prime)]
            keychain.upd(truth)
        else:
            window_start = ((j - 1) // n) * n + 1
            while truth.index < window_start:
                keychain.upd(truth)
            secrets = [keychain.derive_intra(truth, j, Role.ENC, 16, n)]
            if config.instantiation is Instantiation.GRAPHENE_POLY:
                secrets.append(keychain.derive_intra(truth, j, Role.MAC, 16, n))
        report.leaked_prior_material += sum(1 for s in secrets if s in snapshot)
    truth.wipe()

    # (b) forge modified earlier windows
    for sealed, verifier_keys in finished:
        for forged in _forgeries(config, sealed, candidates):
            report.forgery_attempts += 1
            if not _verify_rejects(config, verifier_keys, forged):
                report.forgery_successes += 1

    logger.info(f"Breach at j'={j_prime}: {report.decryption_attempts} decryption and "
                f"{report.forgery_attempts} forgery attempts, passed={report.passed}")
    return report

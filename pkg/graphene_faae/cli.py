"""
Command surface: keygen, precompute, pipeline, bench and breach.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import harness, keychain, ootable
from .config import AggMode, Instantiation, InstantiationConfig, snapshot_allowed
from .exceptions import GrapheneError, InvalidConfigError, UsageError
from .storage import KeyStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

DEFAULT_GRID = "16,32,128,256:1024:std,ae,poly"


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns exit codes."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="graphene", description="Forward-secure aggregate authenticated encryption")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--home", type=Path, help="key store directory")
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    sub.required = True

    keygen = sub.add_parser("keygen", help="generate the pre-shared root key")
    keygen.add_argument("--inst", default="poly", help="std, ae or poly")
    keygen.add_argument("--n", type=int, default=1024, help="window size")
    keygen.add_argument("--kappa", type=int, default=128, choices=(128, 256))
    keygen.add_argument("--agg", help="hash, xor or add_q (default per instantiation)")
    keygen.add_argument("--max-len", type=int, default=16, help="largest message in bytes")
    keygen.add_argument("--direct", action="store_true", help="disable offline precompute")
    keygen.add_argument("--per-index-r", action="store_true", help="fresh Poly1305 r per index")
    keygen.add_argument("--seed", help="deterministic seed (tests only)")

    precompute = sub.add_parser("precompute", help="run the offline phase for upcoming windows and store the tables")
    precompute.add_argument("--windows", type=int, default=1, help="number of windows to precompute")

    pipeline = sub.add_parser("pipeline", help="seal, transmit and verify a message file")
    pipeline.add_argument("--inst", help="override the stored instantiation (needs --seed)")
    pipeline.add_argument("--n", type=int, help="override the stored window size (needs --seed)")
    pipeline.add_argument("--in", dest="input", type=Path, required=True, help="one message per line")
    pipeline.add_argument("--out", type=Path, help="write verified plaintexts here")
    pipeline.add_argument("--hex", action="store_true", help="input lines are hex encoded")
    pipeline.add_argument("--seed", help="use fresh seeded keys instead of the key store")
    pipeline.add_argument("--max-len", type=int, default=16)
    pipeline.add_argument("--tamper", help="flip a bit in transit: window:byte:bit")

    bench = sub.add_parser("bench", help="timing matrix")
    bench.add_argument("--grid", default=DEFAULT_GRID, help="MSG_LENS:NS:INSTS, comma separated")
    bench.add_argument("--reps", type=int, default=harness.MIN_REPETITIONS)
    bench.add_argument("--csv", type=Path, help="write records as CSV")
    bench.add_argument("--seed", type=int, default=0)

    breach = sub.add_parser("breach", help="compromise the sender at index j and attack the past")
    breach.add_argument("--j", type=int, required=True, help="compromise index")
    breach.add_argument("--n", type=int, default=8)
    breach.add_argument("--inst", default="poly")
    breach.add_argument("--seed", type=int, default=0)
    return parser


def _config_from_args(args, inst: str, n: int) -> InstantiationConfig:
    instantiation = Instantiation.parse(inst)
    agg = AggMode.parse(args.agg) if getattr(args, "agg", None) else None
    oo = False if getattr(args, "direct", False) else None
    config = InstantiationConfig.preset(
        instantiation, n=n, kappa=getattr(args, "kappa", 128),
        max_msg_len=args.max_len, agg=agg, oo=oo,
    )
    if getattr(args, "per_index_r", False):
        config = replace(config, poly_per_index_r=True)
    return config


def cmd_keygen(args) -> int:
    config = _config_from_args(args, args.inst, args.n)
    seed = args.seed.encode() if args.seed is not None else None
    sender = keychain.kg(config, seed=seed)
    verifier = sender.copy()
    store = KeyStore(args.home)
    store.save_keys(sender, verifier, config)
    sender.wipe()
    verifier.wipe()
    print(f"wrote {store.key_path('sender')} and {store.key_path('verifier')}")
    return EXIT_OK


def read_messages(path: Path, hex_lines: bool) -> List[bytes]:
    with path.open("rb") as f:
        lines = f.read().splitlines()
    if hex_lines:
        try:
            return [bytes.fromhex(line.decode("ascii")) for line in lines]
        except ValueError as e:
            raise UsageError(f"{path}: not hex: {e}") from None
    return lines


def _pipeline_keys(args, store: Optional[KeyStore]) -> Tuple[InstantiationConfig, keychain.KeyState, keychain.KeyState]:
    if args.seed is not None:
        if not args.inst or not args.n:
            raise UsageError("--seed needs --inst and --n")
        config = _config_from_args(args, args.inst, args.n)
        sender = keychain.kg(config, seed=args.seed.encode())
        return config, sender, sender.copy()
    config = store.load_config()
    if args.inst and Instantiation.parse(args.inst) is not config.instantiation:
        raise UsageError(f"key store holds {config.instantiation.label} keys")
    if args.n and args.n != config.n:
        raise UsageError(f"key store window size is {config.n}")
    return config, store.load_key("sender"), store.load_key("verifier")


def cmd_precompute(args) -> int:
    if args.windows < 1:
        raise UsageError(f"--windows must be at least 1, got {args.windows}")
    store = KeyStore(args.home)
    config = store.load_config()
    if not config.oo:
        raise UsageError(f"{config.instantiation.label} keys were generated without an offline phase")
    sender = store.load_key("sender")
    first, total = sender.index, 0
    for _ in range(args.windows):
        sender, table = ootable.precompute(sender, config)
        store.save_table(table)
        total += ootable.table_bytes(table)
    store.save_key("sender", sender)
    print(f"precomputed {args.windows} windows from index {first}, {total} table bytes")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    store = None if args.seed is not None else KeyStore(args.home)
    config, sender, verifier = _pipeline_keys(args, store)
    messages = read_messages(args.input, args.hex)
    tamper = harness.Tamper.parse(args.tamper) if args.tamper else None
    stored = store.load_tables() if store is not None else []
    try:
        result = harness.run_pipeline(config, sender, verifier, messages, tamper, stored)
    finally:
        if store is not None:
            # both chains have moved past the windows processed
            store.save_key("sender", sender)
            store.save_key("verifier", verifier)
            store.sync_tables(stored)
    if args.out is not None:
        with args.out.open("wb") as f:
            for m in result.plaintexts:
                f.write((m.hex().encode("ascii") if args.hex else m) + b"\n")
    if not result.ok:
        print(f"verification failed at window {result.failed_windows[0]}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"{result.windows} windows verified, {result.wire_bytes} bytes on the wire")
    return EXIT_OK


def parse_grid(text: str) -> Tuple[List[int], List[int], List[Instantiation]]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"grid must be MSG_LENS:NS[:INSTS], got {text!r}")
    try:
        lens = [int(v) for v in parts[0].split(",")]
        ns = [int(v) for v in parts[1].split(",")]
    except ValueError:
        raise UsageError(f"grid sizes must be integers: {text!r}") from None
    insts = [Instantiation.parse(v) for v in parts[2].split(",")] if len(parts) == 3 else list(Instantiation)
    return lens, ns, insts


def cmd_bench(args) -> int:
    lens, ns, insts = parse_grid(args.grid)
    records = harness.run_bench(lens, ns, insts, repetitions=args.reps, seed=args.seed)
    if args.csv is not None:
        args.csv.write_text(harness.bench_csv(records))
        logger.info(f"Wrote {len(records)} bench records to {args.csv}")
    print(harness.bench_markdown(records))
    print("| instantiation | msg_len | n | storage (model) | table bytes | transmission (model) |")
    print("|---|---:|---:|---:|---:|---:|")
    for msg_len in lens:
        for n in ns:
            for inst in insts:
                config = InstantiationConfig.preset(inst, n=n, max_msg_len=msg_len)
                model = harness.analytical_costs(config, msg_len)
                measured = next(r.table_bytes for r in records
                                if r.instantiation == inst.label and r.msg_len == msg_len and r.n == n)
                print(f"| {inst.label} | {msg_len} | {n} | {model['storage']} | {measured} | {model['transmission']} |")
    return EXIT_OK


def cmd_breach(args) -> int:
    if not snapshot_allowed():
        raise UsageError("breach simulation needs GRAPHENE_ALLOW_SNAPSHOT=1")
    report = harness.run_breach(args.j, args.n, Instantiation.parse(args.inst), seed=args.seed)
    print(f"compromise at j'={report.compromise_index} (n={report.n}, {report.instantiation})")
    print(f"  snapshot: {report.snapshot_keys} candidate keys, {report.snapshot_tables} tables")
    print(f"  decryption attempts: {report.decryption_attempts}, successes: {report.decryption_successes}")
    print(f"  forgery attempts: {report.forgery_attempts}, successes: {report.forgery_successes}")
    print(f"  earlier secrets found in snapshot: {report.leaked_prior_material}")
    return EXIT_OK if report.passed else EXIT_FAILURE


COMMANDS = {
    "keygen": cmd_keygen,
    "precompute": cmd_precompute,
    "pipeline": cmd_pipeline,
    "bench": cmd_bench,
    "breach": cmd_breach,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse and dispatch; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        return COMMANDS[args.command](args)
    except (UsageError, InvalidConfigError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except GrapheneError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as e:
        logger.error(f"I/O failure: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE

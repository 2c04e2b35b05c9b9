import os
import random
import unittest
from unittest.mock import patch

from graphene_faae import engine, keychain, primitives
from graphene_faae.aggregator import AggregateTag
from graphene_faae.config import ENV_ALLOW_SNAPSHOT, AggMode, Instantiation, InstantiationConfig
from graphene_faae.engine import Batch, EngineState, SealedBatch, WindowSealer
from graphene_faae.exceptions import (
    ForbiddenError,
    OutOfWindowError,
    OversizeError,
    ReuseError,
    SyncError,
    VerificationError,
    WindowMismatchError,
)
from graphene_faae.instantiations import OfflineOnlineInstantiation

SLOW = bool(os.environ.get("GRAPHENE_SLOW"))
ALL_INSTANTIATIONS = (Instantiation.STD_FAAE, Instantiation.GRAPHENE_AE, Instantiation.GRAPHENE_POLY)


def make_pair(config, seed=b"engine"):
    """Sender and verifier sharing one root key."""
    root = keychain.kg(config, seed=seed)
    return EngineState(config, root.copy()), EngineState(config, root)


def seal_window(sender, messages):
    if sender.config.oo:
        engine.precompute_window(sender)
    return engine.seal(sender, Batch(list(messages)))


def flip(data: bytes, bit: int) -> bytes:
    out = bytearray(data)
    out[bit // 8] ^= 1 << (bit % 8)
    return bytes(out)


class TestRoundTrip(unittest.TestCase):
    def _round_trip(self, config, rng):
        sender, verifier = make_pair(config, seed=rng.randbytes(16))
        messages = [rng.randbytes(rng.randint(0, config.max_msg_len)) for _ in range(config.n)]
        sealed = seal_window(sender, messages)
        self.assertEqual(sealed.count, config.n)
        self.assertEqual(engine.verdec(verifier, sealed).items, messages)
        self.assertEqual(verifier.keys.index, 1 + config.n)
        self.assertEqual(sender.window_start, verifier.keys.index)

    def test_round_trip_grid(self):
        """Test verdec(seal(m)) == m for every instantiation, window and length."""
        rng = random.Random(1)
        batch_sizes = (1, 16, 1024) if SLOW else (1, 16)
        for inst in ALL_INSTANTIATIONS:
            for n in batch_sizes:
                for length in (16, 32, 128, 256):
                    with self.subTest(inst=inst.label, n=n, length=length):
                        self._round_trip(InstantiationConfig.preset(inst, n=n, max_msg_len=length), rng)

    @unittest.skipUnless(SLOW, "set GRAPHENE_SLOW=1 for the randomized trial sweep")
    def test_randomized_trials(self):
        """Test 1,000 randomized round trips."""
        rng = random.Random(2)
        for _ in range(1000):
            inst = rng.choice(ALL_INSTANTIATIONS)
            config = InstantiationConfig.preset(inst, n=rng.choice((1, 16)), max_msg_len=rng.choice((16, 32, 128, 256)))
            self._round_trip(config, rng)

    def test_every_aggregation_mode(self):
        """Test each instantiation with each aggregation mode."""
        rng = random.Random(3)
        for inst in ALL_INSTANTIATIONS:
            for mode in AggMode:
                with self.subTest(inst=inst.label, mode=mode.name):
                    self._round_trip(InstantiationConfig.preset(inst, n=5, agg=mode), rng)

    def test_direct_paths(self):
        """Test Graphene instantiations with the offline phase switched off."""
        rng = random.Random(4)
        for inst in (Instantiation.GRAPHENE_AE, Instantiation.GRAPHENE_POLY):
            with self.subTest(inst=inst.label):
                self._round_trip(InstantiationConfig.preset(inst, n=8, oo=False), rng)

    def test_kappa_256(self):
        """Test round trips with 32-byte chain keys."""
        rng = random.Random(5)
        for inst in ALL_INSTANTIATIONS:
            with self.subTest(inst=inst.label):
                self._round_trip(InstantiationConfig.preset(inst, n=4, kappa=256), rng)

    def test_consecutive_windows_stay_synchronized(self):
        """Test several windows in a row, including one precomputed ahead."""
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=4)
        sender, verifier = make_pair(config)
        engine.precompute_window(sender)
        engine.precompute_window(sender)
        self.assertEqual(len(sender.tables), 2)
        for w in range(3):
            messages = [f"w{w}m{i}".encode() for i in range(4)]
            if not sender.tables:
                engine.precompute_window(sender)
            sealed = engine.seal(sender, Batch(messages, start_index=1 + 4 * w))
            self.assertEqual(sealed.start_index, 1 + 4 * w)
            self.assertEqual(engine.verdec(verifier, sealed).items, messages)

    def test_std_window_advances_per_message(self):
        """Test that Std FAAE moves the chain one step per sealed message."""
        config = InstantiationConfig.preset(Instantiation.STD_FAAE, n=3)
        sender, _ = make_pair(config)
        engine.seal(sender, Batch([b"a", b"b", b"c"]))
        self.assertEqual(sender.keys.index, 4)


class TestOfflineDirectEquivalence(unittest.TestCase):
    def test_tables_and_direct_recomputation_agree(self):
        """Test that sealing from tables is byte-identical to sealing without them."""
        rng = random.Random(6)
        for inst in (Instantiation.GRAPHENE_AE, Instantiation.GRAPHENE_POLY):
            for n in (1, 16):
                for length in (16, 32, 128, 256):
                    config = InstantiationConfig.preset(inst, n=n, max_msg_len=length)
                    seed = rng.randbytes(16)
                    messages = [rng.randbytes(length) for _ in range(n)]
                    with_tables, _ = make_pair(config, seed)
                    direct, _ = make_pair(config.direct(), seed)
                    a = seal_window(with_tables, messages)
                    b = seal_window(direct, messages)
                    with self.subTest(inst=inst.label, n=n, length=length):
                        self.assertEqual(a.ciphertexts, b.ciphertexts)
                        self.assertEqual(a.aggregate.tag, b.aggregate.tag)
                        self.assertEqual(with_tables.keys.to_record(), direct.keys.to_record())


class TestForgeryRejection(unittest.TestCase):
    def _assert_rejected(self, verifier, forged):
        before = verifier.keys.to_record()
        with self.assertRaises((VerificationError, SyncError)):
            engine.verdec(verifier, forged)
        self.assertEqual(verifier.keys.to_record(), before)

    def test_exhaustive_bit_flips(self):
        """Test every single-bit flip of ciphertexts, aggregate and start index at n=2, |m|=4."""
        configs = [InstantiationConfig.preset(inst, n=2, max_msg_len=4) for inst in ALL_INSTANTIATIONS]
        configs += [InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=2, max_msg_len=4, agg=m)
                    for m in (AggMode.HASH, AggMode.ADD_Q)]
        for config in configs:
            sender, verifier = make_pair(config)
            sealed = seal_window(sender, [b"abcd", b"wxyz"])
            agg = sealed.aggregate
            forgeries = []
            for item in range(sealed.count):
                for bit in range(len(sealed.ciphertexts[item]) * 8):
                    cts = list(sealed.ciphertexts)
                    cts[item] = flip(cts[item], bit)
                    forgeries.append(SealedBatch(sealed.instantiation, sealed.start_index, cts, agg))
            for bit in range(len(agg.tag) * 8):
                tag = AggregateTag(agg.mode, flip(agg.tag, bit), agg.start_index, agg.count)
                forgeries.append(SealedBatch(sealed.instantiation, sealed.start_index, sealed.ciphertexts, tag))
            for bit in range(64):
                start = sealed.start_index ^ (1 << bit)
                tag = AggregateTag(agg.mode, agg.tag, start, agg.count)
                forgeries.append(SealedBatch(sealed.instantiation, start, sealed.ciphertexts, tag))
            with self.subTest(inst=config.instantiation.label, mode=config.b_agg.name):
                for forged in forgeries:
                    self._assert_rejected(verifier, forged)
                self.assertEqual(engine.verdec(verifier, sealed).items, [b"abcd", b"wxyz"])

    def test_random_flips_large_window(self):
        """Test randomized bit flips on a large Graphene-Poly window."""
        n, flips = (1024, 10000) if SLOW else (64, 200)
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=n, max_msg_len=16)
        sender, verifier = make_pair(config)
        sealed = seal_window(sender, [os.urandom(16) for _ in range(n)])
        rng = random.Random(7)
        for _ in range(flips):
            item = rng.randrange(n)
            cts = list(sealed.ciphertexts)
            cts[item] = flip(cts[item], rng.randrange(128))
            self._assert_rejected(verifier, SealedBatch(sealed.instantiation, sealed.start_index, cts, sealed.aggregate))

    def test_no_decryption_before_verification(self):
        """Test that a rejected window never reaches the decryption step."""
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_AE, n=2)
        sender, verifier = make_pair(config)
        sealed = seal_window(sender, [b"one", b"two"])
        forged = SealedBatch(sealed.instantiation, sealed.start_index,
                             [flip(sealed.ciphertexts[0], 0), sealed.ciphertexts[1]], sealed.aggregate)
        with patch.object(OfflineOnlineInstantiation, "decrypt") as decrypt, \
                patch.object(type(verifier.instantiation), "derive_stream") as derive_stream:
            with self.assertRaises(VerificationError) as ctx:
                engine.verdec(verifier, forged)
        decrypt.assert_not_called()
        derive_stream.assert_not_called()
        self.assertEqual(ctx.exception.start_index, 1)

    def test_std_malformed_ciphertext(self):
        """Test that a non-block-multiple Std ciphertext is rejected, not raised through."""
        config = InstantiationConfig.preset(Instantiation.STD_FAAE, n=1)
        sender, verifier = make_pair(config)
        sealed = seal_window(sender, [b"x"])
        forged = SealedBatch(sealed.instantiation, 1, [sealed.ciphertexts[0][:-1]], sealed.aggregate)
        self._assert_rejected(verifier, forged)

    def test_oversize_ciphertext_rejected(self):
        """Test that a ciphertext longer than max_msg_len fails verification."""
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=1, max_msg_len=4)
        sender, verifier = make_pair(config)
        sealed = seal_window(sender, [b"abcd"])
        forged = SealedBatch(sealed.instantiation, 1, [sealed.ciphertexts[0] + b"\x00"], sealed.aggregate)
        self._assert_rejected(verifier, forged)

    def test_replay_is_a_sync_error(self):
        """Test that a verified window cannot be verified again."""
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=2)
        sender, verifier = make_pair(config)
        sealed = seal_window(sender, [b"a", b"b"])
        engine.verdec(verifier, sealed)
        with self.assertRaises(SyncError) as ctx:
            engine.verdec(verifier, sealed)
        self.assertEqual((ctx.exception.expected, ctx.exception.actual), (3, 1))


class TestMixAndMatch(unittest.TestCase):
    def _constructions(self, rng, config):
        sender, verifier = make_pair(config, seed=rng.randbytes(16))
        first = seal_window(sender, [rng.randbytes(8) for _ in range(config.n)])
        second = seal_window(sender, [rng.randbytes(8) for _ in range(config.n)])
        n, agg = config.n, first.aggregate
        inst, start = first.instantiation, first.start_index
        truncated = SealedBatch(inst, start, first.ciphertexts[:-1],
                                AggregateTag(agg.mode, agg.tag, start, n - 1))
        order = list(range(n))
        while order == list(range(n)):
            rng.shuffle(order)
        reordered = SealedBatch(inst, start, [first.ciphertexts[i] for i in order], agg)
        slot = rng.randrange(n)
        spliced_cts = list(first.ciphertexts)
        spliced_cts[slot] = second.ciphertexts[slot]
        spliced = SealedBatch(inst, start, spliced_cts, agg)
        return verifier, [truncated, reordered, spliced]

    def test_truncation_reorder_and_splice(self):
        """Test that n-1 truncation, reordering and splicing are rejected in every mode."""
        rng = random.Random(8)
        trials = 1000 if SLOW else 30
        for trial in range(trials):
            inst = ALL_INSTANTIATIONS[trial % 3]
            mode = list(AggMode)[(trial // 3) % 3]
            config = InstantiationConfig.preset(inst, n=rng.choice((2, 3, 8)), agg=mode)
            verifier, forgeries = self._constructions(rng, config)
            for forged in forgeries:
                with self.subTest(trial=trial, inst=inst.label, mode=mode.name):
                    with self.assertRaises(VerificationError):
                        engine.verdec(verifier, forged)


class TestFixedShapeForgeries(unittest.TestCase):
    SEEDS = 200

    def _count_accepted(self, config):
        """Swap the two ciphertexts of a window, and splice one in from the next window."""
        accepted = rejected = 0
        for seed in range(self.SEEDS):
            sender, verifier = make_pair(config, seed=b"shape-%d" % seed)
            first = seal_window(sender, [b"first-%d" % seed, b"second-%d" % seed])
            second = seal_window(sender, [b"third-%d" % seed, b"fourth-%d" % seed])
            inst, start, agg = first.instantiation, first.start_index, first.aggregate
            swapped = SealedBatch(inst, start, first.ciphertexts[::-1], agg)
            spliced = SealedBatch(inst, start, [second.ciphertexts[0], first.ciphertexts[1]], agg)
            for forged in (swapped, spliced):
                try:
                    engine.verdec(verifier, forged)
                except VerificationError:
                    rejected += 1
                else:
                    accepted += 1
            self.assertEqual(engine.verdec(verifier, first).items, [b"first-%d" % seed, b"second-%d" % seed])
            self.assertEqual(engine.verdec(verifier, second).count, 2)
        return accepted, rejected

    def test_swap_and_splice_every_mode(self):
        """Test that no seed lets a swapped or spliced n=2 window verify."""
        for inst in ALL_INSTANTIATIONS:
            for mode in AggMode:
                config = InstantiationConfig.preset(inst, n=2, agg=mode)
                with self.subTest(inst=inst.label, mode=mode.name):
                    self.assertEqual(self._count_accepted(config), (0, 2 * self.SEEDS))



class TestSealErrors(unittest.TestCase):
    def setUp(self):
        """Set up a Graphene-Poly sender with n=3."""
        self.config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=3, max_msg_len=8)
        self.sender, _ = make_pair(self.config)

    def test_wrong_count(self):
        """Test that only full windows are sealed."""
        engine.precompute_window(self.sender)
        with self.assertRaises(WindowMismatchError):
            engine.seal(self.sender, Batch([b"a", b"b"]))

    def test_oversize(self):
        """Test that long messages are rejected before anything is consumed."""
        table = engine.precompute_window(self.sender)
        with self.assertRaises(OversizeError) as ctx:
            engine.seal(self.sender, Batch([b"a", b"123456789", b"c"]))
        self.assertEqual(ctx.exception.index, 2)
        self.assertIsNotNone(table.enc_entries[0])

    def test_wrong_start(self):
        """Test an explicit start index that is not the next window."""
        engine.precompute_window(self.sender)
        with self.assertRaises(OutOfWindowError):
            engine.seal(self.sender, Batch([b"a", b"b", b"c"], start_index=4))

    def test_missing_table(self):
        """Test sealing an offline-online window that was never precomputed."""
        with self.assertRaises(ReuseError):
            engine.seal(self.sender, Batch([b"a", b"b", b"c"]))


class TestWindowSealer(unittest.TestCase):
    def test_incremental_equals_batch(self):
        """Test that push/finish gives the same sealed window as seal()."""
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_AE, n=3)
        a, _ = make_pair(config)
        b, _ = make_pair(config)
        messages = [b"x", b"yy", b"zzz"]
        batch = seal_window(a, messages)
        engine.precompute_window(b)
        sealer = WindowSealer(b)
        pushed = [sealer.push(m) for m in messages]
        incremental = sealer.finish()
        self.assertEqual(pushed, batch.ciphertexts)
        self.assertEqual(incremental.aggregate, batch.aggregate)
        self.assertEqual(len(b.tables), 0)

    def test_push_past_window_and_early_finish(self):
        """Test the window size on both ends of the sealer."""
        config = InstantiationConfig.preset(Instantiation.STD_FAAE, n=2)
        sender, _ = make_pair(config)
        sealer = WindowSealer(sender)
        sealer.push(b"a")
        with self.assertRaises(WindowMismatchError):
            sealer.finish()
        sealer.push(b"b")
        with self.assertRaises(WindowMismatchError):
            sealer.push(b"c")
        self.assertEqual(sealer.next_index, 3)

    def test_sealing_wipes_taken_entries(self):
        """Test that every keystream and MAC buffer taken from the table is zero afterwards."""
        for inst in (Instantiation.GRAPHENE_AE, Instantiation.GRAPHENE_POLY):
            config = InstantiationConfig.preset(inst, n=3, max_msg_len=8)
            sender, _ = make_pair(config)
            table = engine.precompute_window(sender)
            taken = table.enc_entries + table.mac_entries
            engine.seal(sender, Batch([b"a", b"bb", b"ccc"]))
            with self.subTest(inst=inst.label):
                for entry in taken:
                    self.assertEqual(entry, bytearray(len(entry)))

    def test_shared_r_checked_once_per_window(self):
        """Test that a Graphene-Poly window builds its Poly1305 key check once, not per message."""
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=8)
        sender, verifier = make_pair(config)
        engine.precompute_window(sender)
        with patch.object(primitives, "PolyKey", wraps=primitives.PolyKey) as poly_key:
            sealed = engine.seal(sender, Batch([b"m%d" % i for i in range(8)]))
        self.assertEqual(poly_key.call_count, 1)
        self.assertEqual(engine.verdec(verifier, sealed).count, 8)


class TestBreachSnapshot(unittest.TestCase):
    def setUp(self):
        """Set up a sender in breach-simulation mode."""
        self.config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=4)
        root = keychain.kg(self.config, seed=b"snap")
        self.sender = EngineState(self.config, root, breach_simulation=True)

    def test_snapshot_needs_flag_and_environment(self):
        """Test that both opt-ins are required."""
        with patch.dict(os.environ, {ENV_ALLOW_SNAPSHOT: "0"}):
            with self.assertRaises(ForbiddenError):
                engine.snapshot_for_breach(self.sender)
        plain = EngineState(self.config, self.sender.keys.copy())
        with patch.dict(os.environ, {ENV_ALLOW_SNAPSHOT: "1"}):
            with self.assertRaises(ForbiddenError):
                engine.snapshot_for_breach(plain)

    def test_snapshot_mid_window(self):
        """Test that a mid-window snapshot holds the advanced key and the unused entries only."""
        table = engine.precompute_window(self.sender)
        first_stream = bytes(table.enc_entries[0])
        sealer = WindowSealer(self.sender)
        sealer.push(b"first")
        with patch.dict(os.environ, {ENV_ALLOW_SNAPSHOT: "1"}):
            data = engine.snapshot_for_breach(self.sender)
        keys, tables = engine.parse_snapshot(data)
        self.assertEqual(keys.index, 5)
        self.assertEqual(len(tables), 1)
        self.assertIsNone(tables[0].enc_entries[0])
        self.assertIsNotNone(tables[0].enc_entries[1])
        self.assertNotIn(first_stream, data)

    def test_snapshot_at_window_boundary(self):
        """Test that a snapshot between windows holds only the chain key."""
        engine.precompute_window(self.sender)
        engine.seal(self.sender, Batch([b"a", b"b", b"c", b"d"]))
        with patch.dict(os.environ, {ENV_ALLOW_SNAPSHOT: "1"}):
            keys, tables = engine.parse_snapshot(engine.snapshot_for_breach(self.sender))
        self.assertEqual(tables, [])
        self.assertEqual(keys.to_record(), self.sender.keys.to_record())


if __name__ == '__main__':
    unittest.main()

import unittest

from hypothesis import given, settings
from hypothesis import strategies as st

from graphene_faae import primitives
from graphene_faae.aggregator import Q, TAG_WIDTH, AggregateTag, agg_final, agg_fold, agg_init
from graphene_faae.config import AggMode
from graphene_faae.exceptions import DecodeError, InvalidArgumentError, InvalidConfigError, WindowMismatchError

tags = st.lists(st.binary(min_size=16, max_size=16), min_size=1, max_size=8)


def fold_all(mode, items):
    state = agg_init(mode)
    for tag in items:
        state = agg_fold(state, tag)
    return state


class TestAggregation(unittest.TestCase):
    def test_initial_accumulators(self):
        """Test the identity element of each mode."""
        self.assertEqual(agg_init(AggMode.HASH).acc, bytes(32))
        self.assertEqual(agg_init(AggMode.XOR).acc, bytes(16))
        self.assertEqual(agg_init(AggMode.ADD_Q).acc, bytes(17))

    def test_hash_chain(self):
        """Test that mode 1 is H(H(0^32 || t1) || t2)."""
        t1, t2 = b"\x01" * 16, b"\x02" * 32
        state = fold_all(AggMode.HASH, [t1, t2])
        self.assertEqual(state.acc, primitives.hash(primitives.hash(bytes(32) + t1) + t2))
        self.assertEqual(state.folded, 2)

    def test_hash_chain_is_order_sensitive(self):
        """Test that swapping two tags changes the hash aggregate."""
        t1, t2 = b"\x01" * 16, b"\x02" * 16
        self.assertNotEqual(fold_all(AggMode.HASH, [t1, t2]).acc, fold_all(AggMode.HASH, [t2, t1]).acc)

    @given(items=tags)
    @settings(max_examples=50, deadline=None)
    def test_xor_and_add_q_commute(self, items):
        """Test that reordering tags leaves modes 2 and 3 unchanged."""
        for mode in (AggMode.XOR, AggMode.ADD_Q):
            self.assertEqual(fold_all(mode, items).acc, fold_all(mode, list(reversed(items))).acc)

    @given(items=tags)
    @settings(max_examples=50, deadline=None)
    def test_add_q_is_modular_sum(self, items):
        """Test mode 3 against an integer sum modulo 2^130 - 5."""
        state = fold_all(AggMode.ADD_Q, items)
        expected = sum(int.from_bytes(t, "little") for t in items) % Q
        self.assertEqual(state.value, expected)
        self.assertEqual(len(state.acc), TAG_WIDTH[AggMode.ADD_Q])

    def test_add_q_wraps(self):
        """Test reduction when the sum passes q."""
        top = b"\xff" * 16
        state = fold_all(AggMode.ADD_Q, [top] * 8)
        self.assertEqual(state.value, (8 * ((1 << 128) - 1)) % Q)
        self.assertLess(state.value, Q)

    def test_xor_cancels_duplicates(self):
        """Test that XOR of a tag with itself is the identity."""
        t = b"\x5a" * 16
        self.assertEqual(fold_all(AggMode.XOR, [t, t]).acc, bytes(16))

    def test_wide_tags_truncate_in_linear_modes(self):
        """Test that 32-byte tags contribute their first 16 bytes to modes 2 and 3."""
        wide = bytes(range(32))
        self.assertEqual(fold_all(AggMode.XOR, [wide]).acc, wide[:16])
        self.assertEqual(fold_all(AggMode.ADD_Q, [wide]).value, int.from_bytes(wide[:16], "little"))

    def test_bad_inputs(self):
        """Test tag width and mode validation."""
        with self.assertRaises(InvalidArgumentError):
            agg_fold(agg_init(AggMode.XOR), bytes(17))
        with self.assertRaises(InvalidConfigError):
            agg_init(4)

    def test_final_requires_exact_count(self):
        """Test that agg_final checks the number of folded tags."""
        state = fold_all(AggMode.XOR, [bytes(16)] * 3)
        self.assertEqual(agg_final(state, 7, 3).window, (7, 3))
        with self.assertRaises(WindowMismatchError) as ctx:
            agg_final(state, 7, 4)
        self.assertEqual((ctx.exception.expected, ctx.exception.actual), (4, 3))


class TestAggregateTag(unittest.TestCase):
    def test_tag_bytes(self):
        """Test the mode/width/bytes form."""
        tag = AggregateTag(AggMode.ADD_Q, bytes(range(17)), 1, 4)
        data = tag.to_bytes()
        self.assertEqual(data[:2], b"\x03\x11")
        self.assertEqual(AggregateTag.from_bytes(data, 1, 4), tag)

    def test_bad_tag_bytes(self):
        """Test DecodeError on malformed tag records."""
        for bad in (b"", b"\x09\x10" + bytes(16), b"\x02\x11" + bytes(17), b"\x02\x10" + bytes(15)):
            with self.subTest(bad=bad.hex()):
                with self.assertRaises(DecodeError):
                    AggregateTag.from_bytes(bad, 1, 1)


if __name__ == '__main__':
    unittest.main()

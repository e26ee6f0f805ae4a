from __future__ import annotations

import itertools
import random

import pytest

from docletmux.crdt import (
    HEAD,
    DeleteOp,
    InsertOp,
    IntegrationResult,
    OpId,
    TextDoc,
    replay,
)
from oracles import generate_concurrent_ops, shuffled_causal_delivery, tree_text


def build_doc(text: str, replica: int = 1) -> TextDoc:
    doc = TextDoc(replica)
    for i, ch in enumerate(text):
        doc.insert(i, ch)
    return doc


class TestNewDoc:
    def test_empty_text(self):
        assert TextDoc(1).text == ""

    def test_empty_version(self):
        assert TextDoc(1).version() == {}

    def test_replica_kept(self):
        assert TextDoc(7).replica == 7


class TestLocalInsert:
    def test_first_insert_anchors_at_head(self):
        doc = TextDoc(1)
        op = doc.insert(0, "a")
        assert op.origin is HEAD
        assert op.lamport == 1

    def test_insert_mid_text_origin_is_left_neighbour(self):
        doc = build_doc("ab")
        a_id = doc.anchor_at(1)  # id of 'a'
        op = doc.insert(1, "x")
        assert op.origin == a_id
        assert doc.text == "axb"
        assert tree_text(doc.all_ops()) == "axb"

    def test_lamport_strictly_increases(self):
        doc = build_doc("a")
        b = doc.insert(1, "b")
        c = doc.insert(2, "c")
        assert c.lamport > b.lamport

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            TextDoc(1).insert(1, "a")

    def test_seqs_are_gapless(self):
        doc = build_doc("xyz")
        doc.delete(1)
        assert [op.id.seq for op in doc.all_ops()] == [1, 2, 3, 4]


class TestLocalDelete:
    def test_delete_shrinks_text(self):
        doc = build_doc("ab")
        doc.delete(0)
        assert doc.text == "b"

    def test_tombstone_is_kept(self):
        doc = build_doc("a")
        doc.delete(0)
        doc.insert(0, "z")
        assert doc.text == "z"
        assert doc.element_count() == 2
        assert tree_text(doc.all_ops()) == "z"

    def test_delete_empty_doc(self):
        with pytest.raises(IndexError):
            TextDoc(1).delete(0)


class TestIntegrate:
    def test_concurrent_head_inserts_converge_both_orders(self):
        # Two replicas insert at HEAD concurrently; the greater (lamport,
        # replica) key sorts closer to the origin, so replica 2 wins the race.
        a = InsertOp(OpId(1, 1), lamport=1, origin=HEAD, ch="a")
        b = InsertOp(OpId(2, 1), lamport=1, origin=HEAD, ch="b")
        for order in ([a, b], [b, a]):
            doc = replay(9, order)
            assert doc.text == "ba"
        assert tree_text([a, b]) == "ba"

    def test_reapply_is_duplicate(self):
        doc = TextDoc(1)
        op = doc.insert(0, "a")
        other = TextDoc(2)
        assert other.integrate(op) is IntegrationResult.APPLIED
        assert other.integrate(op) is IntegrationResult.DUPLICATE
        assert other.text == "a"

    def test_delete_before_its_insert_is_buffered(self):
        src = TextDoc(1)
        ins = src.insert(0, "a")
        dele = src.delete(0)
        in_order = replay(9, [ins, dele])
        reordered = TextDoc(9)
        assert reordered.integrate(dele) is IntegrationResult.BUFFERED
        assert reordered.integrate(ins) is IntegrationResult.APPLIED
        assert reordered.text == in_order.text == ""
        assert reordered.version() == in_order.version()
        assert reordered.pending_count() == 0

    def test_seq_gap_is_buffered_until_filled(self):
        src = TextDoc(1)
        op1 = src.insert(0, "a")
        op2 = src.insert(1, "b")
        doc = TextDoc(9)
        assert doc.integrate(op2) is IntegrationResult.BUFFERED
        assert doc.text == ""
        assert doc.integrate(op1) is IntegrationResult.APPLIED
        assert doc.text == "ab"
        assert doc.version() == {1: 2}


class TestOpsSince:
    def test_no_diff_against_self(self):
        doc = build_doc("hey")
        assert doc.ops_since(doc.version()) == []

    def test_full_diff_replicates_state(self):
        rng = random.Random(7)
        ops = generate_concurrent_ops(rng, replicas=3, max_ops=60)
        doc = replay(8, ops)
        clone = replay(9, doc.ops_since({}))
        assert clone.text == doc.text
        assert clone.version() == doc.version()

    def test_set_difference(self):
        a = TextDoc(1)
        op11 = a.insert(0, "x")
        op12 = a.insert(1, "y")
        b = TextDoc(2)
        op21 = b.insert(0, "z")
        a.integrate(op21)
        diff = a.ops_since({1: 1})
        assert diff == [op12, op21]
        assert op11 not in diff

    def test_partial_catchup_converges(self):
        src = build_doc("hello")
        behind = replay(9, src.ops_since({})[:2])
        for op in src.ops_since(behind.version()):
            behind.integrate(op)
        assert behind.text == src.text


class TestAnchors:
    def test_index_zero_is_head(self):
        assert build_doc("ab").anchor_at(0) is HEAD

    def test_end_anchor_names_last_visible(self):
        doc = build_doc("ab")
        anchor = doc.anchor_at(2)
        assert isinstance(anchor, OpId)
        assert doc.index_of(anchor) == 2

    def test_head_resolves_to_zero(self):
        assert build_doc("abc").index_of(HEAD) == 0

    def test_tombstoned_sole_element_resolves_to_zero(self):
        doc = build_doc("a")
        anchor = doc.anchor_at(1)
        doc.delete(0)
        assert doc.index_of(anchor) == 0

    def test_visible_anchor_counts_itself(self):
        doc = build_doc("abc")
        assert doc.index_of(doc.anchor_at(1)) == 1

    def test_unknown_anchor(self):
        with pytest.raises(KeyError):
            build_doc("a").index_of(OpId(42, 42))

    def test_roundtrip_exhaustive_up_to_len_50(self):
        rng = random.Random(3)
        doc = TextDoc(1)
        for _ in range(50):
            doc.insert(rng.randint(0, doc.visible_length()), rng.choice("ab"))
        for _ in range(15):
            doc.delete(rng.randrange(doc.visible_length()))
        for i in range(doc.visible_length() + 1):
            assert doc.index_of(doc.anchor_at(i)) == i


class TestConvergence:
    def test_random_causal_deliveries_converge(self):
        rng = random.Random(2024)
        for _ in range(50):
            ops = generate_concurrent_ops(rng, replicas=4, max_ops=120)
            expected = tree_text(ops)
            d1 = replay(91, shuffled_causal_delivery(rng, ops))
            d2 = replay(92, shuffled_causal_delivery(rng, ops))
            assert d1.text == d2.text == expected
            assert d1.version() == d2.version()
            assert d1.pending_count() == d2.pending_count() == 0

    def test_arbitrary_permutations_small_sets_exhaustive(self):
        rng = random.Random(5)
        for _ in range(20):
            ops = generate_concurrent_ops(rng, replicas=3, max_ops=5)
            expected = tree_text(ops)
            for perm in itertools.permutations(ops):
                doc = replay(99, perm)
                assert doc.text == expected
                assert doc.pending_count() == 0

    def test_idempotence_under_full_redelivery(self):
        rng = random.Random(11)
        ops = generate_concurrent_ops(rng, replicas=3, max_ops=80)
        doc = replay(9, ops)
        text, version = doc.text, doc.version()
        for op in ops:
            assert doc.integrate(op) is IntegrationResult.DUPLICATE
        assert doc.text == text
        assert doc.version() == version

    def test_origin_always_precedes_element(self):
        rng = random.Random(13)
        ops = generate_concurrent_ops(rng, replicas=4, max_ops=100)
        doc = replay(9, shuffled_causal_delivery(rng, ops))
        seen = {HEAD}
        for op in (el.op for el in doc._elements):
            assert op.origin in seen or op.origin is HEAD
            seen.add(op.id)

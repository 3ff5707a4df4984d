import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aleph_lab.chdag import (
    NONCE,
    TXS,
    ChDag,
    DanglingUnitError,
    canonical_decode,
    create_unit,
    decode_txs,
    dump_dag,
    encode_txs,
    load_dag_units,
    make_unit,
    maximal_by_creator,
    ready_round,
    validate_unit,
)
from aleph_lab.crypto import TINY
from aleph_lab.wire import DecodeError
from dagtools import depth, keys, random_dag, reachable


class TestEncoding:
    def test_round_trip(self):
        sks, _ = keys(4)
        u = make_unit(2, 0, [], [(TXS, encode_txs([b"a", b""])), (NONCE, b"x")], sks[2], TINY)
        v = canonical_decode(u.encoding)
        assert v == u and v.hash == u.hash
        assert v.txs == (b"a", b"")
        assert [t for t, _ in u.sections] == [TXS, NONCE]

    def test_empty_txs(self):
        assert decode_txs(encode_txs([])) == ()

    @given(st.binary(max_size=200))
    def test_decoder_never_crashes(self, data):
        try:
            u = canonical_decode(data)
        except DecodeError:
            return
        assert u.encoding == data

    def test_trailing_byte_rejected(self):
        sks, _ = keys(4)
        u = make_unit(0, 0, [], [], sks[0], TINY)
        with pytest.raises(DecodeError):
            canonical_decode(u.encoding + b"\x00")
        with pytest.raises(DecodeError):
            canonical_decode(b"XX" + u.encoding[2:])

    def test_dump_and_load(self):
        dag, units, _ = random_dag(4, 1, 4, seed=3)
        again = load_dag_units(dump_dag(dag))
        assert [u.hash for u in again] == dag.hashes
        assert dump_dag(ChDag(4, 1)) == ""


class TestValidation:
    def setup_method(self):
        self.sks, self.pks = keys(4)
        self.dag = ChDag(4, 1)
        self.genesis = []
        for c in range(4):
            u = make_unit(c, 0, [], [], self.sks[c], TINY)
            self.dag.insert(u)
            self.genesis.append(u)

    def check(self, u, mode="aleph"):
        return validate_unit(u, self.dag, mode, self.pks, TINY)

    def test_valid_round_one(self):
        u = make_unit(0, 1, [g.hash for g in self.genesis[:3]], [], self.sks[0], TINY)
        assert self.check(u) == []

    def test_too_few_parents(self):
        u = make_unit(0, 1, [g.hash for g in self.genesis[:2]], [], self.sks[0], TINY)
        assert "dissemination" in self.check(u)

    def test_bad_signature(self):
        u = make_unit(0, 1, [g.hash for g in self.genesis[:3]], [], self.sks[1], TINY)
        assert "signature" in self.check(u)

    def test_wrong_round_hint(self):
        u = make_unit(0, 2, [g.hash for g in self.genesis[:3]], [], self.sks[0], TINY)
        assert "round_hint" in self.check(u)

    def test_dangling(self):
        u = make_unit(0, 1, [b"\x00" * 32] + [g.hash for g in self.genesis[:2]], [], self.sks[0], TINY)
        assert self.check(u) == ["dangling"]
        with pytest.raises(DanglingUnitError):
            self.dag.insert(u)

    def test_unknown_creator(self):
        u = make_unit(0, 0, [], [], self.sks[0], TINY)
        bad = type(u)(9, 0, (), (), u.signature)
        assert self.check(bad) == ["creator"]

    def test_fork_is_a_chain_violation_only_in_aleph(self):
        fork = make_unit(1, 0, [], [(NONCE, b"fork")], self.sks[1], TINY)
        assert "chain" in self.check(fork)
        assert "chain" not in self.check(fork, mode="quick")

    def test_two_parents_by_one_creator(self):
        fork = make_unit(1, 0, [], [(NONCE, b"fork")], self.sks[1], TINY)
        self.dag.insert(fork)
        u = make_unit(0, 1, [g.hash for g in self.genesis[:3]] + [fork.hash], [], self.sks[0], TINY)
        assert "diversity" in self.check(u, mode="quick")

    def test_self_parent_rule(self):
        u = make_unit(0, 1, [g.hash for g in self.genesis[1:4]], [], self.sks[0], TINY)
        assert self.check(u) == []  # skipping its own previous unit is allowed when one is absent
        v = make_unit(0, 1, [g.hash for g in self.genesis], [], self.sks[0], TINY)
        self.dag.insert(v)
        w = make_unit(0, 1, [g.hash for g in self.genesis[1:]], [(NONCE, b"again")], self.sks[0], TINY)
        assert "chain" in self.check(w)


class TestDagIndex:
    @settings(max_examples=15)
    @given(st.sampled_from([(4, 1), (7, 2)]), st.integers(2, 6), st.integers(0, 10_000))
    def test_reachability_and_rounds_match_brute_force(self, nf, rounds, seed):
        n, f = nf
        dag, units, _ = random_dag(n, f, rounds, seed)
        for u in units:
            assert dag.rounds[u.hash] == depth(dag, u.hash) == u.round
        rng = random.Random(seed)
        for _ in range(60):
            a, b = rng.choice(units), rng.choice(units)
            assert dag.is_below(a.hash, b.hash) == reachable(dag, a.hash, b.hash)
        last = units[-1]
        cone = dag.lower_cone(last.hash)
        assert set(cone) == {u.hash for u in units if reachable(dag, u.hash, last.hash)}

    def test_insert_is_idempotent(self):
        dag, units, _ = random_dag(4, 1, 3, seed=1)
        size = len(dag)
        assert dag.insert(units[0]) == dag.coords(units[0].hash)
        assert len(dag) == size

    def test_height_and_maximal(self):
        dag, units, _ = random_dag(4, 1, 5, seed=2)
        assert dag.height == 4
        top = maximal_by_creator(dag)
        assert all(u.round == dag.creator_rounds[c][-1] for c, u in top.items())
        lower = maximal_by_creator(dag, below_round=2)
        assert all(u.round < 2 for u in lower.values())

    def test_create_unit_waits_for_quorum(self):
        sks, pks = keys(4)
        dag = ChDag(4, 1)
        assert ready_round(dag, 0)
        for c in range(2):
            dag.insert(make_unit(c, 0, [], [], sks[c], TINY))
        assert create_unit(0, 1, dag, [], sks[0], TINY) is None
        dag.insert(make_unit(2, 0, [], [], sks[2], TINY))
        u = create_unit(0, 1, dag, [], sks[0], TINY)
        assert validate_unit(u, dag, "aleph", pks, TINY) == []
        assert len(u.parents) == 3

    def test_fork_variants_get_distinct_coords(self):
        sks, _ = keys(4)
        dag = ChDag(4, 1, "quick")
        a = make_unit(1, 0, [], [(NONCE, b"a")], sks[1], TINY)
        b = make_unit(1, 0, [], [(NONCE, b"b")], sks[1], TINY)
        ca, cb = dag.insert(a), dag.insert(b)
        assert {dag.coords(a.hash).variant, dag.coords(b.hash).variant} == {0, 1}
        assert ca.creator == cb.creator == 1

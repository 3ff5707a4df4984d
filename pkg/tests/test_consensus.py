import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aleph_lab.chdag import NONCE, ChDag, make_unit
from aleph_lab.consensus import Consensus, Orderer, first_bit, order_units
from aleph_lab.crypto import TINY, hash_bytes
from dagtools import keys, random_dag, reachable


def open_secrets(i, r):
    return hash_bytes(b"secret|%d|%d" % (i, r))


def hidden_after(limit):
    return lambda i, r: open_secrets(i, r) if r <= limit else None


def oracle_vote(dag, mode, u0, u):
    # straight from the definition, no memo and no bitmask reachability
    r0, r = dag.rounds[u0], dag.rounds[u]
    if r <= r0 + 1:
        return int(u != u0 and reachable(dag, u0, u))
    votes = {oracle_vote(dag, mode, u0, p) for p in dag.units[u].parents if dag.rounds[p] == r - 1}
    if len(votes) == 1:
        return votes.pop()
    return oracle_common_vote(dag, mode, u0, r)


def oracle_common_vote(dag, mode, u0, r):
    r0 = dag.rounds[u0]
    i = dag.units[u0].creator
    if mode == "aleph":
        if r <= r0 + 3:
            return 1
        if r == r0 + 4:
            return 0
        return hash_bytes(open_secrets(i, r))[0] >> 7
    if r - r0 <= 2:
        return 1
    if r - r0 == 3:
        return 0
    return open_secrets(i, r + 1)[0] >> 7


def oracle_unit_decide(dag, mode, u0, u):
    r0, r = dag.rounds[u0], dag.rounds[u]
    if r < r0 + 2:
        return None
    v = oracle_common_vote(dag, mode, u0, r)
    below = [p for p in dag.units[u].parents if dag.rounds[p] == r - 1]
    if sum(oracle_vote(dag, mode, u0, p) == v for p in below) >= 2 * dag.f + 1:
        return v
    return None


def full_dag(n, f, rounds, missing=(), mode="aleph"):
    """Every unit links to all units of the previous round; `missing` units are never linked to."""
    sks, _ = keys(n)
    dag = ChDag(n, f, mode)
    for rnd in range(rounds):
        prev = [u for u in dag.units_at_round(rnd - 1) if (u.creator, rnd - 1) not in missing]
        for c in range(n):
            dag.insert(make_unit(c, rnd, [u.hash for u in prev], [(NONCE, b"")], sks[c], TINY))
    return dag


class TestVotes:
    @settings(max_examples=12)
    @given(st.sampled_from(["aleph", "quick"]), st.integers(0, 5000))
    def test_votes_and_decisions_match_definition(self, mode, seed):
        dag, units, _ = random_dag(4, 1, 8, seed, mode="aleph", skip=0.15)
        cons = Consensus(dag, mode, open_secrets)
        rng = random.Random(seed)
        low = [u.hash for u in units if u.round <= 2]
        for _ in range(40):
            u0 = rng.choice(low)
            u = rng.choice(units).hash
            assert cons.vote(u0, u) == oracle_vote(dag, mode, u0, u)
            assert cons.unit_decide(u0, u) == oracle_unit_decide(dag, mode, u0, u)

    def test_first_bit(self):
        assert first_bit(b"\x80") == 1 and first_bit(b"\x7f") == 0

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            Consensus(ChDag(4, 1), "fast", open_secrets)


class TestDecisions:
    def test_well_linked_unit_decided_one_two_rounds_later(self):
        dag = full_dag(4, 1, 3)
        cons = Consensus(dag, "aleph", open_secrets)
        for u0 in dag.by_round[0]:
            assert cons.decide(u0) == 1

    @pytest.mark.parametrize("mode,rounds_needed", [("aleph", 4), ("quick", 3)])
    def test_ignored_unit_decided_zero(self, mode, rounds_needed):
        dag = full_dag(4, 1, rounds_needed + 1, missing={(2, 0)})
        u0 = dag.by_coords[(2, 0)][0]
        short = full_dag(4, 1, rounds_needed, missing={(2, 0)})
        assert Consensus(short, mode, open_secrets).decide(short.by_coords[(2, 0)][0]) is None
        assert Consensus(dag, mode, open_secrets).decide(u0) == 0

    def test_decision_callback(self):
        seen = []
        dag = full_dag(4, 1, 3)
        cons = Consensus(dag, "aleph", open_secrets, on_decision=lambda u0, bit, by: seen.append(bit))
        cons.decide(dag.by_round[0][0])
        assert seen == [1]

    @settings(max_examples=10)
    @given(st.integers(0, 5000))
    def test_no_unit_decides_both_bits(self, seed):
        dag, units, _ = random_dag(7, 2, 9, seed, skip=0.1)
        cons = Consensus(dag, "aleph", open_secrets)
        for u in units:
            if u.round <= 3:
                cons.audit(u.hash)


class TestOrdering:
    def test_hidden_secret_blocks_the_head(self):
        dag = full_dag(4, 1, 8)
        assert Consensus(dag, "aleph", hidden_after(3)).choose_head(0) is None
        assert Consensus(dag, "aleph", hidden_after(4)).choose_head(0) is not None

    def test_quick_default_creator_first(self):
        dag = full_dag(4, 1, 6, mode="quick")
        cons = Consensus(dag, "quick", open_secrets)
        for r in range(3):
            head = cons.choose_head(r)
            assert dag.units[head].creator == r % 4

    def test_quick_waits_for_height(self):
        dag = full_dag(4, 1, 3, mode="quick")
        perm, complete = Consensus(dag, "quick", open_secrets).generate_permutation_quick(0)
        assert perm is None and not complete

    def test_permutation_is_a_permutation(self):
        dag = full_dag(7, 2, 6)
        perm = Consensus(dag, "aleph", open_secrets).generate_permutation(1)
        assert sorted(perm) == sorted(dag.by_round[1])

    @settings(max_examples=10)
    @given(st.sampled_from(["aleph", "quick"]), st.integers(0, 5000))
    def test_incremental_order_matches_batch(self, mode, seed):
        dag, units, _ = random_dag(4, 1, 10, seed, skip=0.1)
        whole = order_units(dag, mode, open_secrets)
        # replay the insertions one by one and extend after each
        live = ChDag(4, 1)
        orderer = Orderer(Consensus(live, mode, open_secrets))
        snapshots = []
        for u in units:
            live.insert(u)
            orderer.extend()
            snapshots.append(list(orderer.linord))
        for a, b in zip(snapshots, snapshots[1:]):
            assert b[: len(a)] == a
        assert snapshots[-1] == whole
        assert len(set(whole)) == len(whole)

    @settings(max_examples=8)
    @given(st.integers(0, 5000))
    def test_different_insertion_orders_agree(self, seed):
        dag, units, _ = random_dag(4, 1, 9, seed)
        rng = random.Random(seed)
        # another topological order: shuffle within each round
        by_round = {}
        for u in units:
            by_round.setdefault(u.round, []).append(u)
        other = ChDag(4, 1)
        for r in sorted(by_round):
            batch = by_round[r][:]
            rng.shuffle(batch)
            for u in batch:
                other.insert(u)
        a = order_units(dag, "aleph", open_secrets)
        b = order_units(other, "aleph", open_secrets)
        k = min(len(a), len(b))
        assert a[:k] == b[:k]

    def test_order_respects_causality(self):
        dag, units, _ = random_dag(7, 2, 9, seed=4)
        order = order_units(dag, "aleph", open_secrets)
        pos = {h: i for i, h in enumerate(order)}
        for h in order:
            for p in dag.units[h].parents:
                assert pos[p] < pos[h]

    def test_latency_probe_records_heights(self):
        live = ChDag(4, 1)
        orderer = Orderer(Consensus(live, "aleph", open_secrets))
        src = full_dag(4, 1, 8)
        for h in src.hashes:
            live.insert(src.units[h])
            orderer.track_latency()
        # secrets are always open here, so a round-0 head needs two rounds above it
        assert orderer.first_height[0] == 2
        assert orderer.bottom_height[0] == 1
        assert all(orderer.first_height[r] == r + 2 for r in range(6))

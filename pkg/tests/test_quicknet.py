from hypothesis import given, settings
from hypothesis import strategies as st

from aleph_lab.chdag import NONCE, ChDag, make_unit
from aleph_lab.crypto import TINY
from aleph_lab.netsim import Run, Scenario
from aleph_lab.quicknet import (
    ABSENT,
    AlertMessage,
    CompactParents,
    RequestLimiter,
    concise_info,
    decode_info,
    encode_info,
    encode_parents,
    is_fork_proof,
    resolve_parents,
    units_missing_at,
)
from dagtools import keys, random_dag


def fork_pair(sks, creator=2, rnd=0):
    a = make_unit(creator, rnd, [], [(NONCE, b"a")], sks[creator], TINY)
    b = make_unit(creator, rnd, [], [(NONCE, b"b")], sks[creator], TINY)
    return a, b


class TestAlerts:
    def setup_method(self):
        self.sks, self.pks = keys(4)

    def test_fork_proof(self):
        a, b = fork_pair(self.sks)
        assert is_fork_proof((a, b), 2, self.pks, TINY)
        assert not is_fork_proof((a, a), 2, self.pks, TINY)
        assert not is_fork_proof((a, b), 1, self.pks, TINY)
        forged = make_unit(2, 0, [], [(NONCE, b"c")], self.sks[0], TINY)
        assert not is_fork_proof((a, forged), 2, self.pks, TINY)

    def test_different_rounds_are_no_proof(self):
        a, _ = fork_pair(self.sks)
        genesis = [make_unit(c, 0, [], [], self.sks[c], TINY) for c in range(3)]
        later = make_unit(2, 1, [g.hash for g in genesis], [], self.sks[2], TINY)
        assert not is_fork_proof((a, later), 2, self.pks, TINY)

    def test_encoding_round_trip(self):
        a, b = fork_pair(self.sks)
        for commit in (None, b"\x05" * 32):
            m = AlertMessage(1, 7, 2, (a, b), commit, 3 if commit else 0)
            back = AlertMessage.decode(m.encode())
            assert back == m and back.verify(self.pks, TINY)


class TestCompactParents:
    @settings(max_examples=10)
    @given(st.integers(0, 5000))
    def test_resolves_to_the_same_parents(self, seed):
        dag, units, _ = random_dag(7, 2, 5, seed)
        for u in units[-7:]:
            cp = encode_parents(u, dag)
            assert CompactParents.decode(cp.encode()) == cp
            assert resolve_parents(cp, dag) == ("ok", sorted(u.parents))

    def test_missing_parent_is_fetched(self):
        dag, units, _ = random_dag(4, 1, 3, seed=1)
        u = units[-1]
        cp = encode_parents(u, dag)
        other = ChDag(4, 1)
        for v in units:
            if v.round == 0:
                other.insert(v)
        status, coords = resolve_parents(cp, other)
        assert status == "fetch"
        assert all(r == 1 for _, r in coords)

    def test_fork_detected(self):
        sks, _ = keys(4)
        dag = ChDag(4, 1, "quick")
        genesis = [make_unit(c, 0, [], [], sks[c], TINY) for c in range(4)]
        for g in genesis:
            dag.insert(g)
        u = make_unit(0, 1, [g.hash for g in genesis], [], sks[0], TINY)
        dag.insert(u)
        cp = encode_parents(u, dag)
        fork = make_unit(3, 0, [], [(NONCE, b"fork")], sks[3], TINY)
        dag.insert(fork)
        assert resolve_parents(cp, dag) == ("fork", [(3, 0)])
        # a receiver holding only the other variant notices through the control hash
        lone = ChDag(4, 1, "quick")
        for g in genesis[:3] + [fork]:
            lone.insert(g)
        status, _ = resolve_parents(cp, lone)
        assert status == "fork"

    def test_absent_creators(self):
        dag, units, _ = random_dag(4, 1, 2, seed=3)
        cp = encode_parents(units[-1], dag)
        assert cp.rounds.count(ABSENT) == 4 - len(units[-1].parents)


class TestGossip:
    def test_info_round_trip(self):
        dag, _, _ = random_dag(4, 1, 4, seed=2)
        info = concise_info(dag)
        assert decode_info(encode_info(info)) == info

    @settings(max_examples=10)
    @given(st.integers(0, 5000), st.integers(0, 5))
    def test_diff_covers_everything_new_near_the_top(self, seed, cut):
        dag, units, _ = random_dag(4, 1, 7, seed)
        peer = ChDag(4, 1)
        for u in units:
            if u.round < cut:
                peer.insert(u)
        diff = units_missing_at(dag, concise_info(peer))
        assert set(diff).isdisjoint(peer.units)
        assert {u.hash for u in units if u.round >= cut} <= set(diff) | set(peer.units)
        rounds = [dag.rounds[h] for h in diff]
        assert rounds == sorted(rounds)

    def test_nothing_missing_between_equal_dags(self):
        dag, _, _ = random_dag(4, 1, 4, seed=5)
        assert units_missing_at(dag, concise_info(dag)) == []


class TestLimiter:
    def test_limit_and_window(self):
        lim = RequestLimiter(limit=2, window=10)
        assert lim.allow(1, "x", 0) and lim.allow(1, "x", 1)
        assert not lim.allow(1, "x", 2)
        assert lim.allow(2, "x", 2)
        assert lim.allow(1, "x", 10)


class TestQuickRuns:
    def test_honest_quick_run_orders_heads(self):
        run = Run(Scenario(n=7, mode="quick", rounds=8, seed=2))
        assert run.execute()
        orders = [nd.orderer.linord for nd in run.honest_nodes]
        k = min(map(len, orders))
        assert all(o[:k] == orders[0][:k] for o in orders)

    def test_forkers_are_exposed(self):
        sc = Scenario(n=7, mode="quick", byzantine=["forker", "forker"], rounds=8, seed=4, budget=40_000)
        run = Run(sc)
        assert run.execute()
        accused = {e[3] for e in run.world.events if e[1] == "fork"}
        assert accused == set(sc.byzantine_ids)

"""DAG builders and brute-force oracles shared by the tests."""

import random

from aleph_lab.chdag import NONCE, ChDag, make_unit, validate_unit
from aleph_lab.crypto import TINY
from aleph_lab.crypto.signing import keygen


def keys(n, seed=0):
    rng = random.Random(seed)
    pairs = [keygen(rng, TINY) for _ in range(n)]
    return [sk for sk, _ in pairs], [pk for _, pk in pairs]


def random_dag(n, f, rounds, seed, mode="aleph", skip=0.0):
    """Grow a DAG where each creator links to a random 2f+1 superset of the previous round.

    skip is the chance a creator sits a round out.
    """
    rng = random.Random(seed)
    sks, pks = keys(n, seed)
    dag = ChDag(n, f, mode)
    units = []
    for rnd in range(rounds):
        for c in rng.sample(range(n), n):
            if rnd > 0 and rng.random() < skip:
                continue
            if rnd == 0:
                parents = []
            else:
                prev = {u.creator: u for u in dag.units_at_round(rnd - 1)}
                others = [x for x in prev if x != c]
                k = rng.randint(min(2 * f, len(others)), len(others))
                chosen = rng.sample(others, k) + ([c] if c in prev else [])
                if len(chosen) < 2 * f + 1:
                    continue
                parents = [prev[x].hash for x in chosen]
            u = make_unit(c, rnd, parents, [(NONCE, b"%d" % rnd)], sks[c], TINY)
            assert validate_unit(u, dag, mode, pks, TINY) == []
            dag.insert(u)
            units.append(u)
    return dag, units, pks


def reachable(dag, u_hash, v_hash):
    # BFS along parent edges, independent of the bitmask index
    seen, stack = set(), [v_hash]
    while stack:
        h = stack.pop()
        if h == u_hash:
            return True
        if h in seen:
            continue
        seen.add(h)
        stack.extend(dag.units[h].parents)
    return False


def depth(dag, h):
    u = dag.units[h]
    return 0 if not u.parents else 1 + max(depth(dag, p) for p in u.parents)

"""Virtual-voting consensus over a local DAG.

Everything is computed from the DAG plus a `secret_bits(i, r)` oracle that
returns bytes or None while the secret is still hidden. Results that can no
longer change are memoized, so repeated calls as the DAG grows stay cheap.
"""

import sys
from collections import defaultdict

from .chdag import iter_bits
from .crypto import hash_bytes

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


class ConflictingDecision(AssertionError):
    pass


def first_bit(data: bytes) -> int:
    return data[0] >> 7


class Consensus:
    def __init__(self, dag, mode: str, secret_bits, on_decision=None):
        if mode not in ("aleph", "quick"):
            raise ValueError(f"unknown consensus mode {mode!r}")
        self.dag = dag
        self.mode = mode
        self.secret_bits = secret_bits
        self.on_decision = on_decision
        self.n, self.f = dag.n, dag.f
        self._votes = {}
        self._decided = {}
        self._settled_bot = defaultdict(set)
        self._prev_parents = {}
        self._priority = {}
        self.heads = {}

    # -- votes ----------------------------------------------------------------

    def _parents_below(self, u):
        ps = self._prev_parents.get(u)
        if ps is None:
            d = self.dag
            r = d.rounds[u] - 1
            ps = tuple(p for p in d.units[u].parents if d.rounds[p] == r)
            self._prev_parents[u] = ps
        return ps

    def vote(self, u0, u):
        """Vote of unit u on whether u0 should be a head candidate (0/1/None)."""
        d = self.dag
        key = (d.index[u0], d.index[u])
        v = self._votes.get(key)
        if v is not None:
            return v
        r0, r = d.rounds[u0], d.rounds[u]
        if r <= r0 + 1:
            v = 1 if (u != u0 and d.is_below(u0, u)) else 0
        else:
            seen = set()
            for p in self._parents_below(u):
                pv = self.vote(u0, p)
                if pv is None:
                    return None
                seen.add(pv)
            if len(seen) == 1:
                v = seen.pop()
            else:
                v = self.common_vote(u0, r)
                if v is None:
                    return None
        self._votes[key] = v
        return v

    def common_vote(self, u0, r):
        r0 = self.dag.rounds[u0]
        creator = self.dag.units[u0].creator
        if self.mode == "aleph":
            if r <= r0 + 3:
                return 1
            if r == r0 + 4:
                return 0
            x = self.secret_bits(creator, r)
            return None if x is None else first_bit(hash_bytes(x))
        d = r - r0
        if d <= 2:
            return 1
        if d == 3:
            return 0
        x = self.secret_bits(creator, r + 1)
        return None if x is None else first_bit(x)

    def _unit_decide(self, u0, u):
        """(bit or None, whether a None result is final)."""
        d = self.dag
        r0, r = d.rounds[u0], d.rounds[u]
        if r < r0 + 2:
            return None, True
        v = self.common_vote(u0, r)
        if v is None:
            return None, False
        count = 0
        pending = False
        for p in self._parents_below(u):
            pv = self.vote(u0, p)
            if pv is None:
                pending = True
            elif pv == v:
                count += 1
        if count >= 2 * self.f + 1:
            return v, True
        return None, not pending

    def unit_decide(self, u0, u):
        return self._unit_decide(u0, u)[0]

    def decide(self, u0):
        bit = self._decided.get(u0)
        if bit is not None:
            return bit
        d = self.dag
        r0 = d.rounds[u0]
        settled = self._settled_bot[u0]
        for r in range(r0 + 2, d.height + 1):
            for u in d.by_round.get(r, ()):
                idx = d.index[u]
                if idx in settled:
                    continue
                bit, final = self._unit_decide(u0, u)
                if bit is not None:
                    self._decided[u0] = bit
                    self._settled_bot.pop(u0, None)
                    if self.on_decision is not None:
                        self.on_decision(u0, bit, u)
                    return bit
                if final:
                    settled.add(idx)
        return None

    def decided_bits(self, u0) -> set:
        """Every bit any unit in the DAG decides for u0 (audit helper)."""
        d = self.dag
        out = set()
        for r in range(d.rounds[u0] + 2, d.height + 1):
            for u in d.by_round.get(r, ()):
                bit = self.unit_decide(u0, u)
                if bit is not None:
                    out.add(bit)
        return out

    def audit(self, u0):
        """Decided bit for u0 across every unit of the DAG; raises on a split."""
        bits = self.decided_bits(u0)
        if len(bits) > 1:
            raise ConflictingDecision(f"unit {u0.hex()[:16]} decided both 0 and 1")
        return next(iter(bits), None)

    # -- permutations and heads ------------------------------------------------

    def _prio(self, u, secret):
        p = self._priority.get(u)
        if p is None:
            p = hash_bytes(secret + self.dag.units[u].encoding)
            self._priority[u] = p
        return p

    def generate_permutation(self, r):
        """Round-r units in priority order, or None while a secret is hidden."""
        d = self.dag
        units = d.by_round.get(r, [])
        keyed = []
        for u in units:
            if u in self._priority:
                keyed.append((self._priority[u], u))
                continue
            secret = self.secret_bits(d.units[u].creator, r + 4)
            if secret is None:
                return None
            keyed.append((self._prio(u, secret), u))
        keyed.sort()
        return [u for _, u in keyed]

    def default_index(self, r) -> int:
        return r % self.n

    def generate_permutation_quick(self, r):
        """(units, complete); units is None when the DAG is too low."""
        d = self.dag
        if d.height < r + 3:
            return None, False
        i0 = self.default_index(r)
        prefix = list(d.by_coords.get((i0, r), ()))
        rest = []
        for u in d.by_round.get(r, ()):
            creator = d.units[u].creator
            if creator == i0:
                continue
            if u in self._priority:
                rest.append((self._priority[u], u))
                continue
            secret = self.secret_bits(creator, r + 5)
            if secret is None:
                return prefix, False
            rest.append((self._prio(u, secret), u))
        rest.sort()
        return prefix + [u for _, u in rest], True

    def choose_head(self, r):
        if r in self.heads:
            return self.heads[r]
        if self.mode == "aleph":
            perm = self.generate_permutation(r)
        else:
            perm, _ = self.generate_permutation_quick(r)
        if perm is None:
            return None
        for u in perm:
            bit = self.decide(u)
            if bit is None:
                return None
            if bit == 1:
                self.heads[r] = u
                return u
        return None


class Orderer:
    """Incremental linear order; the output only ever grows by appending."""

    def __init__(self, consensus: Consensus):
        self.cons = consensus
        self.dag = consensus.dag
        self.next_round = 0
        self.ordered_mask = 0
        self.linord = []
        self.head_rounds = []
        self.bottom_height = {}  # round -> highest local height with no head yet
        self.first_height = {}  # round -> local height when the head became known
        self.probe_from = 0

    def extend(self) -> list:
        """Order whatever became decidable; returns [(round, head, batch)]."""
        d = self.dag
        batches = []
        while self.next_round <= d.height:
            r = self.next_round
            head = self.cons.choose_head(r)
            if head is None:
                break
            mask = d.below[d.index[head]] & ~self.ordered_mask
            self.ordered_mask |= mask
            batch = sorted(
                (d.hashes[i] for i in iter_bits(mask)), key=lambda h: (d.rounds[h], h)
            )
            self.linord.extend(batch)
            self.head_rounds.append(head)
            batches.append((r, head, batch))
            self.next_round += 1
        return batches

    def track_latency(self):
        """Per round, remember the highest local height at which its head was
        still unknown and the height at which it became known."""
        d = self.dag
        while self.probe_from in self.first_height:
            self.probe_from += 1
        for r in range(self.probe_from, d.height + 1):
            if r in self.first_height:
                continue
            if self.cons.choose_head(r) is None:
                self.bottom_height[r] = d.height
            else:
                self.first_height[r] = d.height


def order_units(dag, mode: str, secret_bits) -> list:
    """Linear order of the whole DAG computed from scratch."""
    orderer = Orderer(Consensus(dag, mode, secret_bits))
    orderer.extend()
    return list(orderer.linord)

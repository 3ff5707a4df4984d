"""Trustless setup of a threshold key set, run on top of the unit DAG.

Round-0 units carry key boxes, round-3 units carry votes on the boxes in
their lower cone, and units from round 6 on carry shares for the MultiCoins
of every node whose round-6 unit they see. Node i's MultiCoin uses the
dealers in its trusted set T_i, fixed by the cone of its round-6 unit.

Shares are aggregated: a node contributes one share per MultiCoin nonce,
signed with the sum of its tossing keys over T_i. Interpolating those shares
gives the product of the per-dealer signatures directly.
"""

from ..chdag import KEY_BOX, KEY_VOTES, SHARES
from ..crypto import (
    ThresholdKeySet,
    combine_shares,
    create_share,
    hash_bytes,
    verify_share_with_key,
)
from ..wire import DecodeError
from .keybox import (
    OK,
    KeyBox,
    build_key_box,
    check_vote,
    decode_votes,
    decrypt_key,
    derived_vk,
    encode_votes,
    vote_key_box,
)
from .shares import decode_shares, encode_shares, multicoin_nonce

VOTE_ROUND = 3
SHARE_ROUND = 6


def cone_of(dag, parents) -> int:
    mask = 0
    for p in parents:
        mask |= dag.below[dag.index[p]]
    return mask


class TrustlessBeacon:
    def __init__(self, me, n, f, dag, backend, pair_keys, rng=None, box=None):
        self.me, self.n, self.f = me, n, f
        self.dag = dag
        self.backend = backend
        self.pair_keys = pair_keys  # only this node's secret halves are used
        if box is None:
            box, _ = build_key_box(me, n, f, pair_keys, rng, backend)
        self.box = box
        self.boxes = {}  # dealer -> KeyBox, from round-0 units in the dag
        self.votes = {}  # voter -> {dealer: KeyVote}
        self.own_keys = {}  # dealer -> decrypted tossing key (ok verdicts only)
        self._trusted = {}
        self._agg_vk = {}
        self._unit_shares = {}
        self._secrets = {}

    # -- reading the dag ------------------------------------------------------

    def _unit_index_at(self, creator, rnd):
        hs = self.dag.by_coords.get((creator, rnd))
        return self.dag.index[hs[0]] if hs else None

    def _in_cone(self, mask, creator, rnd) -> bool:
        idx = self._unit_index_at(creator, rnd)
        return idx is not None and bool((mask >> idx) & 1)

    def box_of(self, k):
        box = self.boxes.get(k)
        if box is None:
            u = self.dag.unit_at(k, 0)
            if u is None:
                return None
            box = self.boxes[k] = KeyBox.decode(u.section(KEY_BOX), self.backend)
        return box

    def votes_of(self, j):
        v = self.votes.get(j)
        if v is None:
            u = self.dag.unit_at(j, VOTE_ROUND)
            if u is None:
                return None
            v = self.votes[j] = {x.dealer: x for x in decode_votes(u.section(KEY_VOTES), j, self.backend)}
        return v

    def trusted_set(self, i):
        """Dealers whose boxes sit below U[i;6] with no bad vote below it."""
        t = self._trusted.get(i)
        if t is not None:
            return t
        v = self.dag.unit_at(i, SHARE_ROUND)
        if v is None:
            return None
        mask = self.dag.below[self.dag.index[v.hash]]
        voters = [j for j in range(self.n) if self._in_cone(mask, j, VOTE_ROUND)]
        members = []
        for k in range(self.n):
            if not self._in_cone(mask, k, 0):
                continue
            verdicts = [self.votes_of(j).get(k) for j in voters]
            # a voter that did not see the box casts no vote and blocks nothing
            if all(v is None or v.verdict == OK for v in verdicts):
                members.append(k)
        t = self._trusted[i] = frozenset(members)
        return t

    def _owes(self, creator, i, mask) -> bool:
        """Whether creator must sign node i's MultiCoin nonces."""
        if not self._in_cone(mask, i, SHARE_ROUND):
            return False
        own = self._unit_index_at(creator, VOTE_ROUND)
        if own is None or not (mask >> own) & 1:
            return False
        votes = self.votes_of(creator)
        return all(k in votes and votes[k].verdict == OK for k in self.trusted_set(i))

    def aggregated_vk(self, i, signer):
        key = (i, signer)
        out = self._agg_vk.get(key)
        if out is None:
            out = self.backend.identity
            for k in sorted(self.trusted_set(i)):
                out = self.backend.mul(out, derived_vk(self.box_of(k).commitment, signer, self.backend))
            self._agg_vk[key] = out
        return out

    # -- unit payloads -----------------------------------------------------------

    def sections(self, rnd, parents) -> list:
        if rnd == 0:
            return [(KEY_BOX, self.box.encode(self.backend))]
        mask = cone_of(self.dag, parents)
        if rnd == VOTE_ROUND:
            votes = []
            for k in range(self.n):
                if self._in_cone(mask, k, 0):
                    vote = vote_key_box(self.me, self.box_of(k), self.pair_keys, self.backend)
                    if vote.verdict == OK:
                        self.own_keys[k] = decrypt_key(self.box_of(k), self.me, self.pair_keys)
                    votes.append(vote)
            self.votes[self.me] = {v.dealer: v for v in votes}
            return [(KEY_VOTES, encode_votes(votes, self.backend))]
        if rnd >= SHARE_ROUND:
            entries = []
            for i in range(self.n):
                if self._owes(self.me, i, mask):
                    nonce = multicoin_nonce(i, rnd)
                    tk = sum(self.own_keys[k] for k in self.trusted_set(i)) % self.backend.q
                    entries.append((nonce, i, create_share(nonce, tk, self.me, self.backend)))
            return [(SHARES, encode_shares(entries, self.backend))]
        return []

    # -- validation ----------------------------------------------------------------

    def validate(self, u, dag) -> list:
        try:
            if u.round == 0:
                return self._validate_box(u)
            mask = cone_of(dag, u.parents)
            if u.round == VOTE_ROUND:
                return self._validate_votes(u, mask)
            if u.round >= SHARE_ROUND:
                return self._validate_shares(u, mask)
        except (DecodeError, ValueError):
            return ["beacon_encoding"]
        return []

    def _validate_box(self, u):
        data = u.section(KEY_BOX)
        if data is None:
            return ["missing_key_box"]
        box = KeyBox.decode(data, self.backend)
        if box.dealer != u.creator or not box.well_formed(self.n, self.f, self.backend):
            return ["key_box"]
        return []

    def _validate_votes(self, u, mask):
        data = u.section(KEY_VOTES)
        if data is None:
            return ["missing_votes"]
        votes = decode_votes(data, u.creator, self.backend)
        expected = [k for k in range(self.n) if self._in_cone(mask, k, 0)]
        if [v.dealer for v in votes] != expected:
            return ["vote_set"]
        keys = self.pair_keys
        for v in votes:
            box = self.box_of(v.dealer)
            pk_r = keys.recipient_pk[(v.dealer, u.creator)]
            pk_s = keys.sender_pk[(v.dealer, u.creator)]
            if not check_vote(v, box, pk_r, pk_s, self.backend):
                return ["bad_vote"]
        return []

    def _validate_shares(self, u, mask):
        data = u.section(SHARES)
        entries = decode_shares(data, self.backend) if data is not None else []
        owed = [i for i in range(self.n) if self._owes(u.creator, i, mask)]
        if [e[1] for e in entries] != owed:
            return ["share_set"]
        for nonce, i, share in entries:
            if nonce != multicoin_nonce(i, u.round) or share.signer != u.creator:
                return ["share_nonce"]
            vk = self.aggregated_vk(i, u.creator)
            if not verify_share_with_key(nonce, share, vk, self.backend):
                return ["share_invalid"]
        return []

    # -- MultiCoins ------------------------------------------------------------------

    def unit_shares(self, u) -> dict:
        got = self._unit_shares.get(u.hash)
        if got is None:
            data = u.section(SHARES)
            entries = decode_shares(data, self.backend) if data is not None else []
            got = self._unit_shares[u.hash] = {i: s for _, i, s in entries}
        return got

    def secret_bits(self, i, r):
        key = (i, r)
        cached = self._secrets.get(key)
        if cached is not None:
            return cached
        if self.dag.height < r + 1 or self.trusted_set(i) is None:
            return None
        shares = {}
        for u in self.dag.units_at_round(r):
            s = self.unit_shares(u).get(i)
            if s is not None:
                shares.setdefault(s.signer, s)
        if len(shares) < self.f + 1:
            return None
        chosen = [shares[k] for k in sorted(shares)[: self.f + 1]]
        tau = combine_shares(chosen, self.backend)
        out = hash_bytes(self.backend.element_bytes(tau))
        self._secrets[key] = out
        return out

    # -- result ------------------------------------------------------------------------

    def combined_keys(self, chosen) -> ThresholdKeySet:
        """Key set summed over T_chosen; only this node's tossing key is filled."""
        b = self.backend
        members = sorted(self.trusted_set(chosen))
        tk = 0
        for k in members:
            key = self.own_keys.get(k)
            if key is None:
                key = decrypt_key(self.box_of(k), self.me, self.pair_keys)
            if key >= b.q or b.exp(b.g, key) != self.box_of(k).vk(self.me, b):
                tk = None
                break
            tk = (tk + key) % b.q
        vk = []
        for j in range(self.n):
            acc = b.identity
            for k in members:
                acc = b.mul(acc, derived_vk(self.box_of(k).commitment, j, b))
            vk.append(acc)
        joint = b.identity
        for k in members:
            joint = b.mul(joint, self.box_of(k).commitment[0])
        tks = tuple(tk if j == self.me else None for j in range(self.n))
        return ThresholdKeySet(tks, tuple(vk), joint, self.f)


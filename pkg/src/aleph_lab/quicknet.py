"""Quick dissemination helpers: fork alerts, compact parents and gossip diffs."""

from collections import Counter
from dataclasses import dataclass

from .chdag import Unit, canonical_decode, verify_unit_signature
from .crypto import hash_bytes
from .wire import DecodeError, Reader, Writer

ABSENT = 0xFFFFFFFF


# -- alerts --------------------------------------------------------------------


@dataclass(frozen=True)
class AlertMessage:
    issuer: int
    alert_id: int
    accused: int
    proof: tuple  # two distinct units by the accused with one round hint
    commit_hash: bytes = None  # issuer's highest unit by the accused, if any
    commit_round: int = 0

    def encode(self) -> bytes:
        w = Writer().u16(self.issuer).u32(self.alert_id).u16(self.accused)
        for u in self.proof:
            w.blob(u.encoding)
        if self.commit_hash is None:
            w.u8(0)
        else:
            w.u8(1).raw(self.commit_hash).u32(self.commit_round)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes):
        r = Reader(data)
        issuer, alert_id, accused = r.u16(), r.u32(), r.u16()
        proof = (canonical_decode(r.blob()), canonical_decode(r.blob()))
        flag = r.u8()
        if flag not in (0, 1):
            raise DecodeError("bad commitment flag")
        commit_hash, commit_round = None, 0
        if flag:
            commit_hash, commit_round = r.raw(32), r.u32()
        r.done()
        return cls(issuer, alert_id, accused, proof, commit_hash, commit_round)

    def verify(self, public_keys, backend) -> bool:
        return is_fork_proof(self.proof, self.accused, public_keys, backend)


def is_fork_proof(proof, accused, public_keys, backend) -> bool:
    a, b = proof
    return (
        a.hash != b.hash
        and a.creator == b.creator == accused
        and a.round == b.round
        and verify_unit_signature(a, public_keys, backend)
        and verify_unit_signature(b, public_keys, backend)
    )


# -- compact parents -------------------------------------------------------------


@dataclass(frozen=True)
class CompactParents:
    rounds: tuple  # per creator, ABSENT when no parent by that creator
    control: bytes

    def encode(self) -> bytes:
        w = Writer().u16(len(self.rounds))
        for r in self.rounds:
            w.u32(r)
        return w.raw(self.control).getvalue()

    @classmethod
    def decode(cls, data: bytes):
        r = Reader(data)
        rounds = tuple(r.u32() for _ in range(r.u16()))
        control = r.raw(32)
        r.done()
        return cls(rounds, control)


def control_hash(hashes_in_creator_order) -> bytes:
    return hash_bytes(b"".join(hashes_in_creator_order))


def encode_parents(u: Unit, dag) -> CompactParents:
    by_creator = {}
    for p in u.parents:
        by_creator[dag.units[p].creator] = p
    rounds = tuple(
        dag.rounds[by_creator[c]] if c in by_creator else ABSENT for c in range(dag.n)
    )
    ordered = [by_creator[c] for c in sorted(by_creator)]
    return CompactParents(rounds, control_hash(ordered))


def resolve_parents(cp: CompactParents, dag):
    """("ok", hashes) | ("fetch", missing coords) | ("fork", ambiguous coords).

    "fork" also covers the case where every referenced coordinate is unique
    locally but the control hash disagrees: the sender used another variant.
    """
    chosen, missing, ambiguous = [], [], []
    for c, r in enumerate(cp.rounds):
        if r == ABSENT:
            continue
        variants = dag.by_coords.get((c, r), [])
        if not variants:
            missing.append((c, r))
        elif len(variants) > 1:
            ambiguous.append((c, r))
        else:
            chosen.append(variants[0])
    if missing:
        return "fetch", missing
    if ambiguous:
        return "fork", ambiguous
    if control_hash(chosen) != cp.control:
        return "fork", [(c, r) for c, r in enumerate(cp.rounds) if r != ABSENT]
    return "ok", sorted(chosen)


# -- gossip ------------------------------------------------------------------------


def concise_info(dag) -> dict:
    """Per creator: (top round, hashes at the top two rounds)."""
    info = {}
    for c, rounds in dag.creator_rounds.items():
        top = rounds[-1]
        hs = []
        for r in rounds[-2:]:
            hs.extend(dag.by_coords[(c, r)])
        info[c] = (top, frozenset(hs))
    return info


def encode_info(info: dict) -> bytes:
    w = Writer().u16(len(info))
    for c in sorted(info):
        top, hs = info[c]
        w.u16(c).u32(top).u16(len(hs))
        for h in sorted(hs):
            w.raw(h)
    return w.getvalue()


def decode_info(data: bytes) -> dict:
    r = Reader(data)
    out = {}
    for _ in range(r.u16()):
        c, top = r.u16(), r.u32()
        out[c] = (top, frozenset(r.raw(32) for _ in range(r.u16())))
    r.done()
    return out


def units_missing_at(dag, info: dict, skip=()) -> list:
    """Units of `dag` the peer described by `info` probably lacks, causally sorted.

    Everything above the peer's top round per creator, plus variants at the
    peer's top two rounds it did not list. Older gaps surface later as
    parent requests.
    """
    out = []
    for c, rounds in dag.creator_rounds.items():
        if c in skip:
            continue
        top, known = info.get(c, (-1, frozenset()))
        for r in rounds:
            if r < top - 1:
                continue
            for h in dag.by_coords[(c, r)]:
                if r > top or h not in known:
                    out.append(h)
    out.sort(key=lambda h: (dag.rounds[h], h))
    return out


class RequestLimiter:
    """Serve the same request from the same peer at most `limit` times per window."""

    def __init__(self, limit: int = 3, window: int = 100):
        self.limit = limit
        self.window = window
        self.counts = Counter()
        self.window_start = 0

    def allow(self, peer: int, key, now: int) -> bool:
        if now - self.window_start >= self.window:
            self.counts.clear()
            self.window_start = now
        self.counts[(peer, key)] += 1
        return self.counts[(peer, key)] <= self.limit

"""Units and the local communication-history DAG."""

import json
from bisect import insort
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

from .crypto import hash_bytes, signing
from .wire import DecodeError, Reader, Writer

# payload section tags
TXS = 1
KEY_BOX = 2
KEY_VOTES = 3
SHARES = 4
NONCE = 5

MAGIC = b"AU"


class DanglingUnitError(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class Unit:
    creator: int
    round: int  # creator's claim; checked against the parents on validation
    parents: tuple  # parent hashes, sorted
    sections: tuple = ()  # ((tag, bytes), ...) sorted by tag
    signature: bytes = b""

    @cached_property
    def body(self) -> bytes:
        w = Writer().raw(MAGIC).u16(self.creator).u16(len(self.parents))
        for p in self.parents:
            w.raw(p)
        w.u8(len(self.sections))
        for tag, data in self.sections:
            w.u8(tag).blob(data)
        w.u32(self.round)
        return w.getvalue()

    @cached_property
    def encoding(self) -> bytes:
        return Writer().raw(self.body).u16(len(self.signature)).raw(self.signature).getvalue()

    @cached_property
    def hash(self) -> bytes:
        return hash_bytes(self.encoding)

    @cached_property
    def signed_digest(self) -> bytes:
        return hash_bytes(self.body)

    def section(self, tag: int):
        for t, data in self.sections:
            if t == tag:
                return data
        return None

    @cached_property
    def txs(self) -> tuple:
        data = self.section(TXS)
        return decode_txs(data) if data is not None else ()

    def __eq__(self, other):
        return isinstance(other, Unit) and self.hash == other.hash

    def __hash__(self):
        return hash(self.hash)

    def __repr__(self):
        return f"Unit(c={self.creator}, r={self.round}, h={self.hash.hex()[:8]})"


@dataclass(frozen=True)
class UnitCoords:
    creator: int
    round: int
    variant: int


def encode_txs(txs) -> bytes:
    w = Writer().u32(len(txs))
    for tx in txs:
        w.blob(tx)
    return w.getvalue()


def decode_txs(data: bytes) -> tuple:
    r = Reader(data)
    out = tuple(r.blob() for _ in range(r.u32()))
    r.done()
    return out


def canonical_encode(u: Unit) -> bytes:
    return u.encoding


def canonical_decode(data: bytes) -> Unit:
    r = Reader(data)
    if r.raw(2) != MAGIC:
        raise DecodeError("bad unit magic")
    creator = r.u16()
    parents = tuple(r.raw(32) for _ in range(r.u16()))
    if list(parents) != sorted(parents):
        raise DecodeError("parent hashes not sorted")
    sections = []
    for _ in range(r.u8()):
        tag = r.u8()
        sections.append((tag, r.blob()))
    if [t for t, _ in sections] != sorted({t for t, _ in sections}):
        raise DecodeError("sections not sorted or duplicated")
    rnd = r.u32()
    sig = r.raw(r.u16())
    r.done()
    u = Unit(creator, rnd, parents, tuple(sections), sig)
    if u.encoding != data:
        raise DecodeError("non-canonical unit encoding")
    return u


def make_unit(creator, rnd, parents, sections, sk, backend) -> Unit:
    secs = tuple(sorted((t, d) for t, d in sections))
    bare = Unit(creator, rnd, tuple(sorted(parents)), secs)
    sig = signing.sign(sk, bare.signed_digest, backend)
    return Unit(creator, rnd, bare.parents, secs, sig)


def verify_unit_signature(u: Unit, public_keys, backend) -> bool:
    if not 0 <= u.creator < len(public_keys):
        return False
    return signing.verify(public_keys[u.creator], u.signed_digest, u.signature, backend)


class ChDag:
    """A node's local DAG. Units are only ever added, never changed."""

    def __init__(self, n: int, f: int, mode: str = "aleph"):
        self.n, self.f, self.mode = n, f, mode
        self.units = {}
        self.rounds = {}
        self.index = {}
        self.hashes = []
        self.below = []  # bitmask over insertion indices of the lower cone
        self.by_coords = defaultdict(list)
        self.by_round = defaultdict(list)
        self.creator_rounds = defaultdict(list)
        self.height = -1

    def __contains__(self, h):
        return h in self.units

    def __len__(self):
        return len(self.units)

    def round_of(self, u: Unit) -> int:
        if u.hash in self.rounds:
            return self.rounds[u.hash]
        return computed_round(u, self)

    def insert(self, u: Unit) -> UnitCoords:
        h = u.hash
        if h in self.units:
            return self.coords(h)
        rnd = computed_round(u, self)
        mask = 0
        for p in u.parents:
            mask |= self.below[self.index[p]]
        idx = len(self.hashes)
        self.units[h] = u
        self.rounds[h] = rnd
        self.index[h] = idx
        self.hashes.append(h)
        self.below.append(mask | (1 << idx))
        key = (u.creator, rnd)
        if not self.by_coords[key]:
            insort(self.creator_rounds[u.creator], rnd)
        insort(self.by_coords[key], h)
        insort(self.by_round[rnd], h)
        if rnd > self.height:
            self.height = rnd
        return self.coords(h)

    def coords(self, h) -> UnitCoords:
        u = self.units[h]
        rnd = self.rounds[h]
        return UnitCoords(u.creator, rnd, self.by_coords[(u.creator, rnd)].index(h))

    def is_below(self, u, v) -> bool:
        """u <= v: u is reachable from v along parent edges."""
        return bool((self.below[self.index[v]] >> self.index[u]) & 1)

    def units_at_round(self, r: int) -> list:
        return [self.units[h] for h in self.by_round.get(r, ())]

    def unit_at(self, creator: int, r: int):
        hs = self.by_coords.get((creator, r))
        return self.units[hs[0]] if hs else None

    def creators_at_round(self, r: int, exclude=()) -> set:
        return {self.units[h].creator for h in self.by_round.get(r, ())} - set(exclude)

    def maximal_by_creator(self, below_round=None, exclude=()) -> dict:
        out = {}
        for c, rounds in self.creator_rounds.items():
            if c in exclude:
                continue
            for rnd in reversed(rounds):
                if below_round is None or rnd < below_round:
                    out[c] = self.units[self.by_coords[(c, rnd)][0]]
                    break
        return out

    def lower_cone(self, h) -> list:
        """Hashes of all units <= h, in insertion order."""
        mask = self.below[self.index[h]]
        return [self.hashes[i] for i in iter_bits(mask)]

    def parent_units(self, u: Unit) -> list:
        return [self.units[p] for p in u.parents]


def iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def computed_round(u: Unit, dag: ChDag) -> int:
    if not u.parents:
        return 0
    best = -1
    for p in u.parents:
        r = dag.rounds.get(p)
        if r is None:
            raise DanglingUnitError(p.hex())
        best = max(best, r)
    return best + 1


def round_of(u: Unit, dag: ChDag) -> int:
    return dag.round_of(u)


def is_below(u: Unit, v: Unit, dag: ChDag) -> bool:
    return dag.is_below(u.hash, v.hash)


def intrinsic_violations(u: Unit, n: int, public_keys, backend) -> list:
    """Checks that need no DAG context."""
    out = []
    if not 0 <= u.creator < n:
        out.append("creator")
        return out
    if not verify_unit_signature(u, public_keys, backend):
        out.append("signature")
    if len(u.parents) > n:
        out.append("too_many_parents")
    if len(set(u.parents)) != len(u.parents):
        out.append("diversity")
    if u.parents and u.round == 0 or not u.parents and u.round != 0:
        out.append("round_hint")
    return out


def validate_unit(u: Unit, dag: ChDag, mode: str, public_keys, backend, validators=()) -> list:
    """Return the list of violated rules; empty means valid."""
    out = intrinsic_violations(u, dag.n, public_keys, backend)
    if "creator" in out:
        return out
    missing = [p for p in u.parents if p not in dag.units]
    if missing:
        out.append("dangling")
        return out
    parents = dag.parent_units(u)
    creators = [p.creator for p in parents]
    if len(set(creators)) != len(creators) and "diversity" not in out:
        out.append("diversity")
    rnd = computed_round(u, dag)
    if rnd != u.round and "round_hint" not in out:
        out.append("round_hint")
    if rnd > 0:
        prev = sum(1 for p in u.parents if dag.rounds[p] == rnd - 1)
        if prev < 2 * dag.f + 1:
            out.append("dissemination")
    own = [p for p in u.parents if dag.units[p].creator == u.creator]
    if len(own) > 1 or any(dag.rounds[p] >= rnd for p in own):
        out.append("self_parent")
    if mode == "aleph":
        existing = dag.by_coords.get((u.creator, rnd), [])
        if existing and existing[0] != u.hash:
            out.append("chain")
    for check in validators:
        out.extend(check(u, dag))
    return out


def insert_unit(u: Unit, dag: ChDag) -> UnitCoords:
    return dag.insert(u)


def maximal_by_creator(dag: ChDag, below_round=None, exclude=()) -> dict:
    return dag.maximal_by_creator(below_round, exclude)


def units_at_round(r: int, dag: ChDag) -> list:
    return dag.units_at_round(r)


def ready_round(dag: ChDag, r: int, exclude=()) -> bool:
    if r == 0:
        return True
    return len(dag.creators_at_round(r - 1, exclude)) >= 2 * dag.f + 1


def create_unit(creator, rnd, dag: ChDag, sections, sk, backend, exclude=()):
    """Build this creator's unit of round rnd, or None when not ready yet."""
    if not ready_round(dag, rnd, exclude):
        return None
    parents = []
    if rnd > 0:
        parents = [u.hash for u in dag.maximal_by_creator(rnd, exclude).values()]
    return make_unit(creator, rnd, parents, sections, sk, backend)


def dump_dag(dag: ChDag) -> str:
    lines = []
    for h in dag.hashes:
        u = dag.units[h]
        lines.append(
            json.dumps(
                {
                    "hash": h.hex(),
                    "creator": u.creator,
                    "round": dag.rounds[h],
                    "parents": [p.hex() for p in u.parents],
                    "unit": u.encoding.hex(),
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def load_dag_units(text: str) -> list:
    out = []
    for line in text.splitlines():
        if line.strip():
            row = json.loads(line)
            u = canonical_decode(bytes.fromhex(row["unit"]))
            if u.hash.hex() != row["hash"]:
                raise DecodeError("hash mismatch in dag dump")
            out.append(u)
    return out

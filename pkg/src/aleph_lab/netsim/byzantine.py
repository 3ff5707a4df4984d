"""Byzantine behaviours, written as overrides of the honest node."""

from ..beacon import KeyBox
from ..chdag import NONCE, make_unit
from ..crypto import ConfigError
from ..rbc import COMMIT, PREVOTE, RbcMessage, make_proposals
from .messages import UnitMsg
from .node import Node


class CrashedNode:
    """Never sends anything."""

    def __init__(self, me, genesis=None, rng=None):
        self.me = me
        self.world = None

    def step(self, now, msgs):
        return []

    def input_tx(self, tx):
        pass


def with_nonce(unit, tag: bytes, sk, backend):
    sections = [(t, d) for t, d in unit.sections if t != NONCE] + [(NONCE, tag)]
    return make_unit(unit.creator, unit.round, unit.parents, sections, sk, backend)


class Forker(Node):
    """Quick mode: every unit comes in several variants; node j gets variant
    j mod variants and every variant is served on request."""

    variants = 2

    def __init__(self, me, genesis, rng):
        super().__init__(me, genesis, rng)
        self.own_variants = {}

    def broadcast_unit(self, unit):
        if self.g.mode == "aleph":
            return Equivocator.broadcast_unit(self, unit)
        copies = [unit] + [
            with_nonce(unit, b"variant-%d" % v, self.sk, self.backend) for v in range(1, self.variants)
        ]
        for u in copies:
            self.own_variants[u.hash] = u
        self.insert_now(unit)
        for j in range(self.n):
            if j != self.me:
                self.outbox.append((j, UnitMsg((copies[j % self.variants],))))

    def lookup(self, h):
        return self.own_variants.get(h) or self.dag.units.get(h)


class Equivocator(Node):
    """Aleph mode: proposes one unit to half the nodes and a second one to the
    rest, then prevotes and commits both roots."""

    def broadcast_unit(self, unit):
        other = with_nonce(unit, b"equivocation", self.sk, self.backend)
        instance = (self.unit_channel, self.me, unit.round)
        props = [make_proposals(self.me, instance, u.encoding, self.n, self.f) for u in (unit, other)]
        half = self.n // 2
        for j in range(self.n):
            if j != self.me:
                self.outbox.append((j, props[0 if j < half else 1][j]))
        for p in props:
            mine = p[self.me]
            self.outbox.append((None, RbcMessage(PREVOTE, self.me, instance, mine.root, mine.branch, mine.share)))
            self.outbox.append((None, RbcMessage(COMMIT, self.me, instance, mine.root)))


class ShareWithholder(Node):
    """Withholds toss shares and the MultiCoin shares of the setup."""

    def toss_share(self, session):
        return None

    def beacon_sections(self, r, parents):
        if self.phase == "setup" and r >= 6:
            return []
        return super().beacon_sections(r, parents)


class GarbageDealer(Node):
    """Deals a key box whose ciphertexts are random bytes."""

    def make_key_box(self):
        box = super().make_key_box()
        size = self.backend.scalar_len
        junk = tuple(self.rng.randbytes(size) for _ in range(self.n))
        return KeyBox(box.dealer, box.commitment, junk)


BEHAVIOURS = {
    "forker": Forker,
    "equivocator": Equivocator,
    "share_withholder": ShareWithholder,
    "garbage_dealer": GarbageDealer,
}


def node_class(behaviour: str):
    """'crash', a single behaviour, or several joined with '+'."""
    if behaviour in ("crash", "crashed"):
        return CrashedNode
    parts = behaviour.split("+")
    unknown = [p for p in parts if p not in BEHAVIOURS]
    if unknown:
        raise ConfigError(f"unknown byzantine behaviour {unknown[0]!r}")
    if len(parts) == 1:
        return BEHAVIOURS[parts[0]]
    return type("".join(BEHAVIOURS[p].__name__ for p in parts), tuple(BEHAVIOURS[p] for p in parts), {})

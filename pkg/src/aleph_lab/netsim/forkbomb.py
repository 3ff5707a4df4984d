"""Fork bomb: 2K colluding nodes build an exponentially large cone of forks.

Pair k (coalition positions 2k-1 and 2k) forks at round r+k into 2^(K-k)
variants each. Variant i of position 2k-1 sits on variant 2i-1 of the
previous pair, variant i of position 2k on variant 2i. Every bomb unit also
takes all honest units of the previous round as parents, so it validates
locally. Only the last pair (no forks) is ever sent out unsolicited.
"""

from ..beacon import DEALER_KEYSET, dealer_nonce, encode_shares
from ..chdag import NONCE, SHARES, make_unit
from ..crypto import ConfigError, create_share
from ..rbc import COMMIT, PREVOTE, UNIT_CHANNEL, RbcMessage, make_proposals
from .messages import UnitMsg
from .node import Node


def build_fork_bomb(K, start_round, members, honest_parents, signing_sk, backend, tossing_keys=None):
    """Return {(member, round): [variant units]} for the whole bomb.

    honest_parents(round) -> hashes of honest units of that round to link to.
    tossing_keys, when given, maps member -> dealer key so units carry shares.
    """
    if K < 1 or len(members) < 2 * K:
        raise ConfigError(f"fork bomb with K={K} needs {2 * K} nodes, got {len(members)}")
    layers = {}
    for k in range(1, K + 1):
        rnd = start_round + k
        count = 2 ** (K - k)
        base = honest_parents(rnd - 1)
        for offset in (0, 1):  # positions 2k-1 and 2k
            node = members[2 * k - 2 + offset]
            variants = []
            for i in range(1, count + 1):
                parents = list(base)
                if k > 1:
                    pick = 2 * i - 1 if offset == 0 else 2 * i
                    for prev in (members[2 * k - 4], members[2 * k - 3]):
                        parents.append(layers[(prev, rnd - 1)][pick - 1].hash)
                sections = [(NONCE, b"bomb|%d|%d" % (k, i))]
                if tossing_keys is not None:
                    nonce = dealer_nonce(rnd)
                    share = create_share(nonce, tossing_keys[node], node, backend)
                    sections.append((SHARES, encode_shares([(nonce, DEALER_KEYSET, share)], backend)))
                variants.append(make_unit(node, rnd, parents, sections, signing_sk[node], backend))
            layers[(node, rnd)] = variants
    return layers


def bomb_units(layers) -> dict:
    return {u.hash: u for variants in layers.values() for u in variants}


class Coalition:
    """Shared adversary state: one bomb, built once enough honest units exist."""

    def __init__(self, K, start_round, members, honest, genesis):
        if len(members) < 2 * K:
            raise ConfigError(f"fork bomb with K={K} needs {2 * K} byzantine nodes")
        self.K = K
        self.start_round = start_round
        self.members = list(members)
        self.honest = sorted(honest)
        self.g = genesis
        self.layers = None
        self.units = {}

    @property
    def built(self) -> bool:
        return self.layers is not None

    @property
    def final_round(self) -> int:
        return self.start_round + self.K

    def try_build(self, dag):
        need = 2 * self.g.f + 1
        for rnd in range(self.start_round, self.final_round):
            if len(dag.creators_at_round(rnd) & set(self.honest)) < need:
                return False

        def honest_parents(rnd):
            hs = [dag.unit_at(c, rnd) for c in self.honest]
            return [u.hash for u in hs if u is not None]

        keys = None
        if self.g.dealer_keys is not None:
            keys = {m: self.g.dealer_keys.tk[m] for m in self.members}
        self.layers = build_fork_bomb(
            self.K, self.start_round, self.members, honest_parents,
            self.g.signing_sk, self.g.backend, keys,
        )
        self.units = bomb_units(self.layers)
        return True


class BombMember(Node):
    """A coalition node: builds nothing of its own, launches its bomb units."""

    coalition = None

    def __init__(self, me, genesis, rng):
        super().__init__(me, genesis, rng)
        self.launched = False

    def can_create(self):
        return False

    def accept_candidate(self, u, sender):
        if u.hash in self.dag or u.hash in self.staged:
            return
        self.stage(u, sender)

    def admit(self, u):
        return True

    def lookup(self, h):
        return self.coalition.units.get(h) or self.dag.units.get(h)

    def after_growth(self):
        c = self.coalition
        if not c.built:
            c.try_build(self.dag)
        if c.built and not self.launched:
            self.launched = True
            self.launch()

    def launch(self):
        c = self.coalition
        mine = {rnd: vs for (node, rnd), vs in c.layers.items() if node == self.me}
        if self.g.mode == "quick":
            for rnd, variants in mine.items():
                if rnd == c.final_round:
                    for j in c.honest:
                        self.outbox.append((j, UnitMsg((variants[0],))))
            return
        for rnd, variants in mine.items():
            instance = (UNIT_CHANNEL, self.me, rnd)
            props = [make_proposals(self.me, instance, u.encoding, self.n, self.f) for u in variants]
            for j in c.honest:
                self.outbox.append((j, props[j % len(props)][j]))
            for p in props:
                own = p[self.me]
                self.outbox.append((None, RbcMessage(PREVOTE, self.me, instance, own.root, own.branch, own.share)))
                self.outbox.append((None, RbcMessage(COMMIT, self.me, instance, own.root)))

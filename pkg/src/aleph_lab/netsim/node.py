"""Honest node state machine.

Aleph mode disseminates units with reliable broadcast. Quick mode multicasts
them, fetches missing parents from whoever sent a unit, runs periodic gossip
syncs and, when hardened, raises fork alerts over reliable broadcast.
"""

from collections import defaultdict
from dataclasses import dataclass, field

from ..abcast import OutputLog, TxBuffer
from ..beacon import DealerBeacon, TossSession, TrustlessBeacon, build_key_box
from ..chdag import (
    TXS,
    ChDag,
    canonical_decode,
    encode_txs,
    intrinsic_violations,
    make_unit,
    ready_round,
    validate_unit,
)
from ..consensus import Consensus, Orderer
from ..quicknet import AlertMessage, RequestLimiter, concise_info, decode_info, encode_info, units_missing_at
from ..rbc import ALERT_CHANNEL, INVALID, READY, UNIT_CHANNEL, WAIT, RbcEngine, RbcMessage, check_size
from ..wire import DecodeError
from .messages import GossipMsg, ParentRequest, TossShareMsg, UnitMsg

MAIN_CHANNEL = 2  # units of the main DAG that follows a trustless setup
TX_SLACK_BYTES = 4096


@dataclass
class Genesis:
    """Everything fixed before the run: parameters and key material."""

    n: int
    f: int
    backend: object
    mode: str = "aleph"  # unit dissemination: aleph (reliable broadcast) | quick
    consensus_mode: str = None  # defaults to mode
    beacon: str = "dealer"  # dealer | trustless
    hardened: bool = True  # quick mode: fork alerts on
    c_b: float = 4.0
    signing_sk: list = field(default_factory=list)
    signing_pk: list = field(default_factory=list)
    dealer_keys: object = None
    pair_keys: object = None
    gossip_interval: int = 5
    track_heads: bool = False  # probe head latency after every insertion
    max_round: int = None  # stop creating units past this round

    def __post_init__(self):
        if self.consensus_mode is None:
            self.consensus_mode = self.mode


class Node:
    def __init__(self, me: int, genesis: Genesis, rng):
        self.me = me
        self.g = genesis
        self.n, self.f = genesis.n, genesis.f
        self.backend = genesis.backend
        self.rng = rng
        self.world = None
        self.now = 0
        self.outbox = []
        self.buffer = TxBuffer(self.n, rng, genesis.c_b)
        self.log = OutputLog()
        self.rbc = RbcEngine(me, self.n, self.f, host=self)
        self.unit_channel = UNIT_CHANNEL
        # quick mode
        self.forkers = set()
        self.fork_proofs = {}
        self.first_seen = {}
        self.closure = defaultdict(set)
        self.quarantine = {}
        self.requested = set()
        self.limiter = RequestLimiter()
        self.gossip_counter = 0
        self.gossip_sessions = {}
        self.own_steps = 0
        self.alert_queue = []
        self.active_alert = None
        self.next_alert_id = 0
        self.alert_next = defaultdict(int)  # issuer -> lowest alert id not yet output
        self.alerts_done = defaultdict(set)
        self.alert_log = []  # (issuer, id, accused)
        # toss
        self.toss_sessions = {}
        self.toss_outputs = {}
        self.rbc_outputs = {}  # instance -> (step, async round)
        self.setup_done_at = None
        self.setup_head = None
        self.combined_keys = None
        self._fresh_dag()
        if genesis.beacon == "trustless":
            self.phase = "setup"
            self.setup_beacon = TrustlessBeacon(
                me, self.n, self.f, self.dag, self.backend, genesis.pair_keys,
                rng=rng, box=self.make_key_box(),
            )
            self.beacon = self.setup_beacon
        else:
            self.phase = "main"
            keys = genesis.dealer_keys.for_node(me) if genesis.dealer_keys is not None else None
            self.beacon = DealerBeacon(me, keys, self.dag, self.backend)

    # -- setup helpers -----------------------------------------------------------

    def _fresh_dag(self):
        self.dag = ChDag(self.n, self.f, "aleph" if self.g.mode == "aleph" else "quick")
        self.consensus = Consensus(self.dag, self.g.consensus_mode, self.secret_bits, self.on_decision)
        self.orderer = Orderer(self.consensus)
        self.round = -1
        self.staged = {}
        self.waiting_on = defaultdict(set)
        self.rejected = set()
        self.batch_bytes = {}
        self.dirty = False

    def on_decision(self, u0, bit, by):
        if self.world is not None:
            self.world.record("decide", self.me, u0.hex()[:16], self.dag.rounds[u0], bit, by.hex()[:16])

    def make_key_box(self):
        box, _ = build_key_box(self.me, self.n, self.f, self.g.pair_keys, self.rng, self.backend)
        return box

    def secret_bits(self, i, r):
        return self.beacon.secret_bits(i, r)

    def start_main_phase(self):
        """Switch to a fresh DAG whose secrets come from the combined keys."""
        self.phase = "main"
        self.unit_channel = MAIN_CHANNEL
        self._fresh_dag()
        self.beacon = DealerBeacon(self.me, self.combined_keys, self.dag, self.backend, required=False)

    @property
    def public_keys(self):
        return self.g.signing_pk

    @property
    def sk(self):
        return self.g.signing_sk[self.me]

    # -- world interface -----------------------------------------------------------

    def step(self, now, msgs) -> list:
        self.now = now
        self.own_steps += 1
        for src, payload in msgs:
            if src in self.forkers and self.g.mode == "quick":
                continue  # muted
            self.receive(src, payload)
        self.work()
        out, self.outbox = self.outbox, []
        return out

    def input_tx(self, tx: bytes):
        self.buffer.input_tx(tx)

    def send(self, dst, payload):
        if dst is None and self.forkers and self.g.mode == "quick":
            for j in range(self.n):
                if j != self.me and j not in self.forkers:
                    self.outbox.append((j, payload))
        elif dst is None or dst not in self.forkers or self.g.mode != "quick":
            self.outbox.append((dst, payload))

    def _emit(self, pairs):
        for dst, msg in pairs:
            self.send(dst, msg)

    def receive(self, src, payload):
        if isinstance(payload, RbcMessage):
            if payload.sender != src:
                return
            self._emit(self.rbc.handle(payload))
        elif isinstance(payload, UnitMsg):
            for u in payload.units:
                self.accept_candidate(u, src)
        elif isinstance(payload, ParentRequest):
            self.serve_request(src, payload)
        elif isinstance(payload, GossipMsg):
            self.on_gossip(src, payload)
        elif isinstance(payload, TossShareMsg):
            self.on_toss_share(payload)

    def work(self):
        progress = True
        while progress:
            progress = False
            if self.dirty:
                self.dirty = False
                self.after_growth()
                progress = True
            if self.rbc.waiting:
                out = self.rbc.poll()
                if out:
                    self._emit(out)
                    progress = True
            if self.g.mode == "quick" and self.g.hardened:
                self.maybe_raise_alert()
            if self.maybe_create():
                progress = True
        if self.g.mode == "quick":
            self.maybe_gossip()

    # -- unit creation -------------------------------------------------------------

    def can_create(self) -> bool:
        if self.phase == "toss":
            return False
        if self.active_alert is not None:
            return False
        r = self.round + 1
        if self.g.max_round is not None and r > self.g.max_round:
            return False
        if r > 0 and self.dag.unit_at(self.me, self.round) is None:
            return False
        return ready_round(self.dag, r, self.forkers)

    def maybe_create(self) -> bool:
        if not self.can_create():
            return False
        r = self.round + 1
        parents = []
        if r > 0:
            parents = [u.hash for u in self.dag.maximal_by_creator(r, self.forkers).values()]
        sections = self.unit_sections(r, parents)
        unit = make_unit(self.me, r, parents, sections, self.sk, self.backend)
        self.round = r
        self.broadcast_unit(unit)
        return True

    def unit_sections(self, r, parents) -> list:
        sections = []
        if self.phase == "main":
            txs = self.buffer.select_payload()
            self.batch_bytes[r] = sum(len(t) for t in txs)
            if txs:
                sections.append((TXS, encode_txs(txs)))
        sections.extend(self.beacon_sections(r, parents))
        return sections

    def beacon_sections(self, r, parents) -> list:
        return self.beacon.sections(r, parents)

    def broadcast_unit(self, unit):
        if self.g.mode == "aleph":
            instance = (self.unit_channel, self.me, unit.round)
            if self.world is not None:
                self.world.on_rbc_propose(self.me, instance)
            self._emit(self.rbc.propose(instance, unit.encoding))
        else:
            self.insert_now(unit)
            self.send(None, UnitMsg((unit,)))

    # -- validation and insertion --------------------------------------------------

    def validators(self):
        return (self.beacon.validate,) if self.beacon is not None else ()

    def violations(self, u) -> list:
        return validate_unit(u, self.dag, self.dag.mode, self.public_keys, self.backend, self.validators())

    def insert_now(self, u):
        self.dag.insert(u)
        self.buffer.remove(u.txs)
        self.dirty = True
        if self.g.track_heads and self.phase == "main":
            self.orderer.track_latency()
        if self.world is not None:
            self.world.on_insert(self.me, u, self.dag)

    def stage(self, u, sender=None):
        """Insert u once all of its parents are local; fetch missing ones in quick mode."""
        h = u.hash
        if h in self.dag or h in self.staged:
            return
        missing = [p for p in u.parents if p not in self.dag]
        if missing:
            self.staged[h] = u
            for p in missing:
                self.waiting_on[p].add(h)
            if self.g.mode == "quick" and sender is not None:
                want = tuple(p for p in missing if p not in self.staged and p not in self.requested)
                if want:
                    self.requested.update(want)
                    self.send(sender, ParentRequest(want))
            return
        stack = [u]
        while stack:
            u = stack.pop()
            h = u.hash
            self.staged.pop(h, None)
            if h in self.dag:
                continue
            bad = self.violations(u)
            if bad:
                self.rejected.add(h)
                if self.world is not None:
                    self.world.record("reject", self.me, h.hex()[:16], tuple(bad))
                continue
            if not self.admit(u):
                continue
            self.insert_now(u)
            for child in self.waiting_on.pop(h, ()):
                cu = self.staged.get(child)
                if cu is not None and all(p in self.dag for p in cu.parents):
                    stack.append(cu)

    def admit(self, u) -> bool:
        """Last check before insertion; quick mode catches forks here."""
        if self.g.mode != "quick" or not self.g.hardened:
            return True
        key = (u.creator, u.round)
        existing = self.dag.by_coords.get(key)
        if existing and existing[0] != u.hash and u.hash not in self.closure[u.creator]:
            self.on_fork(u.creator, (self.dag.units[existing[0]], u))
            self.quarantine[u.hash] = (u, None)
            return False
        return True

    # -- quick mode: receiving units -----------------------------------------------

    def accept_candidate(self, u, sender):
        h = u.hash
        if h in self.dag or h in self.staged or h in self.quarantine or h in self.rejected:
            return
        if intrinsic_violations(u, self.n, self.public_keys, self.backend):
            self.rejected.add(h)
            return
        c = u.creator
        if self.g.hardened:
            key = (c, u.round)
            first = self.first_seen.get(key)
            if first is None:
                self.first_seen[key] = u
            elif first.hash != h:
                self.on_fork(c, (first, u))
            if c in self.forkers and h not in self.closure[c]:
                self.quarantine[h] = (u, sender)
                return
            if h in self.closure[c]:
                self.closure[c].update(u.parents)
        self.stage(u, sender)

    def serve_request(self, src, req: ParentRequest):
        if not self.limiter.allow(src, req.hashes, self.now):
            return
        units = tuple(self.lookup(h) for h in req.hashes if self.lookup(h) is not None)
        if units:
            self.send(src, UnitMsg(units, reply=True))

    def lookup(self, h):
        return self.dag.units.get(h)

    # -- quick mode: gossip ------------------------------------------------------------

    def maybe_gossip(self):
        if self.own_steps % self.g.gossip_interval:
            return
        peers = [j for j in range(self.n) if j != self.me and j not in self.forkers]
        if not peers:
            return
        peer = self.rng.choice(peers)
        session = (self.me, self.gossip_counter)
        self.gossip_counter += 1
        self.gossip_sessions[session] = len(self.forkers)
        self.send(peer, GossipMsg(session, 1, encode_info(concise_info(self.dag))))

    def on_gossip(self, src, msg: GossipMsg):
        if msg.leg == 1:
            try:
                info = decode_info(msg.info)
            except DecodeError:
                return
            units = tuple(self.dag.units[h] for h in units_missing_at(self.dag, info))
            self.send(src, GossipMsg(msg.session, 2, encode_info(concise_info(self.dag)), units))
        elif msg.leg == 2:
            known_forkers = self.gossip_sessions.pop(msg.session, None)
            if known_forkers is None:
                return
            for u in msg.units:
                self.accept_candidate(u, src)
            if len(self.forkers) != known_forkers:
                return  # a fork surfaced mid-session: abort before the last leg
            try:
                info = decode_info(msg.info)
            except DecodeError:
                return
            units = tuple(self.dag.units[h] for h in units_missing_at(self.dag, info))
            if units:
                self.send(src, GossipMsg(msg.session, 3, b"", units))
        elif msg.leg == 3:
            for u in msg.units:
                self.accept_candidate(u, src)

    # -- quick mode: alerts ------------------------------------------------------------

    def on_fork(self, c, proof):
        if c in self.forkers:
            return
        self.forkers.add(c)
        self.fork_proofs[c] = proof
        if self.world is not None:
            self.world.record("fork", self.me, c)
        if not self.g.hardened:
            return
        self.alert_queue.append(c)
        for h, u in list(self.staged.items()):
            if u.creator == c and h not in self.closure[c]:
                del self.staged[h]
                self.quarantine[h] = (u, None)

    def maybe_raise_alert(self):
        if self.active_alert is not None or not self.alert_queue:
            return
        c = self.alert_queue.pop(0)
        top = None
        for r in reversed(self.dag.creator_rounds.get(c, [])):
            top = self.dag.units[self.dag.by_coords[(c, r)][0]]
            break
        alert = AlertMessage(
            self.me, self.next_alert_id, c, self.fork_proofs[c],
            top.hash if top is not None else None, top.round if top is not None else 0,
        )
        instance = (ALERT_CHANNEL, self.me, self.next_alert_id)
        self.next_alert_id += 1
        self.active_alert = instance
        self._emit(self.rbc.propose(instance, alert.encode()))

    def on_alert_output(self, instance, alert):
        _, issuer, aid = instance
        self.alerts_done[issuer].add(aid)
        while self.alert_next[issuer] in self.alerts_done[issuer]:
            self.alert_next[issuer] += 1
        self.alert_log.append((issuer, aid, alert.accused))
        c = alert.accused
        if alert.commit_hash is not None:
            self.closure[c].add(alert.commit_hash)
        if c not in self.forkers:
            self.on_fork(c, alert.proof)
        if instance == self.active_alert:
            self.active_alert = None
        self.release_quarantine(c)

    def release_quarantine(self, c):
        changed = True
        while changed:
            changed = False
            for h, (u, sender) in list(self.quarantine.items()):
                if u.creator == c and h in self.closure[c]:
                    del self.quarantine[h]
                    self.closure[c].update(u.parents)
                    self.stage(u, sender)
                    changed = True

    # -- reliable broadcast host hooks ---------------------------------------------

    def metadata_allowance(self) -> int:
        b = self.backend
        per_share = 8 + b.element_len + 2 * b.scalar_len + 16
        return 1024 + self.n * (40 + 2 * per_share + b.scalar_len + 4) + (self.f + 1) * b.element_len

    def rbc_check_size(self, instance, share) -> bool:
        channel, _, rnd = instance
        inferred = len(share) * (self.f + 1)
        if channel == ALERT_CHANNEL:
            return inferred <= 8 * self.metadata_allowance()
        tx_bytes = max(0, inferred - self.metadata_allowance())
        own = self.batch_bytes.get(rnd, 0) + TX_SLACK_BYTES
        return check_size(tx_bytes, own, self.g.c_b)

    def rbc_prevote_ready(self, instance) -> bool:
        channel, proposer, rnd = instance
        if channel == ALERT_CHANNEL:
            return rnd <= self.alert_next[proposer]
        if channel != self.unit_channel:
            return False
        return self.dag.height >= rnd - 1

    def rbc_decode(self, instance, blob):
        channel, proposer, rnd = instance
        if channel == ALERT_CHANNEL:
            try:
                alert = AlertMessage.decode(blob)
            except (DecodeError, ValueError):
                return None
            if alert.issuer != proposer or alert.alert_id != rnd:
                return None
            return alert if alert.verify(self.public_keys, self.backend) else None
        try:
            u = canonical_decode(blob)
        except (DecodeError, ValueError):
            return None
        if u.creator != proposer or u.round != rnd:
            return None
        if intrinsic_violations(u, self.n, self.public_keys, self.backend):
            return None
        return u

    def rbc_commit_ready(self, instance, obj):
        if obj is None:
            return INVALID
        if isinstance(obj, AlertMessage):
            return READY
        if instance[0] != self.unit_channel:
            return WAIT
        if any(p not in self.dag for p in obj.parents):
            return WAIT
        return INVALID if self.violations(obj) else READY

    def rbc_output(self, instance, obj):
        if self.world is not None:
            self.rbc_outputs[instance] = (self.now, self.world.async_round)
            self.world.on_rbc_output(self.me, instance, obj)
        if isinstance(obj, AlertMessage):
            self.on_alert_output(instance, obj)
        elif instance[0] == self.unit_channel:
            self.stage(obj)

    # -- ordering -------------------------------------------------------------------------

    def after_growth(self):
        if self.phase == "setup":
            self.check_setup()
            return
        if self.phase != "main":
            return
        for r, head, batch in self.orderer.extend():
            for h in batch:
                for pos, tx in self.log.append_unit(h, self.dag.units[h].txs):
                    if self.world is not None:
                        self.world.on_output(self.me, pos, tx)
            if self.world is not None:
                self.world.record("head", self.me, r, head.hex()[:16])

    def check_setup(self):
        if self.setup_done_at is not None:
            return
        head = self.consensus.choose_head(6)
        if head is None:
            return
        self.setup_head = head
        chosen = self.dag.units[head].creator
        self.combined_keys = self.setup_beacon.combined_keys(chosen)
        self.setup_done_at = (self.now, self.world.async_round if self.world else 0)
        if self.world is not None:
            self.world.record("setup", self.me, chosen)

    # -- toss -------------------------------------------------------------------------------

    def start_toss(self, nonce: bytes):
        if nonce in self.toss_sessions:
            return
        session = self.toss_sessions[nonce] = TossSession(self.me, nonce, self.combined_keys, self.backend)
        share = self.toss_share(session)
        if share is not None:
            self.send(None, TossShareMsg(nonce, share, self.backend.element_len))
            self._toss_add(session, share)

    def toss_share(self, session):
        return session.own_share()

    def on_toss_share(self, msg: TossShareMsg):
        session = self.toss_sessions.get(msg.nonce)
        if session is None:
            if self.combined_keys is None:
                return
            self.start_toss(msg.nonce)
            session = self.toss_sessions[msg.nonce]
        self._toss_add(session, msg.share)

    def _toss_add(self, session, share):
        had = session.output
        out = session.add(share)
        if out is not None and had is None:
            self.toss_outputs[session.nonce] = (out, self.now, self.world.async_round if self.world else 0)

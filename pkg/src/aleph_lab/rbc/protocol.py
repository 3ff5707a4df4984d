"""Reliable broadcast of units with erasure-coded shares.

One RbcEngine lives inside each node. The node supplies the DAG-specific
hooks: the size check, the round gate before prevoting, decoding and
validation, the parent wait before committing, and output delivery.
"""

from dataclasses import dataclass

from ..wire import DecodeError, Reader, Writer
from . import erasure, merkle

PROPOSE, PREVOTE, COMMIT = "propose", "prevote", "commit"
_KIND_CODE = {PROPOSE: 0, PREVOTE: 1, COMMIT: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}

UNIT_CHANNEL = 0
ALERT_CHANNEL = 1

# host answers for rbc_commit_ready
READY, WAIT, INVALID = "ready", "wait", "invalid"


@dataclass(frozen=True)
class RbcMessage:
    kind: str
    sender: int
    instance: tuple  # (channel, proposer, round)
    root: bytes
    branch: tuple = ()
    share: bytes = b""

    @property
    def size(self) -> int:
        base = 1 + 2 + 1 + 2 + 4 + 32
        if self.kind == COMMIT:
            return base
        return base + 1 + 32 * len(self.branch) + 4 + len(self.share)


def encode_message(m: RbcMessage) -> bytes:
    channel, proposer, rnd = m.instance
    w = Writer().u8(_KIND_CODE[m.kind]).u16(m.sender).u8(channel).u16(proposer).u32(rnd)
    w.raw(m.root)
    if m.kind != COMMIT:
        w.u8(len(m.branch))
        for h in m.branch:
            w.raw(h)
        w.blob(m.share)
    return w.getvalue()


def decode_message(data: bytes) -> RbcMessage:
    r = Reader(data)
    code = r.u8()
    if code not in _CODE_KIND:
        raise DecodeError("unknown rbc message kind")
    kind = _CODE_KIND[code]
    sender = r.u16()
    instance = (r.u8(), r.u16(), r.u32())
    root = r.raw(32)
    branch, share = (), b""
    if kind != COMMIT:
        branch = tuple(r.raw(32) for _ in range(r.u8()))
        share = r.blob()
    r.done()
    return RbcMessage(kind, sender, instance, root, branch, share)


def make_proposals(sender: int, instance: tuple, blob: bytes, n: int, f: int) -> list:
    """Propose message j carries share j and its Merkle branch."""
    shares = erasure.encode(blob, f + 1, n)
    levels = merkle.build(shares)
    root = levels[-1][0]
    return [
        RbcMessage(PROPOSE, sender, instance, root, merkle.branch(levels, j), shares[j])
        for j in range(n)
    ]


def reencoded_root(blob: bytes, n: int, f: int) -> bytes:
    return merkle.root(erasure.encode(blob, f + 1, n))


# root -> blob for roots already shown to be a correct encoding. Merkle-checked
# shares under such a root always decode to the same blob, so simulated nodes
# can share the result.
_VERIFIED = {}
_VERIFIED_LIMIT = 1 << 14


def _decode_verified(root: bytes, bucket: dict, n: int, f: int):
    key = (root, n, f)
    blob = _VERIFIED.get(key)
    if blob is not None:
        return blob
    try:
        blob = erasure.decode(bucket, f + 1, n)
    except ValueError:
        return None
    if reencoded_root(blob, n, f) != root:
        return None
    if len(_VERIFIED) >= _VERIFIED_LIMIT:
        _VERIFIED.clear()
    _VERIFIED[key] = blob
    return blob


def check_size(tx_count: int, own_batch: int, c_b: float) -> bool:
    """False iff the inferred transaction count exceeds C_B times our own batch."""
    return not tx_count > c_b * own_batch


class _Instance:
    __slots__ = (
        "proposal_seen", "pending_prevote", "prevotes", "prevote_senders",
        "commits", "commit_senders", "decoded", "awaiting", "commit_sent",
        "output", "terminated",
    )

    def __init__(self):
        self.proposal_seen = False
        self.pending_prevote = None
        self.prevotes = {}
        self.prevote_senders = set()
        self.commits = {}
        self.commit_senders = set()
        self.decoded = {}
        self.awaiting = None
        self.commit_sent = False
        self.output = False
        self.terminated = False


class RbcEngine:
    def __init__(self, me: int, n: int, f: int, host):
        self.me, self.n, self.f = me, n, f
        self.host = host
        self.instances = {}
        self.waiting = set()
        self.out = []

    def state(self, instance) -> _Instance:
        st = self.instances.get(instance)
        if st is None:
            st = self.instances[instance] = _Instance()
        return st

    def output_done(self, instance) -> bool:
        st = self.instances.get(instance)
        return st is not None and st.output

    # -- entry points -------------------------------------------------------

    def propose(self, instance, blob: bytes) -> list:
        msgs = make_proposals(self.me, instance, blob, self.n, self.f)
        for j, m in enumerate(msgs):
            if j != self.me:
                self.out.append((j, m))
        self._on_propose(msgs[self.me])
        return self.flush()

    def handle(self, msg: RbcMessage) -> list:
        self._dispatch(msg)
        return self.flush()

    def poll(self) -> list:
        for instance in list(self.waiting):
            st = self.instances[instance]
            if st.terminated or st.output:
                self.waiting.discard(instance)
                continue
            if st.pending_prevote is not None and self.host.rbc_prevote_ready(instance):
                root, branch, share = st.pending_prevote
                st.pending_prevote = None
                self._multicast(RbcMessage(PREVOTE, self.me, instance, root, branch, share))
            if st.awaiting is not None:
                self._try_commit(instance, st)
            if st.pending_prevote is None and st.awaiting is None:
                self.waiting.discard(instance)
        return self.flush()

    def flush(self) -> list:
        out, self.out = self.out, []
        return out

    # -- internals ----------------------------------------------------------

    def _multicast(self, msg):
        self.out.append((None, msg))
        self._dispatch(msg)

    def _dispatch(self, msg):
        if msg.kind == PROPOSE:
            self._on_propose(msg)
        elif msg.kind == PREVOTE:
            self._on_prevote(msg)
        elif msg.kind == COMMIT:
            self._on_commit(msg)

    def _on_propose(self, msg):
        instance = msg.instance
        if msg.sender != instance[1]:
            return
        st = self.state(instance)
        if st.proposal_seen or st.terminated:
            return
        st.proposal_seen = True
        if not merkle.verify(msg.root, self.me, msg.share, msg.branch, self.n):
            return
        if not self.host.rbc_check_size(instance, msg.share):
            return
        if self.host.rbc_prevote_ready(instance):
            self._multicast(RbcMessage(PREVOTE, self.me, instance, msg.root, msg.branch, msg.share))
        else:
            st.pending_prevote = (msg.root, msg.branch, msg.share)
            self.waiting.add(instance)

    def _on_prevote(self, msg):
        st = self.state(msg.instance)
        if st.terminated or msg.sender in st.prevote_senders:
            return
        if not merkle.verify(msg.root, msg.sender, msg.share, msg.branch, self.n):
            return
        st.prevote_senders.add(msg.sender)
        bucket = st.prevotes.setdefault(msg.root, {})
        bucket[msg.sender] = msg.share
        if len(bucket) >= 2 * self.f + 1 and msg.root not in st.decoded:
            obj = self._reconstruct(msg.instance, st, msg.root)
            if obj is None:
                st.terminated = True
                return
            st.awaiting = msg.root
            self._try_commit(msg.instance, st)
        # a node waiting on 2f+1 commits may only now have enough shares
        if not st.output and len(st.commits.get(msg.root, ())) >= 2 * self.f + 1:
            self._try_output(msg.instance, st, msg.root)

    def _reconstruct(self, instance, st, root):
        if root in st.decoded:
            return st.decoded[root]
        bucket = st.prevotes.get(root, {})
        if len(bucket) < self.f + 1:
            return None
        obj = None
        blob = _decode_verified(root, bucket, self.n, self.f)
        if blob is not None:
            obj = self.host.rbc_decode(instance, blob)
        st.decoded[root] = obj
        return obj

    def _try_commit(self, instance, st):
        root = st.awaiting
        obj = st.decoded.get(root)
        verdict = self.host.rbc_commit_ready(instance, obj)
        if verdict == WAIT:
            self.waiting.add(instance)
            return
        st.awaiting = None
        if verdict == INVALID:
            st.terminated = True
            return
        if not st.commit_sent:
            st.commit_sent = True
            self._multicast(RbcMessage(COMMIT, self.me, instance, root))

    def _on_commit(self, msg):
        st = self.state(msg.instance)
        if st.terminated or msg.sender in st.commit_senders:
            return
        st.commit_senders.add(msg.sender)
        voters = st.commits.setdefault(msg.root, set())
        voters.add(msg.sender)
        if len(voters) >= self.f + 1 and not st.commit_sent:
            st.commit_sent = True
            self._multicast(RbcMessage(COMMIT, self.me, msg.instance, msg.root))
        if len(voters) >= 2 * self.f + 1 and not st.output:
            self._try_output(msg.instance, st, msg.root)

    def _try_output(self, instance, st, root):
        obj = self._reconstruct(instance, st, root)
        if obj is None:
            if root in st.decoded and len(st.prevotes.get(root, {})) >= self.f + 1:
                # enough shares but they do not decode to the committed root
                st.decoded.pop(root)
            return
        st.output = True
        st.awaiting = None
        st.pending_prevote = None
        self.waiting.discard(instance)
        self.host.rbc_output(instance, obj)

"""Atomic-step asynchronous network.

Each step the scheduler picks one node and a subset of the messages pending
for it. The node reads them, computes until it has nothing left to do and
hands back what it wants to send. Asynchronous rounds are tracked online:
round 0 ends once every node has acted, and round i ends at the first later
step by which every message sent during round i-1 has been delivered.
"""

import hashlib
from collections import Counter, defaultdict

from ..abcast import MetricsSink, tx_id
from .messages import msg_kind


class HarnessFault(RuntimeError):
    """A scheduler held a message longer than the fairness horizon."""


class BudgetExhausted(RuntimeError):
    pass


class Message:
    __slots__ = ("id", "src", "dst", "payload", "kind", "size", "sent_step", "sent_round")

    def __init__(self, mid, src, dst, payload, sent_step):
        self.id = mid
        self.src = src
        self.dst = dst
        self.payload = payload
        self.kind = msg_kind(payload)
        self.size = payload.size
        self.sent_step = sent_step
        self.sent_round = 0


class AsyncRoundTracker:
    def __init__(self, n: int):
        self.n = n
        self.round = 0
        self.bounds = []  # bounds[i] = last step of async round i
        self.acted = set()
        self.outstanding = Counter()

    def on_send(self, msg: Message):
        msg.sent_round = self.round
        self.outstanding[self.round] += 1

    def on_deliver(self, msg: Message):
        self.outstanding[msg.sent_round] -= 1

    def on_act(self, node: int):
        if self.round == 0:
            self.acted.add(node)

    def end_step(self, step: int):
        if self.round == 0:
            done = len(self.acted) == self.n
        else:
            done = step > self.bounds[-1] and self.outstanding[self.round - 1] == 0
        if done:
            self.bounds.append(step)
            self.outstanding.pop(self.round - 1, None)
            self.round += 1


def recompute_async_rounds(n: int, first_acts: dict, trace, last_step: int) -> list:
    """Round boundaries from a full message trace, straight from the definition.

    trace rows are (sent_step, delivered_step or None).
    """
    if len(first_acts) < n:
        return []
    bounds = [max(first_acts.values())]
    if bounds[0] > last_step:
        return []
    lo = -1
    while True:
        hi = bounds[-1]
        window = [d for s, d in trace if lo < s <= hi]
        if any(d is None for d in window):
            return bounds
        nxt = max([hi + 1] + window)
        if nxt > last_step:
            return bounds
        bounds.append(nxt)
        lo = hi


class SimWorld:
    def __init__(self, nodes, scheduler, horizon=None, keep_trace=False, byzantine=()):
        self.nodes = nodes
        self.n = len(nodes)
        self.scheduler = scheduler
        self.horizon = horizon if horizon is not None else 50 * self.n
        self.steps = 0
        self.next_id = 0
        self.pending = {}  # every undelivered message, in send order
        self.pending_for = [dict() for _ in nodes]
        self.tracker = AsyncRoundTracker(self.n)
        self.metrics = MetricsSink()
        self.byzantine = frozenset(byzantine)
        self.max_delay = 0
        self.keep_trace = keep_trace
        self.trace = {}  # id -> [sent_step, delivered_step]
        self.first_acts = {}
        self.adversary_view = []  # payloads delivered to byzantine nodes
        self._digest = hashlib.sha256()
        self.events = []  # (step, event...) rows for the trace export
        self.round_of_step = []
        self.tx_inputs = {}  # tx id -> async round of the first honest input
        self.outputs = {}  # tx id -> {node: async round}
        self.rbc_log = defaultdict(dict)  # instance -> {node: (step, async round, digest)}
        self.rbc_started = {}  # instance -> (step, async round) of the first proposal
        self.height_series = defaultdict(list)  # node -> dag height at each round end
        for node in nodes:
            node.world = self

    # -- sending ------------------------------------------------------------------

    def send(self, src: int, dst: int, payload):
        m = Message(self.next_id, src, dst, payload, self.steps)
        self.next_id += 1
        self.tracker.on_send(m)
        self.pending[m.id] = m
        self.pending_for[dst][m.id] = m
        self.metrics.sent(src, m.kind, m.size)
        if self.keep_trace:
            self.trace[m.id] = [m.sent_step, None]
        return m

    def _dispatch(self, src, outgoing):
        for dst, payload in outgoing:
            if dst is None:
                for j in range(self.n):
                    if j != src:
                        self.send(src, j, payload)
            elif dst != src:
                self.send(src, dst, payload)

    # -- stepping -----------------------------------------------------------------

    @property
    def async_round(self) -> int:
        return self.tracker.round

    def step(self):
        now = self.steps
        node_idx, deliver = self.scheduler.choose(self)
        msgs = []
        for m in deliver:
            del self.pending[m.id]
            del self.pending_for[node_idx][m.id]
            self.tracker.on_deliver(m)
            delay = now - m.sent_step
            if delay > self.max_delay:
                self.max_delay = delay
            if self.keep_trace:
                self.trace[m.id][1] = now
            msgs.append((m.src, m.payload))
        if node_idx in self.byzantine:
            self.adversary_view.extend(p for _, p in msgs)
        self.tracker.on_act(node_idx)
        self.first_acts.setdefault(node_idx, now)
        before = self.next_id
        outgoing = self.nodes[node_idx].step(now, msgs)
        self._dispatch(node_idx, outgoing)
        self.round_of_step.append(self.tracker.round)
        closed = self.tracker.round
        self.tracker.end_step(now)
        if self.tracker.round != closed:
            self._sample_heights(closed)
        self._digest.update(
            b"%d|%d|%s|%d|%d;" % (now, node_idx, ",".join(str(m.id) for m in deliver).encode(),
                                   before, self.next_id)
        )
        self.steps += 1
        if self.pending:
            oldest = next(iter(self.pending.values()))
            if now - oldest.sent_step >= self.horizon:
                raise HarnessFault(
                    f"message {oldest.id} ({oldest.kind} {oldest.src}->{oldest.dst}) "
                    f"pending since step {oldest.sent_step}, horizon {self.horizon}"
                )

    def run_until(self, predicate=None, max_steps=10_000, strict=False) -> bool:
        """Step until predicate(world) holds; False if the budget ran out."""
        for _ in range(max_steps):
            if predicate is not None and predicate(self):
                return True
            self.step()
        reached = predicate is not None and predicate(self)
        if strict and not reached:
            raise BudgetExhausted(f"predicate not reached in {max_steps} steps")
        return reached

    # -- node callbacks --------------------------------------------------------------

    def input_tx(self, node: int, tx: bytes):
        tid = tx_id(tx)
        if node not in self.byzantine:
            self.tx_inputs.setdefault(tid, self.tracker.round)
        self.nodes[node].input_tx(tx)

    def on_output(self, node: int, pos: int, tx: bytes):
        tid = tx_id(tx)
        rnd = self.tracker.round
        self.outputs.setdefault(tid, {})[node] = rnd
        start = self.tx_inputs.get(tid)
        if start is not None and node not in self.byzantine:
            self.metrics.latency(node, tid, start, rnd)
        self.record("out", node, pos, tid.hex())

    def on_insert(self, node: int, unit, dag):
        pass

    def on_rbc_propose(self, node: int, instance):
        self.rbc_started.setdefault(instance, (self.steps, self.tracker.round))

    def on_rbc_output(self, node: int, instance, obj):
        digest = getattr(obj, "hash", None) or obj.encode()[:32]
        self.rbc_log[instance][node] = (self.steps, self.tracker.round, digest)

    def _sample_heights(self, closed_round: int):
        for i, node in enumerate(self.nodes):
            dag = getattr(node, "dag", None)
            if dag is not None and i not in self.byzantine:
                self.height_series[i].append(dag.height)
                self.metrics.height(i, closed_round, dag.height)

    def record(self, *event):
        self._digest.update(repr(event).encode() + b";")
        self.events.append((self.steps,) + event)

    def digest(self) -> str:
        return self._digest.copy().hexdigest()

    def brute_force_bounds(self) -> list:
        if not self.keep_trace:
            raise ValueError("brute-force recomputation needs keep_trace=True")
        rows = [(s, d) for s, d in self.trace.values()]
        return recompute_async_rounds(self.n, self.first_acts, rows, self.steps - 1)

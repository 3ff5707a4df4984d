"""Delivery schedulers. Each picks one node per step and the messages it reads.

All of them deliver every message within the world's fairness horizon:
once a message gets old enough it becomes urgent, and the node it is
addressed to is stepped with all of its urgent messages.
"""

from ..crypto import ConfigError


class Scheduler:
    name = "base"

    def urgent_threshold(self, world) -> int:
        return max(1, world.horizon - 2 * world.n)

    def urgent_node(self, world):
        if not world.pending:
            return None
        oldest = next(iter(world.pending.values()))
        if world.steps - oldest.sent_step >= self.urgent_threshold(world):
            return oldest.dst
        return None

    def choose(self, world):
        raise NotImplementedError


class FairRandom(Scheduler):
    """Random node; each pending message is read with probability p."""

    name = "fair"

    def __init__(self, rng, p: float = 0.5):
        self.rng = rng
        self.p = p

    def urgent_threshold(self, world) -> int:
        return max(1, world.horizon // 2)

    def choose(self, world):
        node = self.urgent_node(world)
        if node is None:
            node = self.rng.randrange(world.n)
        limit = self.urgent_threshold(world)
        now = world.steps
        rnd = self.rng.random
        deliver = [
            m
            for m in world.pending_for[node].values()
            if now - m.sent_step >= limit or rnd() < self.p
        ]
        return node, deliver


class Synchronous(Scheduler):
    """Round-robin in batches of N steps; a node reads everything sent before
    the current batch started, so every message lands in the next batch."""

    name = "sync"

    def choose(self, world):
        now = world.steps
        node = now % world.n
        start = now - node
        deliver = [m for m in world.pending_for[node].values() if m.sent_step < start]
        return node, deliver


class AdversarialDelay(Scheduler):
    """Policies:

    lag    -- a rotating set of `victims` nodes has everything it sends held
              back until the message turns urgent.
    jitter -- every message gets a heavy-tailed random delay.
    """

    name = "adversarial"

    def __init__(self, rng, policy="lag", victims=1, period=None, candidates=None, alpha=1.2):
        if policy not in ("lag", "jitter"):
            raise ConfigError(f"unknown delay policy {policy!r}")
        self.rng = rng
        self.policy = policy
        self.victims = victims
        self.period = period
        self.candidates = candidates
        self.alpha = alpha
        self.due = {}

    def victim_set(self, world, step):
        pool = self.candidates if self.candidates is not None else list(range(world.n))
        period = self.period or 4 * world.n
        start = (step // period) * self.victims
        return {pool[(start + j) % len(pool)] for j in range(min(self.victims, len(pool)))}

    def _delay(self, world, m):
        d = self.due.get(m.id)
        if d is None:
            if self.policy == "lag":
                d = self.urgent_threshold(world) if m.src in self.victim_set(world, m.sent_step) else 0
            else:
                d = min(int(self.rng.paretovariate(self.alpha)) - 1, self.urgent_threshold(world))
            self.due[m.id] = d
        return d

    def choose(self, world):
        node = self.urgent_node(world)
        if node is None:
            node = self.rng.randrange(world.n)
        now = world.steps
        deliver = []
        for m in world.pending_for[node].values():
            age = now - m.sent_step
            if age >= self._delay(world, m) and (age >= self.urgent_threshold(world) or self.rng.random() < 0.5):
                deliver.append(m)
                self.due.pop(m.id, None)
        return node, deliver


class Crash(Scheduler):
    """Wraps another scheduler; the crashed nodes are replaced by silent ones
    when the world is built."""

    name = "crash"

    def __init__(self, inner, crashed, f):
        if len(set(crashed)) > f:
            raise ConfigError(f"cannot crash {len(set(crashed))} nodes with f={f}")
        self.inner = inner
        self.crashed = frozenset(crashed)

    def choose(self, world):
        return self.inner.choose(world)


SCHEDULERS = ("fair", "sync", "adversarial", "jitter", "crash")

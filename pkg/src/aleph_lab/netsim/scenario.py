"""Scenario configs: build a world from a JSON-like dict and run it."""

import statistics
from dataclasses import asdict, dataclass, field, fields

from ..crypto import BACKENDS, ConfigError, DedicatedKeyPairs, generate_keys
from ..crypto.signing import keygen
from .byzantine import node_class
from .forkbomb import BombMember, Coalition
from .node import Genesis, Node
from .rng import derive_rng
from .schedulers import SCHEDULERS, AdversarialDelay, Crash, FairRandom, Synchronous
from .world import SimWorld


@dataclass
class Scenario:
    n: int = 4
    f: int = None
    mode: str = "aleph"
    consensus_mode: str = None
    beacon: str = "dealer"
    scheduler: str = "fair"
    byzantine: list = field(default_factory=list)
    tx_rate: float = 0.2  # expected transactions injected per step
    tx_size: int = 32
    tx_copies: int = 1  # honest nodes each transaction is input to
    seed: int = 0
    budget: int = 20_000  # steps
    rounds: int = 8  # stop once every honest node ordered this many heads
    tosses: int = 0
    backend: str = "tiny"
    hardened: bool = True
    horizon: int = None
    keep_trace: bool = False
    max_round: int = None
    track_heads: bool = False
    victims: int = None  # adversarial scheduler: lagged nodes per period
    attack_K: int = 6
    attack_round: int = 1
    out_dir: str = None
    repeat: int = 1

    def __post_init__(self):
        self.byzantine = list(self.byzantine)
        if self.f is None:
            self.f = (self.n - 1) // 3

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sc = cls(**data)
        sc.validate()
        return sc

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self):
        if self.n != 3 * self.f + 1:
            raise ConfigError(f"n must equal 3f+1 (n={self.n}, f={self.f})")
        if len(self.byzantine) > self.f:
            raise ConfigError(f"{len(self.byzantine)} byzantine nodes exceed f={self.f}")
        if self.mode not in ("aleph", "quick"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.consensus_mode not in (None, "aleph", "quick"):
            raise ConfigError(f"unknown consensus mode {self.consensus_mode!r}")
        if self.beacon not in ("dealer", "trustless"):
            raise ConfigError(f"unknown beacon {self.beacon!r}")
        if self.beacon == "trustless" and self.mode != "aleph":
            raise ConfigError("the trustless beacon runs over reliable broadcast (mode aleph)")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.budget < 0 or self.repeat < 1:
            raise ConfigError("budget must be >= 0 and repeat >= 1")
        for b in self.byzantine:
            if b != "fork_bomb":
                node_class(b)

    @property
    def byzantine_ids(self) -> list:
        """Byzantine nodes take the highest indices."""
        return list(range(self.n - len(self.byzantine), self.n))

    @property
    def honest_ids(self) -> list:
        return list(range(self.n - len(self.byzantine)))


def make_genesis(sc: Scenario) -> Genesis:
    backend = BACKENDS[sc.backend]
    rng = derive_rng(sc.seed, "keys")
    pairs = [keygen(rng, backend) for _ in range(sc.n)]
    g = Genesis(
        n=sc.n, f=sc.f, backend=backend, mode=sc.mode, consensus_mode=sc.consensus_mode,
        beacon=sc.beacon, hardened=sc.hardened,
        signing_sk=[sk for sk, _ in pairs], signing_pk=[pk for _, pk in pairs],
        track_heads=sc.track_heads, max_round=sc.max_round,
    )
    if sc.beacon == "dealer":
        _, g.dealer_keys = generate_keys(sc.n, sc.f, rng, backend)
    else:
        g.pair_keys = DedicatedKeyPairs.generate(sc.n, rng, backend)
    return g


def make_scheduler(sc: Scenario, crashed=()):
    rng = derive_rng(sc.seed, "scheduler")
    if sc.scheduler == "fair":
        return FairRandom(rng)
    if sc.scheduler == "sync":
        return Synchronous()
    if sc.scheduler == "adversarial":
        return AdversarialDelay(rng, "lag", victims=sc.victims or max(1, sc.f))
    if sc.scheduler == "jitter":
        return AdversarialDelay(rng, "jitter")
    return Crash(FairRandom(rng), crashed, sc.f)


def build_world(sc: Scenario):
    sc.validate()
    g = make_genesis(sc)
    byz = dict(zip(sc.byzantine_ids, sc.byzantine))
    coalition = None
    bombers = [i for i, b in byz.items() if b == "fork_bomb"]
    if bombers:
        coalition = Coalition(sc.attack_K, sc.attack_round, bombers, sc.honest_ids, g)
    nodes = []
    for i in range(sc.n):
        rng = derive_rng(sc.seed, "node", i)
        b = byz.get(i)
        if b is None:
            nodes.append(Node(i, g, rng))
        elif b == "fork_bomb":
            node = BombMember(i, g, rng)
            node.coalition = coalition
            nodes.append(node)
        else:
            nodes.append(node_class(b)(i, g, rng))
    crashed = [i for i, b in byz.items() if b in ("crash", "crashed")]
    world = SimWorld(
        nodes, make_scheduler(sc, crashed), horizon=sc.horizon, keep_trace=sc.keep_trace,
        byzantine=sc.byzantine_ids,
    )
    world.genesis = g
    world.coalition = coalition
    return world


class Run:
    """A built world plus the driver loop for one scenario."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.world = build_world(sc)
        self.honest = sc.honest_ids
        self.tx_rng = derive_rng(sc.seed, "txs")
        self.tx_count = 0
        self.budget_left = sc.budget
        self.toss_starts = {}

    @property
    def honest_nodes(self):
        return [self.world.nodes[i] for i in self.honest]

    def inject(self):
        if self.sc.tx_rate <= 0 or self.world.nodes[self.honest[0]].phase != "main":
            return
        rate = self.sc.tx_rate
        while rate > 0:
            if self.tx_rng.random() < min(rate, 1.0):
                tx = b"tx-%d-" % self.tx_count
                tx += self.tx_rng.randbytes(max(0, self.sc.tx_size - len(tx)))
                self.tx_count += 1
                for node in self.tx_rng.sample(self.honest, min(self.sc.tx_copies, len(self.honest))):
                    self.world.input_tx(node, tx)
            rate -= 1.0

    def run_until(self, predicate, inject=True) -> bool:
        w = self.world
        while self.budget_left > 0:
            if predicate(self):
                return True
            if inject:
                self.inject()
            w.step()
            self.budget_left -= 1
        return predicate(self)

    # -- predicates -------------------------------------------------------------

    def ordered(self, rounds):
        return lambda run: all(len(nd.orderer.head_rounds) >= rounds for nd in run.honest_nodes)

    @staticmethod
    def setup_done(run) -> bool:
        return all(nd.setup_done_at is not None for nd in run.honest_nodes)

    # -- phases -------------------------------------------------------------------

    def run_setup(self) -> bool:
        return self.run_until(Run.setup_done, inject=False)

    def switch_phase(self, phase):
        for nd in self.world.nodes:
            if not isinstance(nd, Node):
                continue
            if phase == "main":
                if nd.combined_keys is None:
                    nd.phase = "toss"  # never finished setup; stays out of the main DAG
                    continue
                nd.start_main_phase()
            else:
                nd.phase = phase

    def toss(self, index: int) -> bool:
        nonce = b"toss|%d" % index
        self.toss_starts[nonce] = self.world.async_round
        for nd in self.world.nodes:
            if isinstance(nd, Node) and nd.combined_keys is not None:
                nd.start_toss(nonce)
        return self.run_until(
            lambda run: all(nonce in nd.toss_outputs for nd in run.honest_nodes), inject=False
        )

    def execute(self) -> bool:
        """Run the scenario to its natural end; False if the budget ran out."""
        if self.sc.beacon == "trustless":
            if not self.run_setup():
                return False
            self.switch_phase("toss")
            for t in range(self.sc.tosses):
                if not self.toss(t):
                    return False
            if self.sc.rounds <= 0:
                return True
            self.switch_phase("main")
        return self.run_until(self.ordered(self.sc.rounds))

    # -- reporting -----------------------------------------------------------------

    def summary(self) -> dict:
        w = self.world
        lat = sorted(r["latency"] for r in w.metrics.rows if r["kind"] == "latency")
        rounds = max(1, w.async_round)
        per_node = [w.metrics.total_bytes(i) / rounds for i in self.honest]
        heads = [len(nd.orderer.head_rounds) for nd in self.honest_nodes]
        return {
            "seed": self.sc.seed,
            "steps": w.steps,
            "async_rounds": w.async_round,
            "txs_input": self.tx_count,
            "txs_output_all": sum(
                1 for outs in w.outputs.values() if all(i in outs for i in self.honest)
            ),
            "latency_median": statistics.median(lat) if lat else None,
            "latency_p95": percentile(lat, 95) if lat else None,
            "bytes_per_node_round": statistics.mean(per_node) if per_node else 0.0,
            "heads_decided": min(heads) if heads else 0,
            "max_delay": w.max_delay,
            "digest": w.digest(),
        }


def percentile(sorted_values, pct):
    if not sorted_values:
        return None
    k = max(0, min(len(sorted_values) - 1, round(pct / 100 * (len(sorted_values) - 1))))
    return sorted_values[k]


def run_scenario(sc: Scenario) -> Run:
    run = Run(sc)
    run.completed = run.execute()
    return run


"""Acceptance suites: each runs seeded scenarios and checks one criterion."""

import itertools
import math
import random
import statistics
from dataclasses import dataclass, field

import numpy as np

from .abcast import is_prefix
from .beacon import DealerBeacon
from .chdag import ChDag
from .consensus import Consensus, ConflictingDecision
from .crypto import TINY, combine_shares, create_share, generate_keys, generate_signature
from .netsim import Node, Run, Scenario
from .netsim.world import HarnessFault

SIZES = (4, 7, 16)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seeds: list = field(default_factory=list)  # seeds of failing runs, for replay

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        tail = f" replay seeds: {self.seeds[:10]}" if self.seeds else ""
        return f"[{verdict}] criterion {self.number:>2} {self.name}: {self.detail}{tail}"


def _honest_pairs(run):
    return itertools.combinations(run.honest_nodes, 2)


def safety_violations(run) -> int:
    """Prefix violations between honest logs plus split decisions."""
    bad = 0
    for a, b in _honest_pairs(run):
        if not is_prefix(a.log.entries, b.log.entries):
            bad += 1
        if not is_prefix(a.orderer.linord, b.orderer.linord):
            bad += 1
    bits = {}
    for nd in run.honest_nodes:
        for u0, bit in nd.consensus._decided.items():
            if bits.setdefault(u0, bit) != bit:
                bad += 1
        for u0 in nd.dag.units:
            try:
                nd.consensus.audit(u0)
            except ConflictingDecision:
                bad += 1
    return bad


# -- 1 ------------------------------------------------------------------------------


def criterion_safety(runs_per_size=50, rounds=5) -> CriterionResult:
    total, bad_seeds, faults = 0, [], 0
    for n in SIZES:
        f = (n - 1) // 3
        for seed in range(runs_per_size):
            quick = seed % 2 == 1
            sc = Scenario(
                n=n, mode="quick" if quick else "aleph", scheduler="adversarial",
                byzantine=["forker" if quick else "equivocator"] * f,
                seed=seed, rounds=rounds, budget=200_000, tx_rate=0.3,
            )
            run = Run(sc)
            try:
                run.execute()
            except HarnessFault:
                faults += 1
                bad_seeds.append((n, seed))
                continue
            v = safety_violations(run)
            total += v
            if v:
                bad_seeds.append((n, seed))
    runs = runs_per_size * len(SIZES)
    return CriterionResult(
        1, "safety", total == 0 and faults == 0,
        f"{runs} adversarial runs with f forkers/equivocators, {total} violations, {faults} harness faults",
        bad_seeds,
    )


# -- 2 ------------------------------------------------------------------------------


def censorship_run(n, seed, inject_steps=None, budget=60_000):
    """Inject txs (each to one honest node) for a while, then wait for all of
    them to be output everywhere. Returns (run, delivered_all)."""
    sc = Scenario(n=n, seed=seed, scheduler="fair", tx_rate=0.2, budget=budget, rounds=0)
    run = Run(sc)
    stop = inject_steps if inject_steps is not None else 40 * n
    run.run_until(lambda r: r.world.steps >= stop)

    def delivered(r):
        w = r.world
        return len(w.outputs) == r.tx_count and all(
            all(i in outs for i in r.honest) for outs in w.outputs.values()
        )

    return run, run.run_until(delivered, inject=False)


def criterion_censorship(runs=50) -> CriterionResult:
    failed = []
    for seed in range(runs):
        n = SIZES[seed % len(SIZES)]
        run, ok = censorship_run(n, seed)
        if not ok or run.tx_count == 0:
            failed.append((n, seed))
    return CriterionResult(
        2, "censorship resilience", not failed,
        f"{runs - len(failed)}/{runs} fair runs output every single-node tx at all honest nodes",
        failed,
    )


# -- 3 ------------------------------------------------------------------------------


def head_latencies(run) -> dict:
    """Z_r per round: the smallest extra height after which every honest
    local copy knows the round-r head (max over honest nodes)."""
    z = {}
    for nd in run.honest_nodes:
        o = nd.orderer
        for r, h in o.first_height.items():
            lo = o.bottom_height.get(r)
            zr = (lo - r + 1) if lo is not None else (h - r)
            z[r] = max(z.get(r, 0), zr)
    return z


def geometric_ratio(z_values, k_min=6) -> float:
    """Slope of log P(Z >= K) for K >= k_min, as a per-step ratio."""
    z = np.asarray(z_values)
    ks, logs = [], []
    for k in range(k_min, int(z.max()) + 1 if len(z) else k_min):
        p = float(np.mean(z >= k))
        if p > 0:
            ks.append(k)
            logs.append(math.log(p))
    if len(ks) < 2:
        return 0.0  # tail empty past k_min: no mass left to decay
    slope = np.polyfit(ks, logs, 1)[0]
    return float(math.exp(slope))


def criterion_head_latency(rounds=300, n=16, seed=0) -> CriterionResult:
    sc = Scenario(
        n=n, mode="quick", consensus_mode="aleph", seed=seed, rounds=rounds,
        budget=400_000, tx_rate=0.0, track_heads=True,
    )
    run = Run(sc)
    run.execute()
    z = head_latencies(run)
    values = [z[r] for r in sorted(z) if r < rounds]
    if len(values) < rounds:
        return CriterionResult(3, "head latency tail", False, f"only {len(values)} rounds measured", [seed])
    ratio = geometric_ratio(values)
    mean = statistics.mean(values)
    ok = ratio <= 0.7 and mean <= 8
    return CriterionResult(
        3, "head latency tail", ok,
        f"{len(values)} rounds at N={n}: tail ratio {ratio:.3f} (<= 0.7), mean delay {mean:.2f} (<= 8) DAG-rounds",
        [] if ok else [seed],
    )


# -- 4 ------------------------------------------------------------------------------


class DecisionMonitor:
    """Snapshots each honest node's round-r units when its height reaches r+4."""

    def __init__(self, run):
        self.snap = {}
        self.honest = set(run.honest)
        run.world.on_insert = self.on_insert

    def on_insert(self, node, unit, dag):
        if node not in self.honest:
            return
        r = dag.height - 4
        if r >= 0 and (node, r) not in self.snap:
            self.snap[(node, r)] = set(dag.by_round.get(r, ()))


def decision_violations(run, monitor, margin=6):
    """(rounds with fewer than 2f+1 units decided 1, late units decided 1)."""
    few, late = 0, 0
    f = run.sc.f
    for nd in run.honest_nodes:
        d, cons = nd.dag, nd.consensus
        for r in range(0, d.height - margin + 1):
            ones = sum(1 for u in d.by_round.get(r, ()) if cons.decide(u) == 1)
            if ones < 2 * f + 1:
                few += 1
        for u0, bit in cons._decided.items():
            if bit != 1:
                continue
            r = d.rounds[u0]
            for (node, rr), present in monitor.snap.items():
                if rr == r and u0 not in present:
                    late += 1
    return few, late


def criterion_decisions(runs=10) -> CriterionResult:
    few_total, late_total, failed = 0, 0, []
    for seed in range(runs):
        n = (4, 7)[seed % 2]
        sched = ("fair", "adversarial")[(seed // 2) % 2]
        sc = Scenario(n=n, seed=seed, scheduler=sched, rounds=10, budget=200_000, tx_rate=0.1)
        run = Run(sc)
        monitor = DecisionMonitor(run)
        run.execute()
        few, late = decision_violations(run, monitor)
        few_total += few
        late_total += late
        if few or late:
            failed.append((n, seed))
    return CriterionResult(
        4, "fast decisions", not failed,
        f"{runs} runs: {few_total} rounds with < 2f+1 units decided 1, {late_total} late units decided 1",
        failed,
    )


# -- 5 ------------------------------------------------------------------------------


def rbc_latencies(run):
    """(worst output latency, worst agreement gap) over honest-proposer instances."""
    w = run.world
    worst_latency, worst_gap = 0, 0
    honest = set(run.honest)
    for inst, (_, start) in w.rbc_started.items():
        if inst[1] not in honest:
            continue
        outs = w.rbc_log.get(inst, {})
        rounds = [outs[i][1] for i in honest if i in outs]
        if len(rounds) < len(honest):
            continue  # still in flight when the run stopped
        worst_latency = max(worst_latency, max(rounds) - start)
        worst_gap = max(worst_gap, max(rounds) - min(rounds))
    return worst_latency, worst_gap


def equivocation_outputs(run) -> int:
    """Coordinates at which two different objects were output."""
    byz = set(run.sc.byzantine_ids)
    split = 0
    for inst, outs in run.world.rbc_log.items():
        if inst[1] in byz and len({v[2] for v in outs.values()}) > 1:
            split += 1
    return split


def criterion_rbc(runs=12) -> CriterionResult:
    failed, lat_max, gap_max, splits = [], 0, 0, 0
    for seed in range(runs):
        n = SIZES[seed % len(SIZES)]
        f = (n - 1) // 3
        sched = ("fair", "sync", "adversarial")[seed % 3]
        sc = Scenario(
            n=n, seed=seed, scheduler=sched, byzantine=["equivocator"] * f,
            rounds=5, budget=200_000, tx_rate=0.1,
        )
        run = Run(sc)
        run.execute()
        lat, gap = rbc_latencies(run)
        split = equivocation_outputs(run)
        lat_max, gap_max, splits = max(lat_max, lat), max(gap_max, gap), splits + split
        if lat > 3 or gap > 2 or split:
            failed.append((n, seed, sched))
    return CriterionResult(
        5, "ch-RBC", not failed,
        f"{runs} runs: worst output latency {lat_max} (<= 3), worst gap {gap_max} (<= 2) async-rounds, "
        f"{splits} split coords",
        failed,
    )


# -- 6 ------------------------------------------------------------------------------


def criterion_threshold(n=7, nonces=100, seed=0) -> CriterionResult:
    backend = TINY
    f = (n - 1) // 3
    rng = random.Random(seed)
    _, keys = generate_keys(n, f, rng, backend)
    mismatches, attempts, hits = 0, 0, 0
    for _ in range(nonces):
        m = rng.randbytes(16)
        shares = [create_share(m, keys.tk[i], i, backend) for i in range(n)]
        sigs = {generate_signature(m, list(sub), keys.vk, f, backend)
                for sub in itertools.combinations(shares, f + 1)}
        if len(sigs) != 1:
            mismatches += 1
        true_sig = sigs.pop()
        for sub in itertools.combinations(shares, f):
            attempts += 1
            if combine_shares(list(sub), backend) == true_sig:
                hits += 1
    freq = hits / attempts
    ok = mismatches == 0 and freq <= 2 / backend.q
    return CriterionResult(
        6, "threshold crypto", ok,
        f"{nonces} nonces at N={n}: {mismatches} subset mismatches; f-share hits {hits}/{attempts} "
        f"(freq {freq:.2e} <= {2 / backend.q:.2e})",
        [] if ok else [seed],
    )


# -- 7 ------------------------------------------------------------------------------


def beacon_run(n, seed, tosses=2, scheduler="fair"):
    f = (n - 1) // 3
    sc = Scenario(
        n=n, seed=seed, beacon="trustless", scheduler=scheduler, tosses=tosses, rounds=0,
        byzantine=["garbage_dealer+share_withholder"] * f, budget=200_000, tx_rate=0.0,
    )
    run = Run(sc)
    setup_ok = run.run_setup()
    setup_bytes = statistics.mean(run.world.metrics.total_bytes(i) for i in run.honest)
    run.switch_phase("toss")
    tosses_ok = setup_ok and all(run.toss(t) for t in range(tosses))
    return run, setup_ok, tosses_ok, setup_bytes


def correct_keys(run) -> int:
    b = run.world.genesis.backend
    count = 0
    for nd in run.honest_nodes:
        k = nd.combined_keys
        if k is not None and k.holds_correct_key(nd.me, b):
            count += 1
    return count


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def criterion_beacon(runs=30) -> CriterionResult:
    failed = []
    bytes_by_n = {n: [] for n in SIZES}
    for seed in range(runs):
        n = SIZES[seed % len(SIZES)]
        f = (n - 1) // 3
        run, setup_ok, tosses_ok, setup_bytes = beacon_run(n, seed)
        outputs = {
            nonce: {nd.toss_outputs.get(nonce, (None,))[0] for nd in run.honest_nodes}
            for nonce in run.toss_starts
        }
        equal = all(len(v) == 1 and None not in v for v in outputs.values())
        if not (setup_ok and tosses_ok and equal and correct_keys(run) >= 2 * f + 1):
            failed.append((n, seed))
        bytes_by_n[n].append(setup_bytes)
    xs = [n for n in SIZES if bytes_by_n[n]]
    slope = loglog_slope(xs, [statistics.mean(bytes_by_n[n]) for n in xs])
    ok = not failed and 1.8 <= slope <= 2.6
    sizes = ", ".join(f"N={n}: {statistics.mean(bytes_by_n[n]) / 1e3:.0f} kB" for n in xs)
    return CriterionResult(
        7, "trustless beacon", ok,
        f"{runs - len(failed)}/{runs} setups terminated with equal tosses and >= 2f+1 correct keys; "
        f"setup bytes/node {sizes}; log-log slope {slope:.2f} (in [1.8, 2.6])",
        failed,
    )


# -- 8 ------------------------------------------------------------------------------


def criterion_toss(runs=10, tosses=3) -> CriterionResult:
    failed, worst = [], 0
    for seed in range(runs):
        n = (4, 7)[seed % 2]
        run, setup_ok, tosses_ok, _ = beacon_run(n, seed, tosses=tosses, scheduler="sync")
        lat = 0
        for nonce, start in run.toss_starts.items():
            for nd in run.honest_nodes:
                out = nd.toss_outputs.get(nonce)
                lat = max(lat, 99 if out is None else out[2] - start)
        worst = max(worst, lat)
        if not tosses_ok or lat > 2:
            failed.append((n, seed))
    return CriterionResult(
        8, "toss latency", not failed,
        f"{runs * tosses} synchronous tosses, worst completion {worst} async-rounds (<= 2)",
        failed,
    )


# -- 9 ------------------------------------------------------------------------------


def cone_dag(dag, top_hash) -> ChDag:
    """A fresh DAG holding exactly the lower cone of one unit."""
    sub = ChDag(dag.n, dag.f, dag.mode)
    idx = dag.index[top_hash]
    members = [h for h in dag.hashes if dag.below[idx] >> dag.index[h] & 1]
    for h in sorted(members, key=lambda h: (dag.rounds[h], h)):
        sub.insert(dag.units[h])
    return sub


def criterion_quick_validation(rounds=100, n=7, seed=0) -> CriterionResult:
    f = (n - 1) // 3
    sc = Scenario(
        n=n, mode="quick", scheduler="sync", byzantine=["crash"] * f, seed=seed,
        rounds=rounds * n // (n - f) + 16, budget=600_000, tx_rate=0.0,
    )  # only rounds with an honest default creator count
    run = Run(sc)
    run.execute()
    nd = run.honest_nodes[0]
    dag = nd.dag
    keys = run.world.genesis.dealer_keys
    honest = set(run.honest)
    checked, misses = 0, 0
    r = 0
    while checked < rounds and r + 3 <= dag.height:
        default = nd.consensus.default_index(r)
        head = nd.consensus.choose_head(r)
        if default in honest:
            checked += 1
            for top in dag.by_round.get(r + 3, ()):
                sub = cone_dag(dag, top)
                beacon = DealerBeacon(nd.me, keys.for_node(nd.me), sub, run.world.genesis.backend, required=False)
                got = Consensus(sub, "quick", beacon.secret_bits).choose_head(r)
                if got is None or got != head:
                    misses += 1
                    break
        r += 1
    ok = checked >= rounds and misses == 0
    return CriterionResult(
        9, "quick 3-round validation", ok,
        f"{checked} rounds with an honest default creator, {misses} rounds where some single "
        f"round-(r+3) unit could not fix the head",
        [] if ok else [seed],
    )


# -- 10 -----------------------------------------------------------------------------


def bomb_run(mode, hardened, K=6, seed=0, extra_rounds=6, budget=60_000):
    """Run the fork bomb at N=37; returns a dict of storage measurements."""
    n, f = 37, 12
    sc = Scenario(
        n=n, mode=mode, hardened=hardened, byzantine=["fork_bomb"] * f, seed=seed,
        attack_K=K, tx_rate=0.0, budget=budget, rounds=0,
    )
    run = Run(sc)
    c = run.world.coalition
    target = c.final_round + extra_rounds
    series = []  # (step, min honest height, max stored units)

    def stored(nd):
        return set(nd.dag.units) | set(nd.staged) | set(nd.quarantine)

    def done(r):
        if r.world.steps % 200 == 0:
            hs = [nd.dag.height for nd in r.honest_nodes]
            series.append((r.world.steps, min(hs), max(len(stored(nd)) for nd in r.honest_nodes)))
        return c.built and all(nd.dag.height >= target for nd in r.honest_nodes)

    finished = run.run_until(done, inject=False)
    bomb = set(c.units)
    per_node = {nd.me: len(stored(nd) & bomb) for nd in run.honest_nodes}
    variants = max(len(v) for nd in run.honest_nodes for v in nd.dag.by_coords.values())
    heights = [nd.dag.height for nd in run.honest_nodes]
    totals = [len(stored(nd)) for nd in run.honest_nodes]
    return {
        "run": run, "finished": finished, "built": c.built, "bomb_units": len(bomb),
        "bomb_stored": per_node, "max_variants": variants, "heights": heights,
        "stored": totals, "series": series, "n": n, "K": K,
    }


def linear_growth(series, n) -> bool:
    """Stored units never exceed N units per DAG round reached."""
    return all(stored <= n * (h + 2) for _, h, stored in series)


def criterion_fork_bomb(K=6, seed=0) -> CriterionResult:
    weak = bomb_run("quick", False, K, seed)
    hard = bomb_run("quick", True, K, seed)
    need = 2 ** (K + 1) - 2
    weak_ok = weak["built"] and min(weak["bomb_stored"].values()) >= need
    n = hard["n"]
    hard_ok = (
        hard["built"] and hard["finished"] and hard["max_variants"] <= n
        and linear_growth(hard["series"] + [(0, min(hard["heights"]), max(hard["stored"]))], n)
    )
    return CriterionResult(
        10, "fork bomb", weak_ok and hard_ok,
        f"weakened: min bomb units stored {min(weak['bomb_stored'].values())} (>= {need}); "
        f"hardened: max variants {hard['max_variants']} (<= {n}), stored {max(hard['stored'])} "
        f"at height {min(hard['heights'])}, linear bound {'held' if hard_ok else 'broken'}",
        [] if weak_ok and hard_ok else [seed],
    )


# -- 11 -----------------------------------------------------------------------------


def replay_digest(sc: Scenario) -> tuple:
    run = Run(Scenario.from_dict(sc.to_dict()))
    run.execute()
    logs = tuple(tuple(nd.log.entries) for nd in run.honest_nodes)
    return run.world.digest(), logs


def criterion_determinism() -> CriterionResult:
    scenarios = [
        Scenario(n=4, seed=3, scheduler="adversarial", byzantine=["equivocator"], rounds=4),
        Scenario(n=7, seed=5, mode="quick", byzantine=["forker", "forker"], rounds=4),
        Scenario(n=4, seed=9, scheduler="jitter", rounds=4),
        Scenario(n=4, seed=11, beacon="trustless", tosses=1, rounds=2,
                 byzantine=["garbage_dealer+share_withholder"]),
        Scenario(n=7, seed=2, scheduler="crash", byzantine=["crash", "crash"], rounds=4),
    ]
    failed = [sc.seed for sc in scenarios if replay_digest(sc) != replay_digest(sc)]
    return CriterionResult(
        11, "determinism", not failed,
        f"{len(scenarios) - len(failed)}/{len(scenarios)} scenarios replayed bit-identically",
        failed,
    )


SUITES = {
    "safety": criterion_safety,
    "censorship": criterion_censorship,
    "latency": criterion_head_latency,
    "decisions": criterion_decisions,
    "rbc": criterion_rbc,
    "crypto": criterion_threshold,
    "beacon": criterion_beacon,
    "toss": criterion_toss,
    "quick": criterion_quick_validation,
    "forkbomb": criterion_fork_bomb,
    "determinism": criterion_determinism,
}


def run_suite(name: str) -> list:
    if name == "all":
        return [fn() for fn in SUITES.values()]
    if name not in SUITES:
        raise KeyError(name)
    return [SUITES[name]()]

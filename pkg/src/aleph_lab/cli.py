"""Command line entry point: run scenarios, the beacon, attacks and suites."""

import json
import logging
import os
import statistics
import sys
from pathlib import Path

import click

from . import suites
from .crypto import ConfigError
from .netsim import Run, Scenario
from .netsim.scenario import percentile
from .netsim.world import BudgetExhausted, HarnessFault

log = logging.getLogger("aleph_lab")

OVERRIDES = {
    "nodes": "n",
    "mode": "mode",
    "beacon": "beacon",
    "scheduler": "scheduler",
    "seed": "seed",
    "repeat": "repeat",
    "budget": "budget",
    "out_dir": "out_dir",
}


def _setup_logging():
    level = os.environ.get("ALEPH_LAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s")


def parse_byzantine(text: str) -> list:
    """'forker,forker' or 'forker:2,crash' -> list of behaviours."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, _, count = part.partition(":")
        out.extend([name] * (int(count) if count else 1))
    return out


def load_scenario(config, **flags) -> Scenario:
    data = {}
    if config:
        try:
            data = json.loads(Path(config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for flag, key in OVERRIDES.items():
        if flags.get(flag) is not None:
            data[key] = flags[flag]
    if flags.get("byzantine") is not None:
        data["byzantine"] = parse_byzantine(flags["byzantine"])
    if "n" in data and "f" not in data:
        data["f"] = (data["n"] - 1) // 3
    return Scenario.from_dict(data)


def scenario_options(fn):
    opts = [
        click.option("--config", type=click.Path(dir_okay=False), help="JSON scenario file."),
        click.option("--nodes", type=int, help="Number of nodes (3f+1)."),
        click.option("--byzantine", help="Comma list of behaviours, e.g. forker:2,crash."),
        click.option("--mode", type=click.Choice(["aleph", "quick"])),
        click.option("--beacon", type=click.Choice(["dealer", "trustless"])),
        click.option("--scheduler", type=click.Choice(["fair", "sync", "adversarial", "jitter", "crash"])),
        click.option("--seed", type=int),
        click.option("--repeat", type=int, help="Run this many consecutive seeds."),
        click.option("--budget", type=int, help="Step budget per run."),
        click.option("--out-dir", type=click.Path(file_okay=False), help="Write metrics, traces and summary here."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _fail(msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(2)


def _write_run(out: Path, run):
    w = run.world
    w.metrics.flush_bytes()
    out.mkdir(parents=True, exist_ok=True)
    (out / f"metrics-{run.sc.seed}.jsonl").write_text(w.metrics.to_jsonl())
    with open(out / f"trace-{run.sc.seed}.jsonl", "w") as fh:
        for ev in w.events:
            fh.write(json.dumps(ev, default=str) + "\n")


def _table(rows, columns):
    widths = [max(len(c), *(len(_cell(r.get(c))) for r in rows)) for c in columns]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(columns, widths))]
    for r in rows:
        lines.append("  ".join(_cell(r.get(c)).ljust(wd) for c, wd in zip(columns, widths)))
    return "\n".join(lines)


def _cell(v):
    if isinstance(v, float):
        return f"{v:.1f}"
    return "-" if v is None else str(v)


@click.group()
def main():
    """Asynchronous BFT atomic broadcast lab."""
    _setup_logging()


@main.command()
@scenario_options
def run(config, **flags):
    """Run a scenario (or --repeat consecutive seeds) and print a summary."""
    try:
        base = load_scenario(config, **flags)
    except ConfigError as exc:
        _fail(exc)
    rows, failures, latencies = [], 0, []
    for k in range(base.repeat):
        sc = Scenario.from_dict({**base.to_dict(), "seed": base.seed + k, "repeat": 1})
        r = Run(sc)
        try:
            done = r.execute()
            violations = suites.safety_violations(r)
        except (HarnessFault, BudgetExhausted) as exc:
            log.error("seed %d: %s", sc.seed, exc)
            done, violations = False, -1
        row = r.summary()
        row["completed"] = done
        row["violations"] = violations
        rows.append(row)
        latencies.extend(x["latency"] for x in r.world.metrics.rows if x["kind"] == "latency")
        failures += (not done) or violations != 0
        if base.out_dir:
            _write_run(Path(base.out_dir), r)
    columns = ["seed", "completed", "heads_decided", "async_rounds", "latency_median",
               "latency_p95", "bytes_per_node_round", "violations"]
    click.echo(_table(rows, columns))
    latencies.sort()
    aggregate = {
        "runs": len(rows),
        "failures": failures,
        "latency_median": statistics.median(latencies) if latencies else None,
        "latency_p95": percentile(latencies, 95),
        "bytes_per_node_round": statistics.mean(r["bytes_per_node_round"] for r in rows),
        "heads_decided_min": min(r["heads_decided"] for r in rows),
    }
    if base.repeat > 1:
        click.echo(
            f"aggregate over {len(rows)} seeds: median latency {_cell(aggregate['latency_median'])}, "
            f"p95 {_cell(aggregate['latency_p95'])} async-rounds"
        )
    if base.out_dir:
        Path(base.out_dir, "summary.json").write_text(
            json.dumps({"config": base.to_dict(), "runs": rows, "aggregate": aggregate}, indent=2, default=str)
        )
    sys.exit(1 if failures else 0)


@main.command()
@scenario_options
@click.option("--tosses", type=int, default=3, show_default=True, help="Tosses after the setup.")
def beacon(config, tosses, **flags):
    """Trustless setup followed by a number of tosses."""
    flags["beacon"] = "trustless"
    flags["mode"] = "aleph"
    try:
        sc = load_scenario(config, **flags)
    except ConfigError as exc:
        _fail(exc)
    sc.tosses, sc.rounds, sc.tx_rate = tosses, 0, 0.0
    r = Run(sc)
    click.echo(f"seed {sc.seed}: trustless setup with N={sc.n}, byzantine={sc.byzantine}")
    if not r.run_setup():
        click.echo("setup did not terminate within the budget")
        sys.exit(1)
    done = [nd.setup_done_at[1] for nd in r.honest_nodes]
    click.echo(f"setup done by async round {max(done)}")
    r.switch_phase("toss")
    ok = True
    results = []
    for t in range(tosses):
        finished = r.toss(t)
        nonce = b"toss|%d" % t
        values = {nd.toss_outputs[nonce][0].hex() for nd in r.honest_nodes if nonce in nd.toss_outputs}
        equal = finished and len(values) == 1
        ok &= equal
        results.append({"toss": t, "outputs": sorted(values), "equal": equal})
        click.echo(f"toss {t}: {', '.join(sorted(values)) or '-'}  {'equal' if equal else 'MISMATCH'}")
    click.echo("all honest outputs equal" if ok else "honest outputs differ or tosses incomplete")
    if sc.out_dir:
        _write_run(Path(sc.out_dir), r)
        Path(sc.out_dir, "beacon.json").write_text(json.dumps({"seed": sc.seed, "tosses": results}, indent=2))
    sys.exit(0 if ok else 1)


@main.command()
@click.option("--attack", "kind", type=click.Choice(["fork-bomb"]), default="fork-bomb", show_default=True)
@click.option("--K", "K", type=int, default=6, show_default=True, help="Fork-bomb depth.")
@click.option("--mode", type=click.Choice(["quick", "aleph"]), default="quick", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--budget", type=int, default=60_000, show_default=True)
def attack(kind, K, mode, seed, budget):
    """Fork bomb with N=37 and 12 colluders, weakened and hardened."""
    need = 2 ** (K + 1) - 2
    ok = True
    variants = [("weakened", False), ("hardened", True)] if mode == "quick" else [("reliable broadcast", True)]
    for label, hardened in variants:
        try:
            res = suites.bomb_run(mode, hardened, K=K, seed=seed, budget=budget)
        except ConfigError as exc:
            _fail(exc)
        counts = res["bomb_stored"]
        click.echo(f"{mode} {label} (seed {seed}, K={K}): bomb cone {res['bomb_units']} units, built={res['built']}")
        click.echo("  stored bomb units per honest node: " + " ".join(f"{i}:{c}" for i, c in sorted(counts.items())))
        click.echo(
            f"  stored units total max {max(res['stored'])}, height min {min(res['heights'])}, "
            f"max variants per coords {res['max_variants']}"
        )
        if mode == "aleph":
            passed = res["max_variants"] <= 1 and max(counts.values()) == 0
        elif hardened:
            passed = res["max_variants"] <= res["n"] and suites.linear_growth(res["series"], res["n"])
        else:
            passed = min(counts.values()) >= need
        click.echo(f"  {'PASS' if passed else 'FAIL'}")
        ok &= passed
    sys.exit(0 if ok else 1)


@main.command()
@click.argument("suite")
@click.option("--out-dir", type=click.Path(file_okay=False))
def verify(suite, out_dir):
    """Run an acceptance suite by name, or 'all'."""
    if suite != "all" and suite not in suites.SUITES:
        _fail(f"unknown suite {suite!r}; choose from all, {', '.join(suites.SUITES)}")
    results = suites.run_suite(suite)
    for res in results:
        click.echo(res.line())
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        Path(out_dir, f"verify-{suite}.json").write_text(
            json.dumps([res.__dict__ for res in results], indent=2, default=str)
        )
    sys.exit(0 if all(r.passed for r in results) else 1)


if __name__ == "__main__":
    main()

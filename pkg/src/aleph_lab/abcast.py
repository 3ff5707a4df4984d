"""Transaction intake, payload sampling and the ordered output log."""

import json
from collections import Counter

from .crypto import hash_bytes


class OrderFault(AssertionError):
    """The unit order handed to the log does not extend what was emitted."""


def tx_id(tx: bytes) -> bytes:
    return hash_bytes(tx)[:16]


class TxBuffer:
    def __init__(self, n: int, rng, c_b: float = 4.0):
        self.n = n
        self.rng = rng
        self.c_b = c_b
        self.pending = {}  # id -> tx, insertion ordered
        self.known = set()  # ids already in the dag or the log

    def __len__(self):
        return len(self.pending)

    def input_tx(self, tx: bytes) -> bool:
        tid = tx_id(tx)
        if tid in self.known or tid in self.pending:
            return False
        self.pending[tid] = tx
        return True

    def select_payload(self) -> list:
        """Each buffered tx joins the batch independently with probability 1/N."""
        if self.n <= 1:
            batch = list(self.pending.values())
        else:
            p = 1.0 / self.n
            batch = [tx for tx in self.pending.values() if self.rng.random() < p]
        for tx in batch:
            self.pending.pop(tx_id(tx), None)
        return batch

    def remove(self, txs):
        """Forget transactions that are now carried by some unit."""
        for tx in txs:
            tid = tx_id(tx)
            self.known.add(tid)
            self.pending.pop(tid, None)


class OutputLog:
    def __init__(self):
        self.entries = []  # (pos, tx)
        self.seen = set()
        self.units = []  # hashes of the units consumed so far, in order

    def __len__(self):
        return len(self.entries)

    def txs(self) -> list:
        return [tx for _, tx in self.entries]

    def append_unit(self, unit_hash, txs) -> list:
        self.units.append(unit_hash)
        events = []
        for tx in txs:
            tid = tx_id(tx)
            if tid in self.seen:
                continue
            self.seen.add(tid)
            pos = len(self.entries)
            self.entries.append((pos, tx))
            events.append((pos, tx))
        return events


def emit_outputs(order, log: OutputLog, units) -> list:
    """Emit Output(pos, tx) for units of `order` past what `log` consumed.

    `units` maps a unit hash to its tx tuple. The first occurrence of a tx wins.
    """
    done = len(log.units)
    if list(order[:done]) != log.units:
        raise OrderFault("new order does not extend the emitted prefix")
    events = []
    for h in order[done:]:
        events.extend(log.append_unit(h, units[h]))
    return events


def is_prefix(a, b) -> bool:
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    return list(long_[: len(short)]) == list(short)


METRIC_SCHEMA = {
    "type": "object",
    "required": ["kind", "node"],
    "properties": {
        "kind": {"enum": ["bytes", "latency", "height"]},
        "node": {"type": "integer", "minimum": 0},
        "round": {"type": "integer", "minimum": 0},
        "async_round": {"type": "integer", "minimum": 0},
        "bytes": {"type": "integer", "minimum": 0},
        "msg_kind": {"type": "string"},
        "tx_id": {"type": "string", "pattern": "^[0-9a-f]{32}$"},
        "latency": {"type": "integer", "minimum": 0},
        "height": {"type": "integer", "minimum": -1},
    },
    "additionalProperties": False,
}


class MetricsSink:
    """Append-only metric rows plus running per-node byte counters."""

    def __init__(self):
        self.rows = []
        self.bytes_by_kind = {}  # node -> Counter(kind -> bytes)

    def sent(self, node: int, kind: str, size: int):
        self.bytes_by_kind.setdefault(node, Counter())[kind] += size

    def total_bytes(self, node: int) -> int:
        return sum(self.bytes_by_kind.get(node, Counter()).values())

    def latency(self, node: int, tid: bytes, input_round: int, output_round: int):
        self.rows.append(
            {
                "kind": "latency",
                "node": node,
                "tx_id": tid.hex(),
                "async_round": output_round,
                "latency": output_round - input_round,
            }
        )

    def height(self, node: int, async_round: int, height: int):
        self.rows.append(
            {"kind": "height", "node": node, "async_round": async_round, "height": height}
        )

    def flush_bytes(self):
        for node in sorted(self.bytes_by_kind):
            for kind, size in sorted(self.bytes_by_kind[node].items()):
                self.rows.append({"kind": "bytes", "node": node, "msg_kind": kind, "bytes": size})

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.rows)


def record_metrics(events, sink: MetricsSink) -> MetricsSink:
    """Feed ("sent", node, kind, size) / ("output", node, tid, in_round, out_round)
    / ("height", node, async_round, height) tuples into a sink."""
    for ev in events:
        tag = ev[0]
        if tag == "sent":
            sink.sent(*ev[1:])
        elif tag == "output":
            sink.latency(*ev[1:])
        elif tag == "height":
            sink.height(*ev[1:])
        else:
            raise ValueError(f"unknown metric event {tag!r}")
    return sink

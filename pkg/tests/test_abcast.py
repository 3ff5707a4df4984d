import json
import math
import random
import statistics

import jsonschema
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aleph_lab.abcast import (
    METRIC_SCHEMA,
    MetricsSink,
    OrderFault,
    OutputLog,
    TxBuffer,
    emit_outputs,
    is_prefix,
    record_metrics,
    tx_id,
)
from aleph_lab.netsim import Run, Scenario


class TestTxBuffer:
    def test_duplicates_refused(self):
        buf = TxBuffer(4, random.Random(0))
        assert buf.input_tx(b"a")
        assert not buf.input_tx(b"a")
        buf.remove([b"b"])
        assert not buf.input_tx(b"b")
        assert len(buf) == 1

    def test_single_node_takes_everything(self):
        buf = TxBuffer(1, random.Random(0))
        for i in range(5):
            buf.input_tx(b"%d" % i)
        assert len(buf.select_payload()) == 5 and len(buf) == 0

    def test_batch_size_is_binomial(self):
        n, m, trials = 16, 400, 300
        rng = random.Random(7)
        sizes = []
        for t in range(trials):
            buf = TxBuffer(n, rng)
            for i in range(m):
                buf.input_tx(b"%d|%d" % (t, i))
            batch = buf.select_payload()
            assert len(buf) == m - len(batch)
            sizes.append(len(batch))
        p = 1 / n
        sigma = math.sqrt(m * p * (1 - p))
        assert abs(statistics.mean(sizes) - m * p) <= 3 * sigma / math.sqrt(trials)
        assert abs(statistics.pstdev(sizes) - sigma) <= 0.2 * sigma


class TestOutputLog:
    def test_first_occurrence_wins(self):
        log = OutputLog()
        units = {b"u1": (b"a", b"b"), b"u2": (b"b", b"c")}
        events = emit_outputs([b"u1", b"u2"], log, units)
        assert events == [(0, b"a"), (1, b"b"), (2, b"c")]
        assert log.txs() == [b"a", b"b", b"c"]

    def test_incremental_emission(self):
        log = OutputLog()
        units = {b"u1": (b"a",), b"u2": (b"b",)}
        emit_outputs([b"u1"], log, units)
        assert emit_outputs([b"u1", b"u2"], log, units) == [(1, b"b")]
        assert emit_outputs([b"u1", b"u2"], log, units) == []

    def test_rewritten_prefix_is_a_fault(self):
        log = OutputLog()
        units = {b"u1": (), b"u2": ()}
        emit_outputs([b"u1"], log, units)
        with pytest.raises(OrderFault):
            emit_outputs([b"u2", b"u1"], log, units)

    @given(st.lists(st.integers(0, 5)), st.lists(st.integers(0, 5)))
    def test_is_prefix_symmetric(self, a, b):
        assert is_prefix(a, b) == is_prefix(b, a)
        assert is_prefix(a, a + b)

    def test_tx_id_width(self):
        assert len(tx_id(b"")) == 16


class TestMetrics:
    def test_record_metrics_rows_follow_the_schema(self):
        sink = record_metrics(
            [("sent", 0, "unit", 10), ("sent", 0, "unit", 5), ("output", 1, b"\x01" * 16, 2, 5), ("height", 2, 3, 1)],
            MetricsSink(),
        )
        sink.flush_bytes()
        for row in sink.rows:
            jsonschema.validate(row, METRIC_SCHEMA)
        assert sink.total_bytes(0) == 15
        assert [r["latency"] for r in sink.rows if r["kind"] == "latency"] == [3]

    def test_unknown_event(self):
        with pytest.raises(ValueError):
            record_metrics([("teleport", 0)], MetricsSink())

    def test_run_rows_validate(self):
        run = Run(Scenario(n=4, rounds=6, seed=5))
        assert run.execute()
        run.world.metrics.flush_bytes()
        lines = run.world.metrics.to_jsonl().splitlines()
        assert lines
        kinds = set()
        for line in lines:
            row = json.loads(line)
            jsonschema.validate(row, METRIC_SCHEMA)
            kinds.add(row["kind"])
        assert kinds == {"bytes", "latency", "height"}


class TestEndToEnd:
    @pytest.mark.parametrize("mode", ["aleph", "quick"])
    def test_every_input_is_eventually_output_once(self, mode):
        run = Run(Scenario(n=4, mode=mode, rounds=12, tx_rate=0.3, seed=1))
        assert run.execute()
        honest = run.honest_nodes
        logs = [nd.log.txs() for nd in honest]
        for a in logs:
            assert len(set(a)) == len(a)
            for b in logs:
                assert is_prefix(a, b)
        assert len(logs[0]) > 0

    @pytest.mark.slow
    def test_latency_drops_with_more_copies(self):
        means = []
        for copies in (1, 4, 16):
            run = Run(Scenario(n=16, rounds=10, tx_copies=copies, tx_rate=0.5, seed=1, budget=60_000))
            assert run.execute()
            lat = [r["latency"] for r in run.world.metrics.rows if r["kind"] == "latency"]
            means.append(statistics.mean(lat))
        assert means[0] >= means[1] >= means[2]

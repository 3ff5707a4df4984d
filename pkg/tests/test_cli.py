import json

import jsonschema
from click.testing import CliRunner

from aleph_lab.abcast import METRIC_SCHEMA
from aleph_lab.cli import main, parse_byzantine


def invoke(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


def test_parse_byzantine():
    assert parse_byzantine("forker:2,crash") == ["forker", "forker", "crash"]
    assert parse_byzantine("") == []


def test_run_writes_outputs(tmp_path):
    res = invoke("run", "--nodes", "4", "--seed", "3", "--out-dir", str(tmp_path))
    assert res.exit_code == 0, res.output
    assert "latency_median" in res.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["aggregate"]["failures"] == 0
    for line in (tmp_path / "metrics-3.jsonl").read_text().splitlines():
        jsonschema.validate(json.loads(line), METRIC_SCHEMA)
    assert (tmp_path / "trace-3.jsonl").read_text()


def test_run_repeat_with_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 7, "mode": "quick", "byzantine": ["forker"], "rounds": 4}))
    res = invoke("run", "--config", str(cfg), "--seed", "1", "--repeat", "2")
    assert res.exit_code == 0, res.output
    assert "aggregate over 2 seeds" in res.output


def test_config_errors_exit_2(tmp_path):
    assert invoke("run", "--nodes", "5").exit_code == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 4, "warp": 9}))
    res = invoke("run", "--config", str(bad))
    assert res.exit_code == 2 and "warp" in res.output
    assert invoke("run", "--nodes", "4", "--byzantine", "forker:2").exit_code == 2


def test_unknown_option():
    assert CliRunner().invoke(main, ["run", "--speed", "3"]).exit_code == 2


def test_beacon_outputs_agree():
    res = invoke("beacon", "--nodes", "4", "--tosses", "2", "--seed", "2", "--byzantine", "garbage_dealer")
    assert res.exit_code == 0, res.output
    assert res.output.count("equal") >= 2
    assert "all honest outputs equal" in res.output


def test_verify_unknown_suite():
    res = invoke("verify", "warp")
    assert res.exit_code == 2


def test_verify_crypto_suite(tmp_path):
    res = invoke("verify", "crypto", "--out-dir", str(tmp_path))
    assert res.exit_code == 0, res.output
    assert res.output.startswith("[PASS] criterion  6")
    assert json.loads((tmp_path / "verify-crypto.json").read_text())[0]["passed"]

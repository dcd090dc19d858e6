import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from infexplore.cli import main
from infexplore.harness import (CSV_HEADER, ExperimentConfig, derive_seed, rows_to_csv,
                                rows_to_json, run_trial, run_trials, summarize, wilson_interval,
                                worker_count)


def test_derive_seed_deterministic_and_distinct():
    assert derive_seed(5, 7) == derive_seed(5, 7)
    rng = np.random.default_rng(0)
    ss = rng.integers(0, 2 ** 63, 10 ** 6, dtype=np.uint64).tolist()
    ii = rng.integers(0, 2 ** 31, 10 ** 6).tolist()
    assert all(derive_seed(s, 0) != derive_seed(s, 1) for s in ss)
    assert all(derive_seed(s, i) != derive_seed(s + 1, i) for s, i in zip(ss, ii))
    assert 0 <= derive_seed(2 ** 64 - 1, 2 ** 40) < 2 ** 64


def test_config_validation():
    with pytest.raises(ValueError, match="budget"):
        ExperimentConfig("fixed-budget", "uniform:0,1", {"alpha": 0.9, "beta": 0.8})
    with pytest.raises(ValueError):
        ExperimentConfig("fixed-budget", "uniform:0,1",
                         {"alpha": 0.9, "beta": 0.8, "budget": 100}, trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig("nonsense", "uniform:0,1")
    with pytest.raises(ValueError, match="reservoir"):
        ExperimentConfig("fixed-confidence", None, {"eta": .1, "eps": .1, "delta": .1})
    cfg = ExperimentConfig("adversary", None, dict(alpha=.6, beta=.4, eta=.3, rho=.25,
                                                   budget=1000))
    assert cfg.param("rho1") == 0.05
    assert cfg.with_param("budget", 10).params["budget"] == 10
    assert cfg.with_param("trials", 3).trials == 3


def test_deterministic_single_trial():
    cfg = ExperimentConfig("fixed-budget", "atoms:1.0@1.0",
                           {"alpha": 0.9, "beta": 0.8, "budget": 1000})
    rows, summary = run_trials(cfg)
    assert summary["success_rate"] == 1.0 and len(rows) == 1


MODE_CFGS = [
    ("fixed-confidence", "uniform:0,1", dict(eta=.1, eps=.1, delta=.1)),
    ("fixed-budget", "uniform:0,1", dict(alpha=.9, beta=.8, budget=10 ** 4)),
    ("baseline", "uniform:0,1", dict(beta=.8, budget=10 ** 4)),
    ("multi-arm", "uniform:0,1", dict(alpha=.9, beta=.8, budget=10 ** 4)),
    ("reduce-avg", "uniform:0,1", dict(eta=.2, eta2=.1, eps=.2, budget=10 ** 4)),
    ("reduce-half", "atoms:0.8@0.5,0.2@0.5", dict(eta=.3, eps=.2, budget=10 ** 4)),
    ("reduce-esssup", "uniform:0,1", dict(eps=.1, eps1=.25, budget=10 ** 4)),
    ("adversary", None, dict(alpha=.6, beta=.4, eta=.3, rho=.25, budget=1000)),
]


@pytest.mark.parametrize("mode,res,params", MODE_CFGS, ids=[m[0] for m in MODE_CFGS])
def test_every_mode_runs_and_aggregates(mode, res, params):
    cfg = ExperimentConfig(mode, res, params, trials=6, master_seed=4, timing=False)
    rows, summary = run_trials(cfg)
    assert [r.trial for r in rows] == list(range(6))
    assert all(r.ns == 0 for r in rows)
    succ = sum(r.success for r in rows)
    assert summary["failure_rate"] == pytest.approx(1 - succ / 6)
    lo, hi = wilson_interval(6 - succ, 6)
    assert (summary["wilson_lo"], summary["wilson_hi"]) == (lo, hi)
    samples = [r.samples for r in rows]
    assert summary["mean_samples"] == pytest.approx(np.mean(samples))
    assert summary["std_samples"] == pytest.approx(np.std(samples, ddof=1))
    assert summarize(cfg, rows) == summary
    # rows reproduce trial by trial
    assert run_trial(cfg, 3) == rows[3]


def test_fixed_budget_summary_fields():
    cfg = ExperimentConfig("fixed-budget", "uniform:0,1",
                           dict(alpha=.9, beta=.8, budget=10 ** 4), trials=20)
    _, s = run_trials(cfg)
    assert s["c_alpha_beta"] == pytest.approx((math.acos(-0.8) - math.acos(-0.6)) ** 2 / 2)
    assert 0 < s["rate_diagnostic"] < math.inf


def test_wilson_matches_closed_form():
    k, n, z = 7, 50, 1.959963984540054
    p = k / n
    c = (p + z * z / (2 * n)) / (1 + z * z / n)
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert wilson_interval(k, n) == pytest.approx((c - h, c + h), abs=1e-12)


def test_thread_count_does_not_change_output():
    cfg = ExperimentConfig("fixed-budget", "uniform:0,1",
                           dict(alpha=.9, beta=.8, budget=10 ** 4), trials=9, master_seed=3,
                           timing=False)
    a, _ = run_trials(cfg, 1)
    b, _ = run_trials(cfg, 3)
    assert rows_to_csv(a) == rows_to_csv(b)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("INFEXPLORE_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.delenv("INFEXPLORE_THREADS")
    assert worker_count() == 1


def test_csv_and_json_shapes():
    cfg = ExperimentConfig("adversary", None, dict(alpha=.6, beta=.4, eta=.3, rho=.25,
                                                   budget=1000), trials=2, timing=False)
    rows, s = run_trials(cfg)
    text = rows_to_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == CSV_HEADER and len(parsed) == 3
    data = json.loads(rows_to_json(rows, s))
    assert len(data["rows"]) == 2 and data["summary"]["mode"] == "adversary"


# --- CLI ----------------------------------------------------------------------------

def test_cli_smoke(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(["fixed-budget", "--reservoir", "uniform:0,1", "--alpha", "0.9", "--beta",
                 "0.8", "--budget", "100000", "--trials", "20", "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 21
    summary = json.loads(capsys.readouterr().out)
    assert summary["trials"] == 20 and summary["mode"] == "fixed-budget"


def test_cli_usage_errors(capsys):
    base = ["fixed-budget", "--reservoir", "uniform:0,1", "--alpha", "0.9", "--beta", "0.8"]
    assert main(base) == 2
    assert main(base + ["--budget", "100", "--bogus"]) == 2
    assert main(["fixed-budget", "--reservoir", "uniform:0,x", "--alpha", "0.9", "--beta",
                 "0.8", "--budget", "10"]) == 2
    assert "position 10" in capsys.readouterr().err
    assert main(["fixed-budget", "--reservoir", "uniform:0,1", "--alpha", "0.9", "--beta",
                 "0.95", "--budget", "100"]) == 2
    assert main([]) == 2


def test_cli_runtime_error(tmp_path):
    bad = tmp_path / "missing" / "r.csv"
    assert main(["fixed-budget", "--reservoir", "uniform:0,1", "--alpha", "0.9", "--beta",
                 "0.8", "--budget", "100", "--out", str(bad)]) == 1


def test_cli_sweep(capsys, tmp_path):
    code = main(["sweep", "--mode", "fixed-budget", "--param", "budget", "--values",
                 "1e4,1e5,1e6", "--reservoir", "uniform:0,1", "--alpha", "0.9", "--beta", "0.8",
                 "--trials", "2", "--out", str(tmp_path / "s.json")])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert [s["value"] for s in out] == [10 ** 4, 10 ** 5, 10 ** 6]
    assert main(["sweep", "--mode", "fixed-budget", "--param", "colour", "--values", "1",
                 "--reservoir", "uniform:0,1", "--alpha", "0.9", "--beta", "0.8",
                 "--budget", "10"]) == 2


def test_cli_trace_and_json(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    out = tmp_path / "r.json"
    assert main(["fixed-budget", "--reservoir", "uniform:0,1", "--alpha", "0.9", "--beta",
                 "0.8", "--budget", "5000", "--trials", "2", "--trace", str(trace),
                 "--format", "json", "--out", str(out)]) == 0
    rows = [json.loads(line) for line in trace.read_text().splitlines()]
    assert {r["trial"] for r in rows} == {0, 1}
    assert sum(r["decision"] == "output" for r in rows) == 2
    assert len(json.loads(out.read_text())["rows"]) == 2


def test_console_script_no_timing_threads(tmp_path):
    outs = []
    for threads in ("1", "2"):
        out = tmp_path / f"r{threads}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "infexplore.cli", "fixed-budget", "--reservoir",
             "uniform:0,1", "--alpha", "0.9", "--beta", "0.8", "--budget", "20000",
             "--trials", "6", "--seed", "1", "--no-timing", "--threads", threads,
             "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    proc = subprocess.run([sys.executable, "-m", "infexplore.cli", "fixed-budget"],
                          capture_output=True, text=True)
    assert proc.returncode == 2

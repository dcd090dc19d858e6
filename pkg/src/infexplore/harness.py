"""Deterministic Monte Carlo trials, aggregation and output.

Each trial gets its own seed derived from ``(master_seed, trial_id)`` and a
fresh environment, so results do not depend on how many worker processes run
or in which order trials finish. Rows are always emitted sorted by trial id.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import io
import json
import math
import os
import time

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from ._rng import derive_seed
from .adversary import run_adversarial, strength_report
from .env import BanditEnv
from .fisher import rate_constant
from .fixed_budget import build_schedule, run_fixed_budget, run_multi_arm, uniform_allocation
from .fixed_confidence import ConfidenceParams, solve_fixed_confidence
from .reductions import reduce_alpha_above_half, reduce_ess_sup, reduce_unknown_alpha_avg
from .reservoir import parse_reservoir

__all__ = [
    "MODES",
    "ExperimentConfig",
    "ResultRow",
    "derive_seed",
    "run_trial",
    "run_trials",
    "summarize",
    "rows_to_csv",
    "wilson_interval",
    "worker_count",
    "CSV_HEADER",
]

MODES = ("fixed-confidence", "fixed-budget", "baseline", "reduce-avg", "reduce-half",
         "reduce-esssup", "multi-arm", "adversary")

CSV_HEADER = ("trial", "seed", "true_mean", "samples", "arms", "success", "ns")

# parameters each mode cannot run without
REQUIRED = {
    "fixed-confidence": ("eta", "eps", "delta"),
    "fixed-budget": ("alpha", "beta", "budget"),
    "baseline": ("beta", "budget"),
    "reduce-avg": ("eta", "eta2", "eps", "budget"),
    "reduce-half": ("eta", "eps", "budget"),
    "reduce-esssup": ("eps", "eps1", "budget"),
    "multi-arm": ("alpha", "beta", "budget"),
    "adversary": ("alpha", "beta", "eta", "rho", "budget"),
}

DEFAULTS = {"rho": 0.05, "rho1": 0.05, "rho2": 0.1, "c_const": 4.0, "alg_rho": 0.05}


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    reservoir: str | None = None
    params: dict = field(default_factory=dict)
    trials: int = 1
    master_seed: int = 0
    timing: bool = True
    trace: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        missing = [k for k in REQUIRED[self.mode] if self.params.get(k) is None]
        if self.mode != "adversary" and self.reservoir is None:
            missing.insert(0, "reservoir")
        if missing:
            raise ValueError(f"mode {self.mode} needs: {', '.join(missing)}")

    def param(self, name):
        v = self.params.get(name)
        return DEFAULTS.get(name) if v is None else v

    def with_param(self, name, value):
        if name in ("trials", "seed", "master_seed"):
            key = "master_seed" if name != "trials" else "trials"
            return replace(self, **{key: int(value)})
        if name == "reservoir":
            return replace(self, reservoir=value)
        return replace(self, params={**self.params, name: value})


@dataclass
class ResultRow:
    trial: int
    seed: int
    true_mean: float
    samples: int
    arms: int
    success: bool
    ns: int
    info: dict = field(default_factory=dict)


def _schedule(cfg, N=None):
    return build_schedule(N=int(N or cfg.param("budget")), alpha=cfg.param("alpha"),
                          beta=cfg.param("beta"), rho=cfg.param("rho"),
                          rho1=cfg.param("rho1"), rho2=cfg.param("rho2"))


def _run_one(cfg, seed, res, schedule):
    """Returns ``(RunRecord, info, trace_rows)`` for one trial."""
    p = cfg.param
    mode = cfg.mode
    if mode == "adversary":
        N = int(p("budget"))
        alg_sched = build_schedule(N=N, alpha=p("alpha"), beta=p("beta"), rho=p("alg_rho"),
                                   rho1=p("rho1"), rho2=p("rho2"))
        rec, ledger = run_adversarial(lambda env: run_fixed_budget(env, alg_sched),
                                      N, p("rho"), p("alpha"), p("beta"), p("eta"), seed=seed)
        info = {"cost": ledger.cost, "declarations": len(ledger),
                "aborted": rec.extra["aborted"]}
        trace = [json.loads(e.to_json()) for e in ledger.entries] if cfg.trace else None
        return rec, info, trace
    budget = None if p("budget") is None else int(p("budget"))
    env = BanditEnv(res, seed, budget=budget)
    info = {}
    trace = None
    if mode == "fixed-confidence":
        rec = solve_fixed_confidence(env, ConfidenceParams(p("eta"), p("eps"), p("delta"),
                                                           p("c_const")))
    elif mode == "fixed-budget":
        rec = run_fixed_budget(env, schedule, trace=cfg.trace)
        trace = rec.trace
    elif mode == "baseline":
        rec = uniform_allocation(env, budget, p("beta"))
    elif mode == "multi-arm":
        env.budget = None
        rec = run_multi_arm(env, schedule)
        info = {"accepted": len(rec.extra["accepted"]), "n_bad": rec.extra["n_bad"]}
    else:
        env.budget = None
        common = dict(rho=p("rho"), rho1=p("rho1"), rho2=p("rho2"), C=p("c_const"))
        if mode == "reduce-avg":
            rec = reduce_unknown_alpha_avg(env, budget, p("eta"), p("eta2"), p("eps"), **common)
        elif mode == "reduce-half":
            rec = reduce_alpha_above_half(env, budget, p("eta"), p("eps"), **common)
        else:
            rec = reduce_ess_sup(env, budget, p("eps"), p("eps1"), **common)
        info = {"degenerate": rec.degenerate_params,
                "estimation_complete": rec.extra.get("estimation_complete")}
    return rec, info, trace


def run_trial(cfg, trial_id, _cache=None):
    seed = derive_seed(cfg.master_seed, trial_id)
    if _cache is None:
        _cache = _prepare(cfg)
    res, schedule = _cache
    t0 = time.perf_counter_ns()
    rec, info, trace = _run_one(cfg, seed, res, schedule)
    ns = time.perf_counter_ns() - t0 if cfg.timing else 0
    if trace is not None:
        info["trace"] = trace
    return ResultRow(trial_id, seed, rec.true_mean, rec.samples_used, rec.arms_touched,
                     bool(rec.success), ns, info)


def _prepare(cfg):
    res = parse_reservoir(cfg.reservoir) if cfg.reservoir is not None else None
    schedule = _schedule(cfg) if cfg.mode in ("fixed-budget", "multi-arm") else None
    return res, schedule


def _run_range(args):
    cfg, ids = args
    cache = _prepare(cfg)
    return [run_trial(cfg, i, cache) for i in ids]


def worker_count(threads=None):
    """Pool size: explicit value, else ``INFEXPLORE_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("INFEXPLORE_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def run_trials(cfg, threads=None):
    """Run every trial of ``cfg``; returns ``(rows, summary)``."""
    n = worker_count(threads)
    ids = list(range(cfg.trials))
    if n == 1 or cfg.trials == 1:
        rows = _run_range((cfg, ids))
    else:
        # interleaved slices keep slow and fast trials spread across workers
        parts = [(cfg, ids[k::n]) for k in range(n) if ids[k::n]]
        rows = []
        with ProcessPoolExecutor(max_workers=n) as pool:
            for chunk in pool.map(_run_range, parts):
                rows.extend(chunk)
    rows.sort(key=lambda r: r.trial)
    return rows, summarize(cfg, rows)


def wilson_interval(successes, n, alpha=0.05):
    lo, hi = proportion_confint(successes, n, alpha=alpha, method="wilson")
    return float(lo), float(hi)


def summarize(cfg, rows):
    n = len(rows)
    succ = sum(r.success for r in rows)
    fails = n - succ
    lo, hi = wilson_interval(fails, n)
    samples = np.array([r.samples for r in rows], dtype=np.float64)
    out = {
        "mode": cfg.mode,
        "reservoir": cfg.reservoir,
        "params": {k: v for k, v in cfg.params.items() if v is not None},
        "trials": n,
        "master_seed": cfg.master_seed,
        "successes": succ,
        "success_rate": succ / n,
        "failure_rate": fails / n,
        "wilson_lo": lo,
        "wilson_hi": hi,
        "wilson_half_width": (hi - lo) / 2.0,
        "mean_samples": float(samples.mean()),
        "std_samples": float(samples.std(ddof=1)) if n > 1 else 0.0,
        "mean_arms": float(np.mean([r.arms for r in rows])),
    }
    p = cfg.param
    if cfg.mode == "fixed-budget":
        N = int(p("budget"))
        scale = math.log(N) ** 2 / N
        censored = fails == 0
        # with no failures only an upper bound on the failure rate exists
        d_hat = hi if censored else fails / n
        out.update(rate_diagnostic=-math.log(d_hat) * scale,
                   rate_diagnostic_censored=censored,
                   c_alpha_beta=rate_constant(p("alpha"), p("beta")))
    elif cfg.mode == "multi-arm":
        acc = np.array([r.info["accepted"] for r in rows])
        bad = np.array([r.info["n_bad"] for r in rows])
        need = math.ceil(math.log(int(p("budget"))))
        out.update(mean_accepted=float(acc.mean()),
                   frac_trials_enough=float(np.mean(acc >= need)),
                   frac_bad_accepted=float(bad.sum() / max(1, acc.sum())),
                   required_accepted=need)
    elif cfg.mode == "adversary":
        costs = np.array([r.info["cost"] for r in rows])
        N = int(p("budget"))
        rep = strength_report(p("alpha"), p("beta"), p("rho"), N, float(costs.mean()))
        out.update(mean_cost=float(costs.mean()), max_cost=float(costs.max()),
                   aborted=int(sum(r.info["aborted"] for r in rows)),
                   normalized_cost=rep.normalized_cost, c_alpha_beta=rep.c_ab,
                   fitted_C=rep.fitted_C, implied_floor=rep.floor)
    elif cfg.mode.startswith("reduce"):
        out.update(degenerate_params=bool(any(r.info["degenerate"] for r in rows)),
                   estimation_completed=int(sum(bool(r.info["estimation_complete"])
                                                for r in rows)))
    return out


def _fmt_mean(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.trial, r.seed, _fmt_mean(r.true_mean), r.samples, r.arms,
                    int(r.success), r.ns])
    return buf.getvalue()


def rows_to_json(rows, summary):
    data = [{"trial": r.trial, "seed": r.seed,
             "true_mean": None if math.isnan(r.true_mean) else r.true_mean,
             "samples": r.samples, "arms": r.arms, "success": r.success, "ns": r.ns}
            for r in rows]
    return json.dumps({"rows": data, "summary": summary}, indent=1) + "\n"


def trace_lines(rows):
    out = []
    for r in rows:
        for item in r.info.get("trace") or ():
            out.append(json.dumps({"trial": r.trial, **item}))
    return "\n".join(out) + ("\n" if out else "")

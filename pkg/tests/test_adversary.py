import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infexplore.adversary import (BanditSource, BatchMeanAtMost, CompressedEnv, CostLedger,
                                  FinalArmBelow, InfeasibleDeclaration, MeanStaysBelow,
                                  PosteriorGrid, SamplingStalled, ThetaDropAtLeast, batch_set,
                                  batch_compress, declaration_log_probability,
                                  declaration_probability, run_adversarial, sample_conditioned,
                                  strength_report, toy_failure_frequency, uniform_allocation_toy)
from infexplore.env import BanditEnv
from infexplore.fisher import rate_constant, theta, theta_inv
from infexplore.fixed_budget import build_schedule, run_fixed_budget
from infexplore.fixed_confidence import ConfidenceParams, solve_fixed_confidence
from infexplore.reservoir import UniformInterval, admissible_reservoir

ALPHA, BETA, ETA = 0.6, 0.4, 0.3


# --- checkpoint set --------------------------------------------------------------

def test_batch_set_example():
    B = batch_set(10 ** 4, 0.25)
    assert (B.i2, B.step, B.i6) == (100, 10, 10 ** 6)
    v = B.values(2 * 10 ** 6)
    assert list(v[:100]) == list(range(1, 101))
    assert list(v[100:105]) == [110, 120, 130, 140, 150]
    assert 10 ** 6 in B and 10 ** 6 - 10 in B and 105 not in B
    assert list(v[v > 10 ** 6][:2]) == [math.floor(10 ** 6 * 1.25), math.floor(10 ** 6 * 1.25 ** 2)]
    assert B.max_ratio(10 ** 8) <= 1.25
    assert 1 in B


def test_batch_set_degenerate():
    with pytest.raises(ValueError):
        batch_set(3, 0.1)
    # at N=1e4, rho=0.1 the step N^rho=2 is too coarse after N^(2 rho)=6
    with pytest.raises(ValueError):
        batch_set(10 ** 4, 0.1)


def _floor_power(N, num, den):
    """floor(N ** (num / den)) in exact integer arithmetic."""
    target = N ** num
    k = int(round(N ** (num / den)))
    while k ** den > target:
        k -= 1
    while (k + 1) ** den <= target:
        k += 1
    return k


def _brute_set(N, rho, upto):
    r = Fraction(str(rho))
    i2 = _floor_power(N, 2 * r.numerator, r.denominator)
    step = _floor_power(N, r.numerator, r.denominator)
    i6 = _floor_power(N, 6 * r.numerator, r.denominator)
    vals = set(range(1, i2 + 1)) | set(range(step, i6 + 1, step)) | {i6}
    j = 1
    while True:
        v = math.floor(i6 * (1 + r) ** j)
        if v > upto:
            break
        vals.add(max(v, max(vals) + 1))
        j += 1
    return sorted(v for v in vals if v <= upto)


@pytest.mark.parametrize("N,rho", [(10 ** 4, 0.25), (200, 0.2), (1000, 0.25), (10 ** 5, 0.2)])
def test_batch_set_matches_brute_force(N, rho):
    B = batch_set(N, rho)
    upto = 4 * B.i6
    brute = _brute_set(N, rho, upto)
    assert list(B.values(upto)) == brute
    for n in range(1, min(brute[-1], 3000) + 1):
        assert B.next_above(n) == next(v for v in brute if v >= n)


@settings(max_examples=80, deadline=None)
@given(st.integers(10, 10 ** 9), st.floats(0.05, 0.3))
def test_batch_set_slowly_increasing(N, rho):
    try:
        B = batch_set(N, rho)
    except ValueError:
        return
    upto = min(5 * B.i6, B.i2 + 200_000 * B.step)
    v = B.values(upto).astype(float)
    assert v[0] == 1 and np.all(np.diff(v) > 0)
    assert np.max(v[1:] / (v[:-1] + 1)) <= 1 + rho + 1e-12


# --- compression -----------------------------------------------------------------

def _compressed(seed=0, N=10 ** 4, rho=0.25, budget=None):
    env = BanditEnv(UniformInterval(0, 1), seed)
    return env, CompressedEnv(BanditSource(env), batch_set(N, rho), budget)


def test_compress_single_pull():
    env, c = _compressed()
    i = c.new_arm()
    c.pull(i)
    assert env.pulls(0) == 1 and c.real_samples == 1


def test_compress_jump():
    env, c = _compressed()
    i = c.new_arm()
    c.pull_sum(i, 101)
    assert env.pulls(0) == 110 and c.pulls(i) == 101 and c.real_pulls(i) == 110
    c.pull_sum(i, 9)
    assert env.pulls(0) == 110


def test_compressed_rewards_are_stream_prefix():
    env, c = _compressed(seed=5)
    ref = BanditEnv(UniformInterval(0, 1), 5)
    i = c.new_arm()
    ref.new_arm()
    got = [c.pull(i) for _ in range(250)]
    want = [ref.pull(0) for _ in range(250)]
    assert got == want


def test_compress_fixed_confidence_identical_and_inflation():
    params = ConfidenceParams(0.1, 0.1, 0.1)
    rho = 0.2
    wrapped = batch_compress(lambda e: solve_fixed_confidence(e, params), batch_set(10 ** 4, rho))
    for seed in range(5):
        direct = solve_fixed_confidence(BanditEnv(UniformInterval(0, 1), seed), params)
        rec, cenv = wrapped(BanditEnv(UniformInterval(0, 1), seed))
        assert (rec.chosen, rec.samples_used, rec.extra["alpha_hat"]) == \
            (direct.chosen, direct.samples_used, direct.extra["alpha_hat"])
        assert 1.0 <= cenv.inflation <= 1 + rho


# --- declarations and posterior ---------------------------------------------------

def test_declaration_probability_examples():
    assert declaration_probability(PosteriorGrid.point(0.5), 3, BatchMeanAtMost(1.0)) == 1.0
    assert declaration_probability(PosteriorGrid.point(0.5), 2, BatchMeanAtMost(0.0)) == \
        pytest.approx(0.25, abs=1e-15)


def test_declaration_probability_uniform_grid_oracle():
    post = PosteriorGrid.uniform(0.4, 0.6, 2048)
    got = declaration_probability(post, 10, BatchMeanAtMost(0.5))
    want = math.fsum(w * math.comb(10, s) * x ** s * (1 - x) ** (10 - s)
                     for w, x in zip(post.weights, post.x) for s in range(6))
    assert abs(got - want) <= 1e-10
    assert abs(post.weights.sum() - 1) <= 1e-10


def test_running_mean_declarations():
    d = MeanStaysBelow(0.4)
    assert d.s_max(10, 3, 5) == 3           # floor(15 * 0.4) - 3
    drop = ThetaDropAtLeast(0.2)
    cap = drop.s_max(20, 12, 5)
    assert theta((12 + cap) / 25) <= theta(0.6) - 0.2 < theta((12 + cap + 1) / 25)
    assert ThetaDropAtLeast(4.0).s_max(20, 12, 5) == -1


def test_infeasible_declarations():
    with pytest.raises(InfeasibleDeclaration):
        declaration_probability(PosteriorGrid.point(1.0), 4, BatchMeanAtMost(0.5))
    with pytest.raises(InfeasibleDeclaration):
        declaration_probability(PosteriorGrid.point(0.5), 4, ThetaDropAtLeast(4.0), 10, 5)
    with pytest.raises(InfeasibleDeclaration):
        sample_conditioned(PosteriorGrid.point(0.5), 4, ThetaDropAtLeast(4.0),
                           np.random.default_rng(0), 10, 5)


def test_log_probability_survives_underflow():
    res = admissible_reservoir(ALPHA, BETA, ETA, 0.1)
    post = PosteriorGrid.from_reservoir(res, 2048).update(60_000, 100_000)
    lp = declaration_log_probability(post, 1, FinalArmBelow(BETA))
    assert -math.inf < lp < -700
    assert declaration_probability(post, 1, FinalArmBelow(BETA)) == 0.0


def test_grid_refinement_drift():
    res = admissible_reservoir(ALPHA, BETA, ETA, 0.1)
    coarse = PosteriorGrid.from_reservoir(res, 2048).update(30, 60)
    fine = PosteriorGrid.from_reservoir(res, 4 * 2048).update(30, 60)
    for d, n, r in [(BatchMeanAtMost(0.5), 0, 0), (MeanStaysBelow(0.55), 60, 30),
                    (ThetaDropAtLeast(0.05), 60, 30)]:
        a = declaration_probability(coarse, 12, d, n, r)
        b = declaration_probability(fine, 12, d, n, r)
        assert abs(a - b) <= 1e-6
    assert abs(coarse.mass_below(BETA) - fine.mass_below(BETA)) <= 1e-6


def test_prior_mass_below_beta_exact():
    res = admissible_reservoir(ALPHA, BETA, ETA, 0.1)
    post = PosteriorGrid.from_reservoir(res, 512)
    assert post.mass_below(BETA) == pytest.approx(res.cdf(BETA), abs=1e-12)


# --- conditioned sampling ----------------------------------------------------------

def test_sample_always_true_matches_posterior_mean():
    post = PosteriorGrid.uniform(0.4, 0.6, 512)
    rng = np.random.default_rng(1)
    m, n = 5, 10 ** 4
    means = np.array([sample_conditioned(post, m, BatchMeanAtMost(1.0), rng).mean()
                      for _ in range(n)])
    sd = math.sqrt(np.var(means) / n)
    assert abs(means.mean() - post.mean()) <= 3 * sd


def test_sample_point_posterior_forced_zero():
    out = sample_conditioned(PosteriorGrid.point(0.3), 3, BatchMeanAtMost(0.0),
                             np.random.default_rng(0))
    assert list(out) == [0, 0, 0]


def _exact_sum_law(post, m, s_max):
    pm = np.array([[math.comb(m, s) * x ** s * (1 - x) ** (m - s) for s in range(m + 1)]
                   for x in post.x])
    joint = post.weights @ pm
    joint[s_max + 1:] = 0
    return joint / joint.sum()


@pytest.mark.parametrize("method", ["rejection", "exact"])
def test_sample_conditional_frequencies(method):
    post = PosteriorGrid.uniform(0.3, 0.7, 512)
    d = BatchMeanAtMost(0.4)
    m = 5
    rng = np.random.default_rng(7)
    n = 10 ** 5
    counts = np.bincount([int(sample_conditioned(post, m, d, rng, method=method).sum())
                          for _ in range(n)], minlength=m + 1)
    tv = 0.5 * np.abs(counts / n - _exact_sum_law(post, m, d.s_max(0, 0, m))).sum()
    assert tv <= 0.01


def test_sampling_stalls_on_large_batches_and_falls_back_on_small():
    post = PosteriorGrid.point(0.9)
    rng = np.random.default_rng(0)
    with pytest.raises(SamplingStalled):
        sample_conditioned(post, 30, BatchMeanAtMost(0.0), rng, max_retries=1000)
    out = sample_conditioned(post, 10, BatchMeanAtMost(0.0), rng, max_retries=1000)
    assert out.sum() == 0


# --- ledger and adversarial runs ----------------------------------------------------

def test_ledger_additivity_and_json():
    led = CostLedger()
    ps = [0.5, 0.9, 1.0, 0.01]
    for t, p in enumerate(ps):
        led.add(t, 0, BatchMeanAtMost(0.5), p)
    costs = [e.cum_cost for e in led.entries]
    assert all(b - a == pytest.approx(-math.log(p), abs=1e-12)
               for a, b, p in zip([0.0] + costs, costs, ps))
    assert led.cost == pytest.approx(math.fsum(-math.log(p) for p in ps), abs=1e-12)
    rows = [json.loads(line) for line in led.to_jsonl().splitlines()]
    assert {"t", "declaration", "P_t", "cum_cost"} <= set(rows[0])
    with pytest.raises(InfeasibleDeclaration):
        led.add(9, 0, BatchMeanAtMost(0.5), 0.0)


def _fixed_budget_alg(N):
    s = build_schedule(N=N, alpha=ALPHA, beta=BETA, rho=0.05)
    return lambda env: run_fixed_budget(env, s)


def test_adversarial_fixed_budget_run():
    N, rho = 10 ** 4, 0.25
    rec, led = run_adversarial(_fixed_budget_alg(N), N, rho, ALPHA, BETA, ETA, seed=3)
    assert not rec.extra["aborted"]
    assert 0 < led.cost < math.inf
    assert rec.true_mean < BETA and rec.samples_used == N
    costs = [e.cum_cost for e in led.entries]
    assert all(b >= a for a, b in zip(costs, costs[1:]))
    step2 = [e for e in led.entries if isinstance(e.declaration, BatchMeanAtMost)]
    assert step2 and min(e.P for e in step2) >= 0.05
    assert isinstance(led.entries[-1].declaration, FinalArmBelow)


def test_declarations_hold_on_conditioned_paths():
    # verify=True asserts every batch against its declaration as it is drawn
    for seed in range(5):
        for N, rho in [(200, 0.2), (1000, 0.25)]:
            rec, led = run_adversarial(_fixed_budget_alg(N), N, rho, ALPHA, BETA, ETA,
                                       seed=seed, verify=True)
            assert len(led) >= 1
            assert all(0 < e.P <= 1 for e in led.entries)


def _never_pull(env):
    return env.new_arm()


def test_never_pulling_algorithm():
    rho = 0.25
    res = admissible_reservoir(ALPHA, BETA, ETA, rho)
    rec, led = run_adversarial(_never_pull, 10 ** 4, rho, ALPHA, BETA, ETA)
    assert len(led) == 1 and isinstance(led.entries[0].declaration, FinalArmBelow)
    c1 = res.levels[0]
    assert abs(led.cost + math.log(c1 * (BETA - res.gamma_lo))) <= 1e-9
    rep = strength_report(ALPHA, BETA, rho, 10 ** 4, led)
    assert rep.floor == pytest.approx(res.cdf(BETA), abs=1e-12)
    assert rec.true_mean < BETA


def test_strength_report():
    rep = strength_report(ALPHA, BETA, 0.25, 10 ** 4, CostLedger())
    assert rep.floor == 1.0 and rep.cost == 0.0
    assert rep.c_ab == rate_constant(ALPHA, BETA)
    for N in (10 ** 3, 10 ** 4, 10 ** 5):
        _, led = run_adversarial(_fixed_budget_alg(N), N, 0.25, ALPHA, BETA, ETA, seed=1)
        r = strength_report(ALPHA, BETA, 0.25, N, led)
        assert 0 < r.normalized_cost < math.inf
        assert r.normalized_cost == pytest.approx(led.cost * math.log(N) ** 2 / N)


def test_grid_size_floor():
    with pytest.raises(ValueError):
        run_adversarial(_never_pull, 10 ** 4, 0.25, ALPHA, BETA, ETA, G=256)


def test_failure_floor_toy():
    N, rho = 200, 0.2
    B = batch_set(N, rho)
    assert B.step <= 20
    worst = 0.0
    for seed in range(200):
        rec, led = run_adversarial(uniform_allocation_toy, N, rho, ALPHA, BETA, ETA, seed=seed)
        assert not rec.extra["aborted"]
        assert all(e.t - p.t <= 20 for p, e in zip(led.entries, led.entries[1:])
                   if not isinstance(e.declaration, FinalArmBelow))
        worst = max(worst, led.cost)
    freq = toy_failure_frequency(N, rho, ALPHA, BETA, ETA, 10 ** 5, seed=11)
    assert freq >= math.exp(-worst) / 3

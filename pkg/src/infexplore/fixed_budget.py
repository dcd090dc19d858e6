"""Fixed-budget selection with moving thresholds in Fisher-information space.

Arms are studied one at a time. Each arm is pulled up to a growing sequence
of checkpoints ``b_0 < b_1 < ...`` and dropped as soon as its empirical mean
falls to the threshold attached to the checkpoint. Up to ``b_{k0}`` the
thresholds are on the raw mean and drop by ``1/sqrt(ln N)`` per step; after
that they are on ``theta(p_hat)`` and drop by a constant multiple of the
Fisher distance between ``alpha`` and ``beta``. When the budget runs out the
arm under study is the output.

Two execution paths give identical results: a generic one that only uses the
pull interface (so wrappers such as the adversary's compressed environment
can drive it) and a block-vectorized one for :class:`~infexplore.env.BanditEnv`
that evaluates many arms at once from their reward streams before charging
the environment.
"""
from dataclasses import dataclass
import math

import numpy as np

from ._validation import ceil_int, check_count, check_env, check_scalar_in
from .env import BanditEnv, BudgetExhausted
from .fisher import fisher_distance, theta
from .records import RunRecord

__all__ = [
    "BudgetScheduleParams",
    "BudgetSchedule",
    "build_schedule",
    "should_reject",
    "run_fixed_budget",
    "run_multi_arm",
    "multi_arm_sizes",
    "uniform_allocation",
]

PHASE_RAW0, PHASE_RAW, PHASE_THETA = 0, 1, 2


@dataclass(frozen=True)
class BudgetScheduleParams:
    N: int
    alpha: float
    beta: float
    rho: float = 0.05
    rho1: float = 0.05
    rho2: float = 0.1

    def __post_init__(self):
        check_count(self.N, "N", 2)
        for name in ("rho", "rho1", "rho2"):
            check_scalar_in(getattr(self, name), name, 0.0, 1.0,
                            closed_low=False, closed_high=False)
        check_scalar_in(self.alpha, "alpha", 0.0, 1.0, closed_low=False, closed_high=False)
        check_scalar_in(self.beta, "beta", 0.0, 1.0, closed_low=False, closed_high=False)
        if not self.beta < self.alpha:
            raise ValueError(f"need beta < alpha, got alpha={self.alpha}, beta={self.beta}")
        # equality is allowed: alpha - 2 rho == beta only puts the first
        # theta-space threshold exactly at theta(beta)
        if self.alpha - 2 * self.rho < self.beta - 1e-12:
            raise ValueError(f"need alpha - 2*rho >= beta, got alpha={self.alpha}, "
                             f"rho={self.rho}, beta={self.beta}")


class BudgetSchedule:
    """Checkpoints ``b`` and thresholds ``tau`` with their comparison phase.

    Entries are produced up to the first checkpoint above ``N`` and extended
    on demand past that. ``tau`` holds raw (unclamped) values; a negative
    threshold can never be reached, so such a check never rejects.
    """

    def __init__(self, params):
        self.params = params
        p = params
        N = p.N
        self.log_n = math.log(N)
        self.b0 = max(1, ceil_int(p.rho1 * self.log_n ** 2))
        ratio = self.log_n ** 4 / self.b0
        self.k0 = max(0, ceil_int(math.log(ratio) / math.log1p(p.rho))) if ratio > 1 else 0
        self.theta_start = theta(p.alpha - 2 * p.rho)
        self.theta_step = fisher_distance(p.alpha, p.beta) * p.rho * (1 - p.rho2) / self.log_n
        self._b = [self.b0]
        self._extend_to_value(N)

    # construction ------------------------------------------------------

    def _next_b(self):
        k = len(self._b)
        r = 1.0 + self.params.rho
        if k <= self.k0:
            raw = ceil_int(self.b0 * r ** k)
        else:
            raw = ceil_int(r ** (k - self.k0) * self._b[self.k0])
        return max(raw, self._b[-1] + 1)

    def _extend_to_value(self, value):
        while self._b[-1] <= value:
            self._b.append(self._next_b())

    def _extend_to_index(self, k):
        while len(self._b) <= k:
            self._b.append(self._next_b())

    # queries -----------------------------------------------------------

    @property
    def b(self):
        return np.array(self._b, dtype=np.int64)

    @property
    def b_k0(self):
        self._extend_to_index(self.k0)
        return self._b[self.k0]

    def checkpoint(self, k):
        self._extend_to_index(k)
        return self._b[k]

    def phase(self, k):
        if k == 0:
            return PHASE_RAW0
        return PHASE_RAW if k <= self.k0 else PHASE_THETA

    def threshold(self, k):
        """Raw threshold of checkpoint ``k`` (mean scale or theta scale)."""
        p = self.params
        if k == 0:
            return p.alpha - p.rho
        if k <= self.k0:
            return p.alpha - p.rho - k / math.sqrt(self.log_n)
        return self.theta_start - (k - self.k0) * self.theta_step

    def clamped_threshold(self, k):
        hi = 1.0 if self.phase(k) != PHASE_THETA else math.pi
        return min(max(self.threshold(k), 0.0), hi)

    @property
    def tau(self):
        return np.array([self.threshold(k) for k in range(len(self._b))])

    def reject(self, k, p_hat):
        """Vectorized rejection test at checkpoint ``k`` (``<=`` rejects)."""
        p_hat = np.asarray(p_hat, dtype=np.float64)
        tau = self.threshold(k)
        if tau < 0.0:
            return np.zeros(p_hat.shape, dtype=bool)
        if self.phase(k) == PHASE_THETA:
            return np.asarray(theta(p_hat)) <= tau
        return p_hat <= tau


def build_schedule(params=None, **kwargs):
    """Build a :class:`BudgetSchedule` from params or keyword arguments."""
    if params is None:
        params = BudgetScheduleParams(**kwargs)
    return BudgetSchedule(params)


def should_reject(schedule, k, p_hat):
    return bool(schedule.reject(k, p_hat))


# ---------------------------------------------------------------------------
# single-output algorithm


def _trace_row(arm, k, n, p_hat, schedule, decision):
    return {"arm": int(arm), "checkpoint": int(k), "n": int(n), "p_hat": float(p_hat),
            "phase": schedule.phase(k), "threshold": schedule.threshold(k),
            "decision": decision}


def _budget_left(env, limit):
    left = limit
    rem = getattr(env, "remaining", None)
    if rem is not None:
        left = min(left, rem)
    return left


def _fixed_budget_generic(env, schedule, N, trace):
    start = env.samples_used
    while True:
        arm = env.new_arm()
        if env.samples_used - start >= N:
            # budget used up exactly at a rejection; the fresh arm is under study
            return arm
        pulled = reward = 0
        k = 0
        while True:
            need = schedule.checkpoint(k) - pulled
            take = min(need, N - (env.samples_used - start))
            try:
                reward += env.pull_sum(arm, take)
            except BudgetExhausted:
                return arm
            pulled += take
            if take < need:
                return arm
            p_hat = reward / pulled
            rej = bool(schedule.reject(k, p_hat))
            if trace is not None:
                trace.append(_trace_row(arm, k, pulled, p_hat, schedule,
                                        "reject" if rej else "continue"))
            if rej:
                break
            k += 1


def _fixed_budget_fast(env, schedule, left, trace):
    """Block evaluation of arm fates from peeked reward streams."""
    used = 0
    while True:
        budget = left - used
        m = int(min(8192, max(16, budget // schedule.b0 + 1)))
        idx = np.arange(env.n_arms, env.n_arms + m, dtype=np.int64)
        cost = np.zeros(m, dtype=np.int64)
        alive = np.ones(m, dtype=bool)
        sums = np.zeros(m, dtype=np.int64)
        levels = [] if trace is not None else None
        prev = 0
        k = 0
        while alive.any():
            b = schedule.checkpoint(k)
            if b > budget:
                break
            live = np.flatnonzero(alive)
            sums[live] += env.peek_sums(idx[live], prev, b - prev)
            p_hat = sums[live] / b
            rej = schedule.reject(k, p_hat)
            if levels is not None:
                levels.append((live, k, b, p_hat, rej))
            cost[live[rej]] = b
            alive[live[rej]] = False
            prev = b
            k += 1
            # arms beyond the point where the budget surely ends are moot
            cum = np.cumsum(np.where(alive, b, cost))
            cut = int(np.searchsorted(cum, budget, side="right"))
            alive[cut + 1:] = False
        # survivors keep going until the budget ends
        eff = np.where(cost > 0, cost, np.iinfo(np.int64).max // (4 * m))
        cum = np.cumsum(eff)
        over = np.flatnonzero(cum > budget)
        if over.size == 0:
            env.new_arms(m)
            env.pull_many(idx, cost)
            used += int(cost.sum())
            _emit_fast_trace(trace, levels, idx, cost, schedule)
            continue
        o = int(over[0])
        counts = cost[:o + 1].copy()
        counts[o] = budget - (int(cum[o - 1]) if o else 0)
        env.new_arms(o + 1)
        env.pull_many(idx[:o + 1], counts)
        _emit_fast_trace(trace, levels, idx[:o + 1], counts, schedule)
        return int(idx[o])


def _emit_fast_trace(trace, levels, idx, counts, schedule):
    if trace is None:
        return
    # level-major rows into arm-major order, as the generic path emits them
    items = []
    for live, k, b, p_hat, rej in levels:
        for a, ph, r in zip(live, p_hat, rej):
            if a < idx.size and b <= counts[a]:
                items.append((int(a), k, b, float(ph), bool(r)))
    items.sort(key=lambda t: (t[0], t[1]))
    for a, k, b, ph, r in items:
        trace.append(_trace_row(idx[a], k, b, ph, schedule, "reject" if r else "continue"))


def run_fixed_budget(env, schedule, N=None, *, trace=False, fast=None):
    """Run the fixed-budget algorithm with at most ``N`` pulls.

    Always outputs an arm: the one under study when the budget runs out.
    Success means the output arm's mean is at least ``beta``.
    """
    check_env(env)
    N = schedule.params.N if N is None else check_count(N, "N", 1)
    beta = schedule.params.beta
    rows = [] if trace else None
    start = env.samples_used
    arms0 = env.n_arms
    left = _budget_left(env, N)
    if fast is None:
        fast = type(env) is BanditEnv
    if fast:
        chosen = _fixed_budget_fast(env, schedule, left, rows)
    else:
        chosen = _fixed_budget_generic(env, schedule, left, rows)
    if rows is not None:
        rows.append({"arm": int(chosen), "checkpoint": None,
                     "n": int(env.pulls(chosen)) if hasattr(env, "pulls") else None,
                     "p_hat": None, "phase": None, "threshold": None,
                     "decision": "output"})
    mean = env.true_mean(chosen)
    return RunRecord(
        chosen=int(chosen),
        true_mean=mean,
        samples_used=env.samples_used - start,
        arms_touched=env.n_arms - arms0,
        success=bool(mean >= beta),
        target=beta,
        trace=rows,
    )


# ---------------------------------------------------------------------------
# multi-arm variant


def multi_arm_sizes(N):
    """``(M, N_tilde)``: pulls an arm must survive to be accepted, and the
    enlarged budget the variant is run with."""
    N = check_count(N, "N", 2)
    log_n = math.log(N)
    M = ceil_int(N / log_n ** 1.5)
    return M, N + ceil_int(2 * N / math.sqrt(log_n))


def _multi_generic(env, schedule, M, limit):
    start = env.samples_used
    accepted = []
    while env.samples_used - start < limit:
        arm = env.new_arm()
        pulled = reward = 0
        k = 0
        while True:
            cp = schedule.checkpoint(k)
            target = min(cp, M)
            need = target - pulled
            take = min(need, limit - (env.samples_used - start))
            try:
                reward += env.pull_sum(arm, take)
            except BudgetExhausted:
                return accepted
            pulled += take
            if take < need:
                return accepted
            if cp <= M and schedule.reject(k, reward / pulled):
                break
            if pulled == M:
                accepted.append(arm)
                break
            k += 1
    return accepted


def _multi_fast(env, schedule, M, limit):
    accepted = []
    used = 0
    while used < limit:
        budget = limit - used
        m = int(min(8192, max(16, budget // schedule.b0 + 1)))
        idx = np.arange(env.n_arms, env.n_arms + m, dtype=np.int64)
        cost = np.zeros(m, dtype=np.int64)
        alive = np.ones(m, dtype=bool)
        sums = np.zeros(m, dtype=np.int64)
        prev = 0
        k = 0
        while alive.any() and schedule.checkpoint(k) <= M:
            b = schedule.checkpoint(k)
            live = np.flatnonzero(alive)
            sums[live] += env.peek_sums(idx[live], prev, b - prev)
            rej = schedule.reject(k, sums[live] / b)
            cost[live[rej]] = b
            alive[live[rej]] = False
            prev = b
            k += 1
        cost[alive] = M
        cum = np.cumsum(cost)
        over = np.flatnonzero(cum > budget)
        if over.size == 0:
            env.new_arms(m)
            env.pull_many(idx, cost)
            accepted.extend(idx[alive].tolist())
            used += int(cum[-1])
            continue
        o = int(over[0])
        counts = cost[:o + 1].copy()
        counts[o] = budget - (int(cum[o - 1]) if o else 0)
        # nothing left for arm o means it is never touched
        n_touch = o + 1 if counts[o] > 0 else o
        if n_touch:
            env.new_arms(n_touch)
            env.pull_many(idx[:n_touch], counts[:n_touch])
        accepted.extend(idx[:o][alive[:o]].tolist())
        break
    return accepted


def run_multi_arm(env, schedule, N=None, *, fast=None):
    """Accept every arm that survives ``M`` pulls, within ``N_tilde`` pulls.

    Success means at least ``ln N`` arms were accepted and all of them have
    mean at least ``beta``.
    """
    check_env(env)
    N = schedule.params.N if N is None else check_count(N, "N", 2)
    M, n_tilde = multi_arm_sizes(N)
    beta = schedule.params.beta
    start = env.samples_used
    arms0 = env.n_arms
    limit = _budget_left(env, n_tilde)
    if fast is None:
        fast = type(env) is BanditEnv
    accepted = (_multi_fast if fast else _multi_generic)(env, schedule, M, limit)
    means = [env.true_mean(i) for i in accepted]
    n_bad = sum(mu < beta for mu in means)
    success = len(accepted) >= math.log(N) and n_bad == 0
    return RunRecord(
        chosen=accepted[0] if accepted else None,
        true_mean=min(means) if means else math.nan,
        samples_used=env.samples_used - start,
        arms_touched=env.n_arms - arms0,
        success=bool(success),
        target=beta,
        extra={"accepted": accepted, "accepted_means": means, "n_bad": n_bad,
               "M": M, "N_tilde": n_tilde},
    )


# ---------------------------------------------------------------------------
# comparison baseline


def uniform_allocation(env, N, beta=None):
    """Pull ``isqrt(N)`` fresh arms ``isqrt(N)`` times each and output the
    best empirical mean (lowest index on ties)."""
    check_env(env)
    N = check_count(N, "N", 1)
    m = math.isqrt(N)
    start = env.samples_used
    arms0 = env.n_arms
    idx = np.asarray(env.new_arms(m) if hasattr(env, "new_arms")
                     else [env.new_arm() for _ in range(m)])
    sums = env.pull_arms(idx, m)
    chosen = int(idx[int(np.argmax(sums))])
    mean = env.true_mean(chosen)
    return RunRecord(
        chosen=chosen,
        true_mean=mean,
        samples_used=env.samples_used - start,
        arms_touched=env.n_arms - arms0,
        success=bool(beta is None or mean >= beta),
        target=math.nan if beta is None else beta,
    )

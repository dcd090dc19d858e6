"""Randomness-distorting adversary for lower-bound simulations.

An algorithm is run through :class:`CompressedEnv`, which rounds every arm's
pull count up to the next element of a slowly increasing checkpoint set. The
adversary then serves each real batch of rewards from the Bayesian posterior
of that arm, conditioned on a declared event about the batch. Each
declaration with posterior probability ``P`` adds ``ln(1/P)`` to a cost
ledger. At the end it declares that the output arm's mean is below ``beta``.
Under the adversary's law the output always fails, and under the
unconditioned law the failure probability is at least ``exp(-Cost)``.

Every declaration used here has the form "the batch reward sum is at most
``s_max``", so probabilities are exact mixtures of binomial CDFs over a grid
posterior.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy import special

from ._validation import check_count, check_scalar_in, floor_int
from .env import BudgetExhausted
from .fisher import rate_constant, theta, theta_inv
from .records import RunRecord
from .reservoir import AdmissibleReservoir, admissible_reservoir

__all__ = [
    "BatchSet",
    "batch_set",
    "CompressedEnv",
    "BanditSource",
    "batch_compress",
    "BatchMeanAtMost",
    "ThetaDropAtLeast",
    "MeanStaysBelow",
    "FinalArmBelow",
    "PosteriorGrid",
    "CostLedger",
    "LedgerEntry",
    "InfeasibleDeclaration",
    "SamplingStalled",
    "declaration_probability",
    "declaration_log_probability",
    "sample_conditioned",
    "run_adversarial",
    "StrengthReport",
    "strength_report",
    "uniform_allocation_toy",
    "toy_failure_frequency",
]


class InfeasibleDeclaration(RuntimeError):
    """A declaration has posterior probability zero."""


class SamplingStalled(RuntimeError):
    """Rejection sampling hit its retry cap and no exact fallback applied."""


# ---------------------------------------------------------------------------
# checkpoint set


def _pow_floor(N, x):
    return floor_int(math.exp(x * math.log(N)))


class BatchSet:
    """Checkpoints: every integer up to ``N^{2 rho}``, multiples of
    ``N^{rho}`` up to ``N^{6 rho}``, then ``floor(N^{6 rho} (1+rho)^j)``.

    ``N^{x rho}`` is rounded as ``floor(exp(x rho ln N))``; ``N^{6 rho}``
    itself is a member. The first two regimes are arithmetic and never
    materialized; the geometric tail is generated on demand. Construction
    fails when the set is not ``rho``-slowly increasing, which happens at
    small ``N`` where ``N^{rho}`` is large next to ``rho N^{2 rho}``.
    """

    def __init__(self, N, rho):
        self.N = check_count(N, "N", 2)
        self.rho = check_scalar_in(rho, "rho", 0.0, 1.0, closed_low=False, closed_high=False)
        self.i2 = _pow_floor(N, 2 * rho)
        if self.i2 < 2:
            raise ValueError(f"N^(2 rho) = {math.exp(2 * rho * math.log(N)):.4g} < 2")
        self.step = max(1, _pow_floor(N, rho))
        self.i6 = max(_pow_floor(N, 6 * rho), self.i2)
        self._first_mult = (self.i2 // self.step + 1) * self.step
        self._tail = [self.i6]
        # (m + step) / (m + 1) falls with m, so the first gaps are the worst
        f = self._first_mult
        if f >= self.i6:
            self._check_pair(self.i2, self.i6)
        else:
            self._check_pair(self.i2, f)
            self._check_pair(f, min(f + self.step, self.i6))
            last_mult = (self.i6 - 1) // self.step * self.step
            self._check_pair(last_mult, self.i6)

    def _check_pair(self, a, b):
        if b / (a + 1) > 1 + self.rho + 1e-12:
            raise ValueError(f"checkpoint set not {self.rho}-slowly increasing at {a} -> {b}")

    def _grow_tail(self, value):
        r = 1.0 + self.rho
        while self._tail[-1] < value:
            j = len(self._tail)
            nxt = max(floor_int(self.i6 * r ** j), self._tail[-1] + 1)
            self._check_pair(self._tail[-1], nxt)
            self._tail.append(nxt)

    def next_above(self, n):
        """Smallest checkpoint ``>= n`` (``n >= 1``)."""
        if n <= self.i2:
            return max(int(n), 1)
        if n <= self.i6:
            return min(-(-int(n) // self.step) * self.step, self.i6)
        self._grow_tail(n)
        t = self._tail
        return int(t[int(np.searchsorted(np.asarray(t), n, side="left"))])

    def __contains__(self, n):
        return n >= 1 and self.next_above(n) == n

    def values(self, upto):
        """All checkpoints ``<= upto``."""
        head = np.arange(1, min(self.i2, upto) + 1, dtype=np.int64)
        mult = np.arange(self._first_mult, min(self.i6, upto) + 1, self.step, dtype=np.int64)
        self._grow_tail(upto)
        rest = np.asarray(self._tail, dtype=np.int64)
        out = np.unique(np.concatenate([head, mult, rest]))
        return out[out <= upto]

    def max_ratio(self, upto):
        v = self.values(upto).astype(np.float64)
        if v.size < 2:
            return 0.0
        return float(np.max(v[1:] / (v[:-1] + 1)))


def batch_set(N, rho):
    return BatchSet(N, rho)


# ---------------------------------------------------------------------------
# batch compression


class BanditSource:
    """Serves real batches from a plain :class:`BanditEnv`."""

    def __init__(self, env):
        self.env = env
        self.reservoir = env.reservoir

    def new_arm(self):
        return self.env.new_arm()

    def serve(self, arm, n_before, m):
        return self.env.pull_batch(arm, m)

    def true_mean(self, arm):
        return self.env.true_mean(arm)


class CompressedEnv:
    """Pull interface whose real per-arm counts always land on ``B``.

    The algorithm sees virtual counts and receives the first rewards of each
    real batch in order, so it behaves exactly as it would on the source's
    reward streams. ``budget`` caps virtual pulls; real pulls exceed virtual
    ones by a factor of at most ``1 + rho``.
    """

    def __init__(self, source, B, budget=None):
        self.source = source
        self.B = B
        self.budget = budget
        self.reservoir = source.reservoir
        self.samples_used = 0
        self.real_samples = 0
        self._buf = []      # per arm: list of real reward arrays
        self._real = []     # real pull count
        self._virt = []     # virtual pull count
        self._vrew = []     # virtual reward total
        self._arm_ids = []

    @property
    def n_arms(self):
        return len(self._real)

    @property
    def remaining(self):
        return None if self.budget is None else self.budget - self.samples_used

    @property
    def inflation(self):
        return self.real_samples / self.samples_used if self.samples_used else 1.0

    def new_arm(self):
        self._arm_ids.append(self.source.new_arm())
        self._buf.append(np.zeros(0, dtype=np.int8))
        self._real.append(0)
        self._virt.append(0)
        self._vrew.append(0)
        return len(self._real) - 1

    def new_arms(self, m):
        return np.array([self.new_arm() for _ in range(m)], dtype=np.int64)

    def _check(self, i):
        if not 0 <= i < len(self._real):
            raise IndexError(f"arm {i} has not been instantiated")

    def pull_batch(self, i, m):
        self._check(i)
        m = check_count(m, "m")
        got = m if self.budget is None else min(m, self.budget - self.samples_used)
        v = self._virt[i]
        if got > 0 and v + got > self._real[i]:
            target = self.B.next_above(v + got)
            extra = self.source.serve(self._arm_ids[i], self._real[i], target - self._real[i])
            self._buf[i] = np.concatenate([self._buf[i], np.asarray(extra, dtype=np.int8)])
            self.real_samples += target - self._real[i]
            self._real[i] = target
        r = self._buf[i][v:v + got]
        self._virt[i] += got
        self._vrew[i] += int(r.sum())
        self.samples_used += got
        if got < m:
            raise BudgetExhausted(i, got)
        return r

    def pull(self, i):
        return int(self.pull_batch(i, 1)[0])

    def pull_sum(self, i, m):
        return int(self.pull_batch(i, m).sum())

    def pull_arms(self, indices, m):
        return np.array([self.pull_sum(int(i), m) for i in indices], dtype=np.int64)

    def pull_many(self, indices, counts):
        return np.array([self.pull_sum(int(i), int(c)) for i, c in zip(indices, counts)],
                        dtype=np.int64)

    def pulls(self, i):
        self._check(i)
        return self._virt[i]

    def real_pulls(self, i):
        self._check(i)
        return self._real[i]

    def total_reward(self, i):
        self._check(i)
        return self._vrew[i]

    def real_reward(self, i):
        self._check(i)
        return int(self._buf[i].sum())

    def true_mean(self, i):
        self._check(i)
        return self.source.true_mean(self._arm_ids[i])


def batch_compress(algorithm, B):
    """Wrap ``algorithm(env)`` so it runs on ``CompressedEnv(BanditSource(env), B)``."""
    def wrapped(env):
        # the budget applies to virtual pulls; real ones may exceed it by 1+rho
        saved = env.budget
        cenv = CompressedEnv(BanditSource(env), B, budget=saved)
        env.budget = None
        try:
            out = algorithm(cenv)
        finally:
            env.budget = saved
        return out, cenv
    return wrapped


# ---------------------------------------------------------------------------
# declarations


def _sum_cap(n_after, mean):
    return floor_int(n_after * mean)


@dataclass(frozen=True)
class BatchMeanAtMost:
    """The batch's own mean is at most ``bound``."""

    bound: float

    def s_max(self, n_before, r_before, m):
        return _sum_cap(m, self.bound)

    def describe(self):
        return {"kind": "BatchMeanAtMost", "bound": self.bound}


@dataclass(frozen=True)
class ThetaDropAtLeast:
    """``theta`` of the running mean drops by at least ``decrement`` over the batch."""

    decrement: float

    def s_max(self, n_before, r_before, m):
        t = theta(r_before / n_before) - self.decrement
        if t < 0:
            return -1
        return _sum_cap(n_before + m, theta_inv(t)) - r_before

    def describe(self):
        return {"kind": "ThetaDropAtLeast", "decrement": self.decrement}


@dataclass(frozen=True)
class MeanStaysBelow:
    """The running mean after the batch is at most ``beta``."""

    beta: float

    def s_max(self, n_before, r_before, m):
        return _sum_cap(n_before + m, self.beta) - r_before

    def describe(self):
        return {"kind": "MeanStaysBelow", "beta": self.beta}


@dataclass(frozen=True)
class FinalArmBelow:
    """The output arm's mean is below ``beta``."""

    beta: float

    def describe(self):
        return {"kind": "FinalArmBelow", "beta": self.beta}


# ---------------------------------------------------------------------------
# posterior over one arm's mean


class PosteriorGrid:
    """Grid posterior ``w_j`` at points ``x_j``; weights sum to one.

    Prior weights are the reservoir's mass in each grid cell, so masses of
    sets whose ends are cell edges (such as ``{p < beta}``) are exact.
    """

    def __init__(self, x, log_w, edges=None):
        self.x = np.asarray(x, dtype=np.float64)
        lw = np.asarray(log_w, dtype=np.float64)
        self.log_w = lw - special.logsumexp(lw)
        self.edges = edges

    @property
    def weights(self):
        return np.exp(self.log_w)

    @classmethod
    def point(cls, p):
        return cls([p], [0.0])

    @classmethod
    def from_density(cls, breaks, levels, G=2048, extra_edges=()):
        """Cells split so that every break and extra edge is a cell edge."""
        if G < 1:
            raise ValueError("G must be positive")
        knots = np.unique(np.concatenate([np.asarray(breaks, float), np.asarray(extra_edges, float)]))
        knots = knots[(knots >= breaks[0]) & (knots <= breaks[-1])]
        lengths = np.diff(knots)
        counts = np.maximum(1, np.floor(G * lengths / lengths.sum()).astype(int))
        # hand out the remainder to the longest pieces
        while counts.sum() < G:
            counts[np.argmax(lengths / counts)] += 1
        edges = np.concatenate([np.linspace(a, b, c + 1)[:-1] for a, b, c in
                                zip(knots[:-1], knots[1:], counts)] + [[knots[-1]]])
        mids = 0.5 * (edges[:-1] + edges[1:])
        seg = np.clip(np.searchsorted(np.asarray(breaks), mids, side="right") - 1,
                      0, len(levels) - 1)
        mass = np.asarray(levels, float)[seg] * np.diff(edges)
        with np.errstate(divide="ignore"):
            lw = np.log(mass)
        return cls(mids, lw, edges)

    @classmethod
    def uniform(cls, lo, hi, G=2048):
        return cls.from_density((lo, hi), (1.0 / (hi - lo),), G)

    @classmethod
    def from_reservoir(cls, res, G=2048):
        if isinstance(res, AdmissibleReservoir):
            return cls.from_density(res.breaks, res.levels, G, extra_edges=(res.beta,))
        if hasattr(res, "breaks"):
            return cls.from_density(res.breaks, res.levels, G)
        if hasattr(res, "lo"):
            return cls.uniform(res.lo, res.hi, G)
        if hasattr(res, "values"):
            return cls(res.values, np.log(res.weights))
        raise TypeError(f"no grid for {type(res).__name__}")

    def update(self, successes, trials):
        """Posterior after ``successes`` ones in ``trials`` more pulls."""
        lw = (self.log_w + special.xlogy(successes, self.x)
              + special.xlog1py(trials - successes, -self.x))
        return PosteriorGrid(self.x, lw, self.edges)

    def log_mass_below(self, beta):
        below = self.x < beta
        return float(special.logsumexp(self.log_w[below])) if below.any() else -math.inf

    def mass_below(self, beta):
        return math.exp(self.log_mass_below(beta))

    def mean(self):
        return float(np.dot(self.weights, self.x))


def declaration_log_probability(post, batch_size, d, n_before=0, r_before=0):
    """Log of :func:`declaration_probability`; stays finite when the
    probability itself underflows."""
    m = check_count(batch_size, "batch_size", 1)
    if isinstance(d, FinalArmBelow):
        lp = post.log_mass_below(d.beta)
    else:
        lp = _sum_cap_log_probability(post, m, d.s_max(n_before, r_before, m))
    if lp == -math.inf:
        raise InfeasibleDeclaration(f"{d} has zero posterior probability")
    return min(lp, 0.0)


def declaration_probability(post, batch_size, d, n_before=0, r_before=0):
    """Posterior-predictive probability that the next ``batch_size`` rewards
    satisfy ``d``. Raises :class:`InfeasibleDeclaration` when it is zero."""
    return math.exp(declaration_log_probability(post, batch_size, d, n_before, r_before))


def _log_cap_cdf(post, m, s_max):
    with np.errstate(divide="ignore"):
        return np.log(special.bdtr(s_max, m, post.x))


def _sum_cap_log_probability(post, m, s_max):
    if s_max < 0:
        return -math.inf
    if s_max >= m:
        return 0.0
    return float(special.logsumexp(post.log_w + _log_cap_cdf(post, m, s_max)))


def _draw_index(log_w, rng):
    w = np.exp(log_w - special.logsumexp(log_w))
    return int(rng.choice(w.size, p=w / w.sum()))


def _truncated_binomial(m, p, s_max, rng):
    # enumerate downward from s_max; masses below are found by the pmf ratio
    ks = np.arange(s_max, -1, -1)
    logp = (special.gammaln(m + 1) - special.gammaln(ks + 1) - special.gammaln(m - ks + 1)
            + special.xlogy(ks, p) + special.xlog1py(m - ks, -p))
    w = np.exp(logp - logp.max())
    return int(ks[rng.choice(ks.size, p=w / w.sum())])


def _exact_conditioned_sum(post, m, s_max, rng):
    lw = post.log_w + (_log_cap_cdf(post, m, s_max) if s_max < m else 0.0)
    if not np.any(np.isfinite(lw)):
        raise InfeasibleDeclaration("declaration has zero posterior probability")
    j = _draw_index(lw, rng)
    if s_max >= m:
        return int(rng.binomial(m, post.x[j]))
    return _truncated_binomial(m, post.x[j], s_max, rng)


def sample_conditioned(post, batch_size, d, rng, n_before=0, r_before=0, *,
                       max_retries=10 ** 6, exact_limit=20, method="rejection"):
    """Batch of 0/1 rewards from the posterior predictive conditioned on ``d``.

    ``method="rejection"`` draws (p, batch) pairs until ``d`` holds; after
    ``max_retries`` draws it falls back to exact two-stage sampling when
    ``batch_size <= exact_limit`` (``None`` means no limit) and otherwise
    raises :class:`SamplingStalled`. ``method="exact"`` samples the
    conditional law directly: ``p`` proportional to weight times the
    binomial CDF at the cap, then the sum from the truncated binomial.
    Rewards are a uniformly random arrangement of the sum.
    """
    m = check_count(batch_size, "batch_size", 1)
    s_max = d.s_max(n_before, r_before, m)
    if s_max < 0:
        raise InfeasibleDeclaration(f"{d} cannot hold")
    if method == "exact":
        s = _exact_conditioned_sum(post, m, s_max, rng)
    elif method == "rejection":
        s = None
        w = post.weights
        tried = 0
        chunk = 8
        while tried < max_retries:
            # small first chunks: most declarations have P well above 1/8
            chunk = min(chunk * 2, 4096, max_retries - tried)
            js = rng.choice(post.x.size, size=chunk, p=w)
            ss = rng.binomial(m, post.x[js])
            ok = np.flatnonzero(ss <= s_max)
            if ok.size:
                s = int(ss[ok[0]])
                break
            tried += chunk
        if s is None:
            if exact_limit is not None and m > exact_limit:
                raise SamplingStalled(f"no admissible batch after {max_retries} draws")
            s = _exact_conditioned_sum(post, m, s_max, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.zeros(m, dtype=np.int8)
    out[rng.choice(m, size=s, replace=False)] = 1
    return out


# ---------------------------------------------------------------------------
# ledger


@dataclass(frozen=True)
class LedgerEntry:
    t: int
    arm: int
    declaration: object
    P: float
    cum_cost: float
    log_P: float = None

    def to_json(self):
        return json.dumps({"t": self.t, "arm": self.arm,
                           "declaration": self.declaration.describe(),
                           "P_t": self.P, "log_P_t": self.log_P, "cum_cost": self.cum_cost})


@dataclass
class CostLedger:
    entries: list = field(default_factory=list)

    @property
    def cost(self):
        return self.entries[-1].cum_cost if self.entries else 0.0

    def add(self, t, arm, declaration, P=None, *, log_p=None):
        """Book a declaration given ``P`` or, when it may underflow, ``log_p``."""
        if log_p is None:
            if P is None or not 0.0 < P <= 1.0:
                raise InfeasibleDeclaration(f"declaration probability {P} outside (0, 1]")
            log_p = math.log(P)
        if not -math.inf < log_p <= 0.0:
            raise InfeasibleDeclaration(f"declaration log-probability {log_p} outside (-inf, 0]")
        self.entries.append(LedgerEntry(t, arm, declaration, math.exp(log_p),
                                        self.cost - log_p, log_p))

    def to_jsonl(self):
        return "\n".join(e.to_json() for e in self.entries)

    def __len__(self):
        return len(self.entries)


# ---------------------------------------------------------------------------
# adversarial run


class _AdversarySource:
    """Real-batch source that conditions each batch on the scheduled
    declaration and books its probability."""

    def __init__(self, res, N, rho, alpha, beta, B, ledger, rng, G, verify):
        self.reservoir = res
        self.beta = beta
        self.B = B
        self.ledger = ledger
        self.rng = rng
        self.verify = verify
        self.prior = PosteriorGrid.from_reservoir(res, G)
        self.step2 = BatchMeanAtMost(res.gamma_hi - math.exp(-rho * math.log(N)))
        self.drop = ThetaDropAtLeast(rho * (1 + 10 * rho) * abs(theta(alpha) - theta(beta))
                                     / math.log(N))
        self.stay = MeanStaysBelow(beta)
        self.counts = []    # (n, R) per arm
        self.forced = {}
        self.t = 0

    def new_arm(self):
        self.counts.append((0, 0))
        return len(self.counts) - 1

    def declaration_for(self, n, R):
        """Scheduled declaration for a batch starting at ``n`` pulls."""
        if n < self.B.i2:
            return None
        if n < self.B.i6:
            return self.step2
        return self.drop if R / n > self.beta else self.stay

    def serve(self, arm, n_before, m):
        n, R = self.counts[arm]
        post = self.prior.update(R, n)
        d = self.declaration_for(n, R)
        if d is None:
            j = self.rng.choice(post.x.size, p=post.weights)
            r = (self.rng.random(m) < post.x[j]).astype(np.int8)
        else:
            lp = declaration_log_probability(post, m, d, n, R)
            r = sample_conditioned(post, m, d, self.rng, n, R, method="exact")
            s = int(r.sum())
            if self.verify and s > d.s_max(n, R, m):
                raise AssertionError(f"declaration {d} violated by sampled batch")
            self.ledger.add(self.t + m, arm, d, log_p=lp)
        self.t += m
        self.counts[arm] = (n + m, R + int(r.sum()))
        return r

    def true_mean(self, arm):
        return self.forced.get(arm, math.nan)

    def force_final(self, arm):
        n, R = self.counts[arm]
        post = self.prior.update(R, n)
        d = FinalArmBelow(self.beta)
        self.ledger.add(self.t, arm, d, log_p=declaration_log_probability(post, 1, d))
        below = np.flatnonzero(post.x < self.beta)
        j = below[_draw_index(post.log_w[below], self.rng)]
        self.forced[arm] = float(post.x[j])
        return self.forced[arm]


def run_adversarial(algorithm, N, rho, alpha, beta, eta, *, seed=0, G=2048, verify=True):
    """Run ``algorithm(env)`` against the adversary on the admissible reservoir.

    ``algorithm`` receives a :class:`CompressedEnv` with budget ``N`` and
    returns an arm index or a :class:`RunRecord`. Returns the forced record
    (its output mean is drawn below ``beta``) and the ledger. If a scheduled
    declaration is impossible the run stops and the partial ledger is
    returned with ``extra["aborted"]`` set.
    """
    if G < 512:
        raise ValueError(f"posterior grid needs G >= 512, got {G}")
    res = admissible_reservoir(alpha, beta, eta, rho)
    B = batch_set(N, rho)
    ledger = CostLedger()
    rng = np.random.default_rng(seed)
    source = _AdversarySource(res, N, rho, alpha, beta, B, ledger, rng, G, verify)
    env = CompressedEnv(source, B, budget=N)
    extra = {"aborted": False}
    chosen = None
    try:
        out = algorithm(env)
        chosen = out.chosen if isinstance(out, RunRecord) else out
        mean = math.nan
        if chosen is not None:
            mean = source.force_final(env._arm_ids[int(chosen)])
    except InfeasibleDeclaration as exc:
        extra.update(aborted=True, reason=str(exc))
        mean = math.nan
    extra.update(real_samples=env.real_samples, inflation=env.inflation)
    rec = RunRecord(
        chosen=None if chosen is None else int(chosen),
        true_mean=mean,
        samples_used=env.samples_used,
        arms_touched=env.n_arms,
        success=False,
        target=beta,
        extra=extra,
    )
    return rec, ledger


@dataclass(frozen=True)
class StrengthReport:
    N: int
    cost: float
    c_ab: float
    normalized_cost: float
    fitted_C: float
    floor: float
    envelope: float

    def to_dict(self):
        return dict(self.__dict__)


def strength_report(alpha, beta, rho, N, ledger):
    """Cost, its ``N / ln^2 N`` normalization and the implied failure floor."""
    cost = ledger.cost if isinstance(ledger, CostLedger) else float(ledger)
    log2 = math.log(N) ** 2
    c = rate_constant(alpha, beta)
    norm = cost * log2 / N
    fitted = (norm - c) / rho
    return StrengthReport(N, cost, c, norm, fitted, math.exp(-cost),
                          (c + fitted * rho) * N / log2)


# ---------------------------------------------------------------------------
# Monte Carlo check of the failure floor on a toy instance


def uniform_allocation_toy(env):
    """Pull ``isqrt(budget)`` fresh arms ``isqrt(budget)`` times each and
    return the best empirical mean. Pull pattern is fixed in advance."""
    m = math.isqrt(env.budget)
    arms = [env.new_arm() for _ in range(m)]
    sums = [env.pull_sum(a, m) for a in arms]
    return arms[int(np.argmax(sums))]


def toy_failure_frequency(N, rho, alpha, beta, eta, runs, seed=0):
    """Unconditioned frequency of ``uniform_allocation_toy`` outputting an arm
    with mean below ``beta`` on the admissible reservoir.

    Compression does not change which arm this algorithm outputs (it only
    reads the first ``m`` rewards of each arm), so the runs are vectorized.
    """
    res = admissible_reservoir(alpha, beta, eta, rho)
    rng = np.random.default_rng(seed)
    m = math.isqrt(N)
    fails = 0
    for lo in range(0, runs, 8192):
        r = min(8192, runs - lo)
        p = res.sample((r, m), rng)
        s = rng.binomial(m, p)
        best = p[np.arange(r), np.argmax(s, axis=1)]
        fails += int(np.sum(best < beta))
    return fails / runs

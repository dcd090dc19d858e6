"""Fixed-confidence selection: quantile estimation followed by an accept loop.

The quantile estimate samples a batch of fresh arms equally and reads off an
order statistic of their empirical means. The accept loop then scans further
fresh arms and keeps the first whose empirical mean clears the estimate minus
a third of the accuracy.
"""
from dataclasses import dataclass
import math

import numpy as np

from ._validation import ceil_int, check_env, check_probability, check_scalar_in
from .records import RunRecord

__all__ = [
    "ConfidenceParams",
    "QuantileEstimate",
    "estimate_quantile",
    "accept_loop",
    "accept_loop_sizes",
    "quantile_sizes",
    "solve_fixed_confidence",
    "SUCCESS_TOL",
]

# Absolute slack when comparing a true mean with a target built by float
# arithmetic (0.9 - 0.1 is 0.8000000000000002).
SUCCESS_TOL = 1e-12

_ARM_CHUNK = 1 << 14


@dataclass(frozen=True)
class ConfidenceParams:
    eta: float
    eps: float
    delta: float
    C: float = 4.0

    def __post_init__(self):
        for name in ("eta", "eps", "delta"):
            check_scalar_in(getattr(self, name), name, 0.0, 0.5, closed_low=False)
        check_scalar_in(self.C, "C", 1.0)


@dataclass(frozen=True)
class QuantileEstimate:
    alpha_hat: float
    K: int
    n: int
    k: int
    samples_used: int
    first_arm: int
    last_arm: int


def quantile_sizes(eta1, eta2, eps, delta=None, C=4.0, *, log_inv_delta=None):
    """``(K, n, k)`` used by :func:`estimate_quantile`.

    Pass ``log_inv_delta`` instead of ``delta`` when ``delta`` underflows.
    """
    if log_inv_delta is None:
        log_inv_delta = math.log(1.0 / delta)
    K = ceil_int(C * eta1 * log_inv_delta / eta2 ** 2)
    n = ceil_int(C * math.log(1.0 / eta2) / eps ** 2)
    k = max(1, ceil_int(K * (eta1 - eta2 / 2.0)))
    return K, n, min(k, K)


def _fresh_arms(env, m):
    if hasattr(env, "new_arms"):
        return np.asarray(env.new_arms(m), dtype=np.int64)
    return np.array([env.new_arm() for _ in range(m)], dtype=np.int64)


def estimate_quantile(env, eta1, eta2, eps, delta=None, C=4.0, *, log_inv_delta=None):
    """Estimate a value between the ``1 - eta1`` and ``1 - eta1 + eta2``
    quantiles of the reservoir, to accuracy ``eps / 3``.

    Samples ``K`` fresh arms ``n`` times each and returns the ``k``-th largest
    empirical mean. :class:`~infexplore.env.BudgetExhausted` propagates.
    """
    check_env(env)
    eta1 = check_probability(eta1, "eta1", allow_one=False)
    eta2 = check_probability(eta2, "eta2", allow_one=False)
    eps = check_scalar_in(eps, "eps", 0.0, 1.0, closed_low=False)
    if eta2 > eta1:
        raise ValueError(f"need eta2 <= eta1, got eta1={eta1}, eta2={eta2}")
    if log_inv_delta is None:
        delta = check_probability(delta, "delta", allow_one=False)
        log_inv_delta = math.log(1.0 / delta)
    K, n, k = quantile_sizes(eta1, eta2, eps, C=C, log_inv_delta=log_inv_delta)

    start = env.samples_used
    chunks = []
    first = last = None
    for lo in range(0, K, _ARM_CHUNK):
        m = min(_ARM_CHUNK, K - lo)
        idx = _fresh_arms(env, m)
        if first is None:
            first = int(idx[0])
        last = int(idx[-1])
        chunks.append(env.pull_arms(idx, n))
    means = np.concatenate(chunks) / n
    # k-th largest: sort descending and index
    alpha_hat = float(-np.partition(-means, k - 1)[k - 1])
    return QuantileEstimate(alpha_hat, K, n, k, env.samples_used - start, first, last)


def accept_loop_sizes(eta, eps, delta, C=4.0):
    """``(arm_cap, n2)`` for :func:`accept_loop`."""
    cap = ceil_int(C * math.log(1.0 / delta) / eta)
    n2 = ceil_int(C * math.log(1.0 / (eta * delta)) / eps ** 2)
    return cap, n2


def accept_loop(env, eta, eps, delta, alpha_hat, C=4.0):
    """Return the first fresh arm whose empirical mean over ``n2`` pulls is at
    least ``alpha_hat - eps/3``, or ``None`` once the arm cap is used up."""
    check_env(env)
    eta = check_probability(eta, "eta", allow_one=False)
    delta = check_probability(delta, "delta", allow_one=False)
    eps = check_scalar_in(eps, "eps", 0.0, 1.0, closed_low=False)
    alpha_hat = check_scalar_in(alpha_hat, "alpha_hat", 0.0, 1.0)
    cap, n2 = accept_loop_sizes(eta, eps, delta, C)
    bar = alpha_hat - eps / 3.0
    for _ in range(cap):
        i = env.new_arm()
        if env.pull_sum(i, n2) / n2 >= bar:
            return i
    return None


def solve_fixed_confidence(env, params):
    """Quantile estimate with ``(eta, eta/2)`` followed by the accept loop.

    Success means an arm was output and its mean is at least
    ``G^{-1}(1 - eta) - eps`` for the environment's reservoir.
    """
    if not isinstance(params, ConfidenceParams):
        params = ConfidenceParams(**params)
    eta, eps, delta, C = params.eta, params.eps, params.delta, params.C
    start = env.samples_used
    arms0 = env.n_arms
    est = estimate_quantile(env, eta, eta / 2.0, eps, delta, C)
    chosen = accept_loop(env, eta, eps, delta, est.alpha_hat, C)
    target = float(env.reservoir.inverse_cdf(1.0 - eta)) - eps
    mean = env.true_mean(chosen) if chosen is not None else math.nan
    success = chosen is not None and mean >= target - SUCCESS_TOL
    return RunRecord(
        chosen=chosen,
        true_mean=mean,
        samples_used=env.samples_used - start,
        arms_touched=env.n_arms - arms0,
        success=bool(success),
        target=target,
        extra={"alpha_hat": est.alpha_hat, "K": est.K, "n": est.n, "k": est.k},
    )

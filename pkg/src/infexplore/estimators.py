"""Estimator-style wrappers around the functional algorithms.

``fit(env)`` runs one complete algorithm on a bandit environment and stores
the outcome in trailing-underscore attributes. Hyperparameters go in the
constructor, so ``get_params`` / ``set_params`` / ``clone`` work as usual.
"""
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_env
from .fixed_budget import build_schedule, run_fixed_budget, run_multi_arm, uniform_allocation
from .fixed_confidence import ConfidenceParams, estimate_quantile, solve_fixed_confidence
from .reductions import reduce_alpha_above_half, reduce_ess_sup, reduce_unknown_alpha_avg

__all__ = [
    "QuantileEstimator",
    "FixedConfidenceSelector",
    "FixedBudgetSelector",
    "MultiArmSelector",
    "ReductionSelector",
    "UniformAllocation",
]


class _RunMixin:
    def _store(self, record):
        self.record_ = record
        self.chosen_arm_ = record.chosen
        self.true_mean_ = record.true_mean
        self.success_ = record.success
        self.samples_used_ = record.samples_used
        return self

    def summary(self):
        check_is_fitted(self, "record_")
        return self.record_.to_dict()


class QuantileEstimator(BaseEstimator):
    """Order-statistic estimate of a reservoir quantile value."""

    def __init__(self, eta1=0.1, eta2=0.05, eps=0.3, delta=0.2, C=4.0):
        self.eta1 = eta1
        self.eta2 = eta2
        self.eps = eps
        self.delta = delta
        self.C = C

    def fit(self, env, y=None):
        check_env(env)
        est = estimate_quantile(env, self.eta1, self.eta2, self.eps, self.delta, self.C)
        self.estimate_ = est
        self.alpha_hat_ = est.alpha_hat
        self.K_, self.n_, self.k_ = est.K, est.n, est.k
        self.samples_used_ = est.samples_used
        return self


class FixedConfidenceSelector(_RunMixin, BaseEstimator):
    """Quantile estimate followed by the accept loop."""

    def __init__(self, eta=0.1, eps=0.1, delta=0.1, C=4.0):
        self.eta = eta
        self.eps = eps
        self.delta = delta
        self.C = C

    def fit(self, env, y=None):
        params = ConfidenceParams(self.eta, self.eps, self.delta, self.C)
        rec = solve_fixed_confidence(env, params)
        self.alpha_hat_ = rec.extra["alpha_hat"]
        return self._store(rec)


class FixedBudgetSelector(_RunMixin, BaseEstimator):
    def __init__(self, budget=10_000, alpha=0.9, beta=0.8, rho=0.05, rho1=0.05, rho2=0.1):
        self.budget = budget
        self.alpha = alpha
        self.beta = beta
        self.rho = rho
        self.rho1 = rho1
        self.rho2 = rho2

    def _schedule(self):
        return build_schedule(N=self.budget, alpha=self.alpha, beta=self.beta,
                              rho=self.rho, rho1=self.rho1, rho2=self.rho2)

    def fit(self, env, y=None):
        self.schedule_ = self._schedule()
        return self._store(run_fixed_budget(env, self.schedule_))


class MultiArmSelector(FixedBudgetSelector):
    """Accepts every arm surviving ``M`` pulls within the enlarged budget."""

    def fit(self, env, y=None):
        self.schedule_ = self._schedule()
        rec = run_multi_arm(env, self.schedule_)
        self.accepted_arms_ = list(rec.extra["accepted"])
        return self._store(rec)


class ReductionSelector(_RunMixin, BaseEstimator):
    """Fixed-budget selection with an estimated target.

    ``kind`` is ``"avg"`` (quantile average over ``[1-eta, 1-eta2]``),
    ``"half"`` (quantile ``1-eta``, for values above one half) or
    ``"esssup"`` (essential supremum within ``eps1``).
    """

    def __init__(self, kind="avg", budget=10 ** 6, eta=0.2, eta2=0.1, eps=0.2, eps1=0.25,
                 rho=0.05, rho1=0.05, rho2=0.1, C=4.0):
        self.kind = kind
        self.budget = budget
        self.eta = eta
        self.eta2 = eta2
        self.eps = eps
        self.eps1 = eps1
        self.rho = rho
        self.rho1 = rho1
        self.rho2 = rho2
        self.C = C

    def fit(self, env, y=None):
        common = dict(rho=self.rho, rho1=self.rho1, rho2=self.rho2, C=self.C)
        if self.kind == "avg":
            rec = reduce_unknown_alpha_avg(env, self.budget, self.eta, self.eta2, self.eps,
                                           **common)
        elif self.kind == "half":
            rec = reduce_alpha_above_half(env, self.budget, self.eta, self.eps, **common)
        elif self.kind == "esssup":
            rec = reduce_ess_sup(env, self.budget, self.eps, self.eps1, **common)
        else:
            raise ValueError(f"kind must be 'avg', 'half' or 'esssup', got {self.kind!r}")
        self.degenerate_params_ = rec.degenerate_params
        return self._store(rec)


class UniformAllocation(_RunMixin, BaseEstimator):
    """Baseline: ``isqrt(budget)`` arms with ``isqrt(budget)`` pulls each."""

    def __init__(self, budget=10_000, beta=None):
        self.budget = budget
        self.beta = beta

    def fit(self, env, y=None):
        return self._store(uniform_allocation(env, self.budget, self.beta))

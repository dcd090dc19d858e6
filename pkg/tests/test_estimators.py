import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from infexplore import (BanditEnv, DiscreteAtoms, FixedBudgetSelector, FixedConfidenceSelector,
                        MultiArmSelector, QuantileEstimator, ReductionSelector, UniformAllocation,
                        UniformInterval)
from infexplore.fixed_budget import build_schedule, run_fixed_budget

ESTIMATORS = [
    QuantileEstimator(), FixedConfidenceSelector(), FixedBudgetSelector(budget=5000),
    MultiArmSelector(budget=5000), ReductionSelector(kind="esssup", budget=5000),
    UniformAllocation(budget=5000, beta=0.8),
]


@pytest.mark.parametrize("est", ESTIMATORS, ids=lambda e: type(e).__name__)
def test_params_roundtrip_and_clone(est):
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params
    key = next(iter(params))
    twin.set_params(**{key: params[key]})
    fitted = est.fit(BanditEnv(UniformInterval(0, 1), 1))
    assert fitted is est
    assert est.samples_used_ > 0


def test_fit_matches_functional_api():
    est = FixedBudgetSelector(budget=10 ** 4, alpha=0.9, beta=0.8).fit(BanditEnv(
        UniformInterval(0, 1), 9))
    rec = run_fixed_budget(BanditEnv(UniformInterval(0, 1), 9),
                           build_schedule(N=10 ** 4, alpha=0.9, beta=0.8))
    assert est.chosen_arm_ == rec.chosen and est.true_mean_ == rec.true_mean
    assert est.summary()["chosen"] == rec.chosen


def test_attribute_values():
    q = QuantileEstimator().fit(BanditEnv(DiscreteAtoms([0.7], [1.0]), 0))
    assert (q.K_, q.n_, q.k_) == (258, 134, 20)
    assert q.samples_used_ == 258 * 134
    m = MultiArmSelector(budget=5000).fit(BanditEnv(DiscreteAtoms([1.0], [1.0]), 0))
    assert len(m.accepted_arms_) >= 1 and m.success_


def test_unfitted_and_bad_kind():
    with pytest.raises(NotFittedError):
        FixedConfidenceSelector().summary()
    with pytest.raises(ValueError):
        ReductionSelector(kind="median").fit(BanditEnv(UniformInterval(0, 1), 0))
    with pytest.raises(TypeError):
        QuantileEstimator().fit([[1.0, 2.0]])

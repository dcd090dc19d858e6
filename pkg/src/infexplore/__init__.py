"""Pure-exploration algorithms for infinitely many Bernoulli arms."""
from .env import ArmRecord, BanditEnv, BudgetExhausted
from .estimators import (FixedBudgetSelector, FixedConfidenceSelector, MultiArmSelector,
                         QuantileEstimator, ReductionSelector, UniformAllocation)
from .fisher import fisher_distance, rate_constant, theta, theta_inv
from .fixed_budget import (BudgetSchedule, BudgetScheduleParams, build_schedule,
                           run_fixed_budget, run_multi_arm, should_reject, uniform_allocation)
from .fixed_confidence import (ConfidenceParams, QuantileEstimate, accept_loop,
                               estimate_quantile, solve_fixed_confidence)
from .records import RunRecord
from .reductions import reduce_alpha_above_half, reduce_ess_sup, reduce_unknown_alpha_avg
from .reservoir import (DiscreteAtoms, PiecewiseConstantDensity, UniformInterval,
                        admissible_reservoir, parse_reservoir)

__version__ = "0.1.0"

"""Fixed-budget selection when the target quantile value is unknown.

Each reduction spends a vanishing fraction of the budget estimating a
quantile value, then runs the fixed-budget algorithm on what is left with
``(alpha, beta)`` derived from the estimate. The estimation sizes grow like
``N / ln^2 N`` times polynomial factors, so at desk-scale budgets the
estimation phase usually cannot finish. In that case the arm being sampled
when the budget ran out is the output.
"""
import math

from ._validation import ceil_int, check_count, check_scalar_in
from .env import BudgetExhausted
from .fixed_budget import BudgetScheduleParams, BudgetSchedule, run_fixed_budget
from .fixed_confidence import SUCCESS_TOL, estimate_quantile
from .records import RunRecord

__all__ = [
    "clamp_run_params",
    "reduction_constants",
    "slice_count",
    "reduce_unknown_alpha_avg",
    "reduce_alpha_above_half",
    "reduce_ess_sup",
]

_EDGE = 1e-9


def reduction_constants(N):
    """``ln N``, ``ln^{-1/3} N`` and ``ln(1/delta')`` with
    ``delta' = exp(-10 N / ln^2 N)`` (kept in log form; it underflows)."""
    N = check_count(N, "N", 3)
    log_n = math.log(N)
    return log_n, log_n ** (-1.0 / 3.0), 10.0 * N / log_n ** 2


def slice_count(eps, eta1, eta2):
    """Number ``J`` of quantile slices used by the quantile-average reduction."""
    return ceil_int(6.0 / (eps * (eta1 - eta2)))


def clamp_run_params(alpha, beta, rho):
    """Force ``0 < beta <= alpha - 2 rho`` and ``alpha < 1``.

    Returns ``(alpha, beta, clamped)``. Used when a derived parameter leaves
    its valid range at small ``N``.
    """
    a, b = alpha, beta
    a = min(max(a, 2 * rho + 2 * _EDGE), 1.0 - _EDGE)
    b = min(b, a - 2 * rho)
    b = max(b, _EDGE)
    clamped = abs(a - alpha) > 1e-15 or abs(b - beta) > 1e-15
    return a, b, clamped


def _run_reduction(env, N, estimate, make_run, target, rho, rho1, rho2, degenerate):
    """Shared driver: ``estimate()`` returns ``(alpha_hat, info)`` or raises
    BudgetExhausted; ``make_run(alpha_hat)`` gives ``(alpha, beta)``."""
    start = env.samples_used
    arms0 = env.n_arms
    saved = env.budget
    cap = start + N if saved is None else min(saved, start + N)
    env.budget = cap
    extra = {}
    try:
        try:
            alpha_hat, info = estimate()
        except BudgetExhausted as exc:
            chosen = exc.arm
            extra.update(estimation_complete=False, estimation_samples=env.samples_used - start)
        else:
            extra.update(info, estimation_complete=True, alpha_hat=alpha_hat,
                         estimation_samples=env.samples_used - start)
            a_run, b_run = make_run(alpha_hat)
            a_run, b_run, clamped = clamp_run_params(a_run, b_run, rho)
            degenerate = degenerate or clamped
            extra.update(alpha_run=a_run, beta_run=b_run)
            left = cap - env.samples_used
            if left < 2:
                # nothing to spend: the last estimation arm stands
                chosen = env.n_arms - 1
            else:
                sched = BudgetSchedule(BudgetScheduleParams(left, a_run, b_run, rho, rho1, rho2))
                rec = run_fixed_budget(env, sched, left)
                chosen = rec.chosen
    finally:
        env.budget = saved
    mean = env.true_mean(chosen)
    return RunRecord(
        chosen=int(chosen),
        true_mean=mean,
        samples_used=env.samples_used - start,
        arms_touched=env.n_arms - arms0,
        success=bool(mean >= target - SUCCESS_TOL),
        target=target,
        degenerate_params=bool(degenerate),
        extra=extra,
    )


def reduce_unknown_alpha_avg(env, N, eta1, eta2, eps, rho=0.05, rho1=0.05, rho2=0.1, C=4.0):
    """Target: mean at least the quantile average over ``[1-eta1, 1-eta2]``
    minus ``eps``.

    ``J`` equal slices of the quantile range are each estimated to accuracy
    ``ln^{-1/3} N``; their average ``a`` drives a fixed-budget run with
    ``(a - eps/4, a - eps/2)``.
    """
    eta1 = check_scalar_in(eta1, "eta1", 0.0, 1.0, closed_low=False, closed_high=False)
    eta2 = check_scalar_in(eta2, "eta2", 0.0, 1.0, closed_low=False, closed_high=False)
    eps = check_scalar_in(eps, "eps", 0.0, 1.0, closed_low=False)
    if not eta2 < eta1:
        raise ValueError(f"need eta2 < eta1, got eta1={eta1}, eta2={eta2}")
    log_n, eps_p, log_inv = reduction_constants(N)
    J = slice_count(eps, eta1, eta2)
    width = (eta1 - eta2) / J
    log_inv_j = log_inv + math.log(J)

    def estimate():
        vals = []
        for j in range(J):
            eta_j = ((J - j) * eta1 + j * eta2) / J
            vals.append(estimate_quantile(env, eta_j, width, eps_p, C=C,
                                          log_inv_delta=log_inv_j).alpha_hat)
        return sum(vals) / J, {"J": J}

    target = env.reservoir.quantile_average(eta1, eta2) - eps
    return _run_reduction(env, N, estimate, lambda a: (a - eps / 4, a - eps / 2),
                          target, rho, rho1, rho2, False)


def reduce_alpha_above_half(env, N, eta, eps, rho=0.05, rho1=0.05, rho2=0.1, C=4.0):
    """Target: mean at least ``G^{-1}(1 - eta) - eps``; meant for reservoirs
    whose ``1 - eta`` quantile is at least ``(1 + eps) / 2``."""
    eta = check_scalar_in(eta, "eta", 0.0, 1.0, closed_low=False, closed_high=False)
    eps = check_scalar_in(eps, "eps", 0.0, 1.0, closed_low=False)
    log_n, eps_p, log_inv = reduction_constants(N)
    eta2 = eps_p
    degenerate = False
    if eta2 >= eta:
        eta2 = eta / 2.0
        degenerate = True
    if eps - 2 * eps_p <= 0:
        degenerate = True

    def estimate():
        est = estimate_quantile(env, eta, eta2, eps_p, C=C, log_inv_delta=log_inv)
        # the estimator's output is alpha_B + eps'
        return est.alpha_hat - eps_p, {"eta2": eta2, "eps_prime": eps_p}

    target = float(env.reservoir.inverse_cdf(1.0 - eta)) - eps
    return _run_reduction(env, N, estimate, lambda a: (a, a - (eps - 2 * eps_p)),
                          target, rho, rho1, rho2, degenerate)


def reduce_ess_sup(env, N, eps, eps1, rho=0.05, rho1=0.05, rho2=0.1, C=4.0):
    """Target: mean at least ``ess sup - eps1`` (requires ``eps1 > eps``)."""
    eps = check_scalar_in(eps, "eps", 0.0, 1.0, closed_low=False)
    eps1 = check_scalar_in(eps1, "eps1", 0.0, 1.0, closed_low=False)
    if not eps1 > eps:
        raise ValueError(f"need eps1 > eps, got eps={eps}, eps1={eps1}")
    log_n, eta1, log_inv = reduction_constants(N)
    eps_p = eps1 - eps

    def estimate():
        est = estimate_quantile(env, eta1, eta1 / 2.0, eps_p, C=C, log_inv_delta=log_inv)
        # the estimator's output is alpha_C + (eps1 - eps)/2
        return est.alpha_hat - eps_p / 2.0, {"eta1": eta1, "eps_prime": eps_p}

    target = env.reservoir.ess_sup() - eps1
    return _run_reduction(env, N, estimate, lambda a: (a, a - eps),
                          target, rho, rho1, rho2, False)

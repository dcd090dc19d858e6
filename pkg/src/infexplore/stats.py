"""Exact binomial and hypergeometric primitives plus rate-function oracles.

Point masses come from scipy.stats (Boost's incomplete-beta derivative),
which normalizes to machine precision for n in the tens of thousands. The
log-space variants use log-beta and stay finite far into the tails where
the plain masses underflow.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import special, stats

from ._validation import check_count, check_scalar_in

__all__ = [
    "binom_logpmf",
    "binom_pmf",
    "binom_cdf",
    "binom_logcdf",
    "hypergeom_logpmf",
    "hypergeom_pmf",
    "moderate_rate",
    "binomial_lower_tail",
    "TailBoundReport",
    "DominanceReport",
    "convex_dominance_check",
    "kl_bernoulli",
]


def _log_choose(n, k):
    # log C(n, k) = -log(n+1) - log B(k+1, n-k+1)
    return -np.log1p(n) - special.betaln(k + 1.0, n - k + 1.0)


def binom_logpmf(n, p, k):
    n = check_count(n, "n")
    p = check_scalar_in(p, "p", 0.0, 1.0)
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k > n):
        raise ValueError(f"k must lie in [0, n={n}]")
    k = k.astype(np.float64)
    out = _log_choose(n, k) + special.xlogy(k, p) + special.xlog1py(n - k, -p)
    return float(out) if out.ndim == 0 else out


def binom_pmf(n, p, k):
    """``C(n, k) p**k (1-p)**(n-k)`` (vectorized over ``k``)."""
    n = check_count(n, "n")
    p = check_scalar_in(p, "p", 0.0, 1.0)
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k > n):
        raise ValueError(f"k must lie in [0, n={n}]")
    out = stats.binom.pmf(k, n, p)
    return float(out) if np.ndim(out) == 0 else out


def binom_cdf(n, p, k):
    """``P[Bin(n, p) <= k]``; ``k < 0`` gives 0 and ``k >= n`` gives 1."""
    n = check_count(n, "n")
    p = check_scalar_in(p, "p", 0.0, 1.0)
    k = np.floor(np.asarray(k, dtype=np.float64))
    out = np.where(k < 0, 0.0, np.where(k >= n, 1.0, special.bdtr(np.clip(k, 0, n), n, p)))
    return float(out) if out.ndim == 0 else out


def binom_logcdf(n, p, k):
    """Log of :func:`binom_cdf` that stays finite deep in the lower tail."""
    n = check_count(n, "n")
    p = check_scalar_in(p, "p", 0.0, 1.0)
    k = math.floor(k)
    if k < 0:
        return -math.inf
    if k >= n:
        return 0.0
    direct = special.bdtr(k, n, p)
    if direct > 1e-280:
        return math.log(direct)
    ks = np.arange(0, k + 1)
    return float(special.logsumexp(binom_logpmf(n, p, ks)))


def hypergeom_logpmf(A, B, C, k):
    """Log-pmf of ``HyperGeom(A, B, C)``: ``B`` draws without replacement from
    a population of ``A`` containing ``C`` successes."""
    A = check_count(A, "A")
    B = check_count(B, "B")
    C = check_count(C, "C")
    if B > A or C > A:
        raise ValueError(f"need B <= A and C <= A, got A={A}, B={B}, C={C}")
    k = np.asarray(k)
    lo, hi = max(0, B + C - A), min(B, C)
    if np.any(k < lo) or np.any(k > hi):
        raise ValueError(f"k must lie in [{lo}, {hi}] for (A, B, C)=({A}, {B}, {C})")
    k = k.astype(np.float64)
    out = _log_choose(C, k) + _log_choose(A - C, B - k) - _log_choose(A, B)
    return float(out) if out.ndim == 0 else out


def hypergeom_pmf(A, B, C, k):
    """``C(B, k) C(A-B, C-k) / C(A, C)``, symmetric to the draws/successes
    reading used by :func:`hypergeom_logpmf`."""
    hypergeom_logpmf(A, B, C, k)  # argument checks only
    out = stats.hypergeom.pmf(np.asarray(k), A, C, B)
    return float(out) if np.ndim(out) == 0 else out


def kl_bernoulli(a, b):
    """KL divergence ``KL(Ber(a) || Ber(b))``."""
    return float(special.xlogy(a, a / b) + special.xlogy(1 - a, (1 - a) / (1 - b)))


def moderate_rate(p, delta, n):
    """Reference rate ``exp(-delta**2 n / (2 p (1-p)))``."""
    p = check_scalar_in(p, "p", 0.0, 1.0, closed_low=False, closed_high=False)
    delta = check_scalar_in(delta, "delta", 0.0)
    n = check_scalar_in(n, "n", 0.0)
    return math.exp(-delta * delta * n / (2.0 * p * (1.0 - p)))


@dataclass(frozen=True)
class TailBoundReport:
    n: int
    p: float
    delta: float
    exact_tail: float
    rate_bound: float
    log_exact_tail: float
    log_rate_bound: float

    @property
    def normalized_gap(self):
        """``|log exact - log rate| / (n delta**2)``."""
        return abs(self.log_exact_tail - self.log_rate_bound) / (self.n * self.delta ** 2)


def binomial_lower_tail(n, p, delta):
    """Exact ``P[Bin(n, p)/n <= p - delta]`` next to the moderate rate."""
    n = check_count(n, "n", 1)
    log_tail = binom_logcdf(n, p, math.floor(n * (p - delta) + 1e-9))
    log_rate = -delta * delta * n / (2.0 * p * (1.0 - p))
    return TailBoundReport(n, p, delta, math.exp(log_tail), math.exp(log_rate),
                           log_tail, log_rate)


@dataclass(frozen=True)
class DominanceReport:
    A: int
    B: int
    C: int
    f: str
    e_hypergeom: float
    e_binom: float

    @property
    def holds(self):
        return self.e_hypergeom <= self.e_binom * (1 + 1e-12) + 1e-15


def _test_function(spec):
    if spec in ("square", "x^2", "x2"):
        return lambda x: x * x
    kind, _, arg = spec.partition(":")
    if kind == "exp":
        t = float(arg)
        return lambda x: np.exp(t * x)
    if kind == "abs":
        m = float(arg)
        return lambda x: np.abs(x - m)
    raise ValueError(f"unknown test function {spec!r}; use square, exp:T or abs:M")


def convex_dominance_check(A, B, C, f="square"):
    """Compare ``E f(HyperGeom(A, B, C))`` with ``E f(Bin(B, C/A))`` exactly.

    ``f`` is ``"square"``, ``"exp:T"`` for ``exp(T x)`` or ``"abs:M"`` for
    ``|x - M|``.
    """
    A = check_count(A, "A", 1)
    if A > 40:
        raise ValueError("exhaustive check limited to A <= 40")
    fn = _test_function(f)
    lo, hi = max(0, B + C - A), min(B, C)
    ks = np.arange(lo, hi + 1)
    e_hg = float(np.sum(hypergeom_pmf(A, B, C, ks) * fn(ks.astype(float))))
    kb = np.arange(0, B + 1)
    e_bin = float(np.sum(binom_pmf(B, C / A, kb) * fn(kb.astype(float))))
    return DominanceReport(A, B, C, f, e_hg, e_bin)

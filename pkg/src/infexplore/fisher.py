"""Fisher information geometry of the Bernoulli family.

The map ``theta(a) = arccos(1 - 2a)`` is the Fisher distance from 0 to ``a``;
it turns the Bernoulli family into a constant-speed path of length pi.
"""
import math

import numpy as np
from scipy import integrate

from ._validation import check_scalar_in

__all__ = [
    "theta",
    "theta_inv",
    "fisher_distance",
    "rate_constant",
    "rate_constant_quadrature",
]


def _check_mean_array(a, name):
    arr = np.asarray(a, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


def theta(a):
    """Arcsine parametrization of a Bernoulli mean (scalar or array)."""
    arr = _check_mean_array(a, "a")
    # 2 asin(sqrt(a)) keeps relative accuracy near 0, and the mirrored form
    # near 1, where arccos(1 - 2a) would round 1 - 2a to 1
    with np.errstate(invalid="ignore"):
        out = np.where(arr <= 0.5, 2.0 * np.arcsin(np.sqrt(arr)),
                       math.pi - 2.0 * np.arcsin(np.sqrt(1.0 - arr)))
    return float(out) if out.ndim == 0 else out


def theta_inv(t):
    """Inverse of :func:`theta`: ``(1 - cos t) / 2``."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > math.pi):
        raise ValueError("t must lie in [0, pi]")
    out = 0.5 * (1.0 - np.cos(arr))
    return float(out) if out.ndim == 0 else out


def fisher_distance(a, b):
    """Fisher information distance between Bernoulli(a) and Bernoulli(b)."""
    a = _check_mean_array(a, "a")
    b = _check_mean_array(b, "b")
    out = _distance(a, b)
    return float(out) if out.ndim == 0 else out


def _distance(a, b):
    # sin(d/2) = (a - b) / (sqrt(a(1-b)) + sqrt(b(1-a))), which avoids the
    # cancellation of theta(a) - theta(b) when a and b are close
    den = np.sqrt(a) * np.sqrt(1.0 - b) + np.sqrt(b) * np.sqrt(1.0 - a)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(den > 0, np.abs(a - b) / np.where(den > 0, den, 1.0), 0.0)
    return 2.0 * np.arcsin(np.minimum(ratio, 1.0))


def rate_constant(alpha, beta):
    """Optimal fixed-budget exponent constant ``d_F(alpha, beta)**2 / 2``.

    Requires ``0 <= beta < alpha <= 1``.
    """
    alpha = check_scalar_in(alpha, "alpha", 0.0, 1.0)
    beta = check_scalar_in(beta, "beta", 0.0, 1.0)
    if not beta < alpha:
        raise ValueError(f"need beta < alpha, got alpha={alpha}, beta={beta}")
    return 0.5 * float(_distance(np.float64(alpha), np.float64(beta))) ** 2


def _arcsine_integral(lo, hi):
    # x = s^2 on [0, 1/2] and x = 1 - s^2 on [1/2, 1]; both give 2/sqrt(1-s^2)
    # with s <= 1/sqrt(2), so the integrand is smooth on every piece.
    def g(s):
        return 2.0 / math.sqrt(1.0 - s * s)

    total = 0.0
    if lo < 0.5:
        a, b = math.sqrt(lo), math.sqrt(min(hi, 0.5))
        total += integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-13)[0]
    if hi > 0.5:
        a, b = math.sqrt(1.0 - hi), math.sqrt(1.0 - max(lo, 0.5))
        total += integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-13)[0]
    return total


def rate_constant_quadrature(alpha, beta):
    """Same constant as :func:`rate_constant`, by numerical integration of
    ``1 / sqrt(x (1 - x))`` over ``[beta, alpha]``. Used as an oracle."""
    alpha = check_scalar_in(alpha, "alpha", 0.0, 1.0)
    beta = check_scalar_in(beta, "beta", 0.0, 1.0)
    if not beta < alpha:
        raise ValueError(f"need beta < alpha, got alpha={alpha}, beta={beta}")
    return 0.5 * _arcsine_integral(beta, alpha) ** 2

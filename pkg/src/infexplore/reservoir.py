"""Reservoir distributions over arm means in [0, 1].

Three concrete families are supported: finitely many atoms, a uniform
interval, and a piecewise-constant density. All of them expose a CDF, its
left-continuous inverse (the quantile function) and the essential supremum.
Quantile functions are vectorized so arm means can be drawn in bulk.
"""
from dataclasses import dataclass, field
import math
import re

import numpy as np
from scipy import integrate

from ._validation import check_probability, check_scalar_in
from .fisher import theta, theta_inv

__all__ = [
    "Reservoir",
    "DiscreteAtoms",
    "UniformInterval",
    "PiecewiseConstantDensity",
    "AdmissibleReservoir",
    "cdf",
    "inverse_cdf",
    "ess_sup",
    "quantile_average",
    "admissible_reservoir",
    "parse_reservoir",
    "ReservoirParseError",
]

MASS_TOL = 1e-12


def _check_q(q):
    arr = np.asarray(q, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr <= 0.0) or np.any(arr > 1.0):
        raise ValueError("quantile level q must lie in (0, 1]")
    return arr


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


class Reservoir:
    """Base class; subclasses are immutable value objects."""

    def cdf(self, tau):
        raise NotImplementedError

    def inverse_cdf(self, q):
        raise NotImplementedError

    def ess_sup(self):
        return self.inverse_cdf(1.0)

    def quantile_average(self, eta1, eta2):
        """Average of the quantile function over ``[1 - eta1, 1 - eta2]``."""
        eta1 = check_probability(eta1, "eta1", allow_one=False)
        eta2 = check_probability(eta2, "eta2", allow_one=False)
        if not eta2 < eta1:
            raise ValueError(f"need eta2 < eta1, got eta1={eta1}, eta2={eta2}")
        return self._quantile_integral(1.0 - eta1, 1.0 - eta2) / (eta1 - eta2)

    def _quantile_integral(self, a, b):
        raise NotImplementedError

    def sample(self, size, rng):
        """Draw ``size`` means with a numpy ``Generator``."""
        u = rng.random(size)
        return self.inverse_cdf(1.0 - u)

    def to_spec(self):
        raise NotImplementedError


@dataclass(frozen=True)
class DiscreteAtoms(Reservoir):
    values: tuple
    weights: tuple
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if v.ndim != 1 or v.shape != w.shape or v.size == 0:
            raise ValueError("values and weights must be equal-length, non-empty")
        if np.any(v < 0) or np.any(v > 1) or np.any(np.isnan(v)):
            raise ValueError("atom values must lie in [0, 1]")
        if np.any(w < 0) or np.any(np.isnan(w)):
            raise ValueError("atom weights must be nonnegative")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"atom weights sum to {w.sum()!r}, expected 1")
        order = np.argsort(v, kind="stable")
        v, w = v[order], w[order]
        # merge repeated values so the quantile function is well defined
        uniq, inv = np.unique(v, return_inverse=True)
        w = np.bincount(inv, weights=w)
        keep = w > 0
        uniq, w = uniq[keep], w[keep]
        object.__setattr__(self, "values", tuple(uniq.tolist()))
        object.__setattr__(self, "weights", tuple(w.tolist()))
        cum = np.cumsum(w)
        cum[-1] = 1.0
        object.__setattr__(self, "_cum", cum)

    def cdf(self, tau):
        t = np.asarray(tau, dtype=np.float64)
        idx = np.searchsorted(np.asarray(self.values), t, side="right")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return _scalar_or_array(out)

    def inverse_cdf(self, q):
        q = _check_q(q)
        idx = np.searchsorted(self._cum, q - MASS_TOL, side="left")
        idx = np.minimum(idx, len(self.values) - 1)
        return _scalar_or_array(np.asarray(self.values)[idx])

    def ess_sup(self):
        return self.values[-1]

    def _quantile_integral(self, a, b):
        lo = np.concatenate(([0.0], self._cum[:-1]))
        overlap = np.clip(np.minimum(self._cum, b) - np.maximum(lo, a), 0.0, None)
        return float(np.dot(overlap, self.values))

    def to_spec(self):
        return "atoms:" + ",".join(f"{v!r}@{w!r}" for v, w in zip(self.values, self.weights))


@dataclass(frozen=True)
class UniformInterval(Reservoir):
    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise ValueError(f"need 0 <= lo < hi <= 1, got lo={self.lo}, hi={self.hi}")

    def cdf(self, tau):
        t = np.asarray(tau, dtype=np.float64)
        return _scalar_or_array(np.clip((t - self.lo) / (self.hi - self.lo), 0.0, 1.0))

    def inverse_cdf(self, q):
        q = _check_q(q)
        return _scalar_or_array(self.lo + q * (self.hi - self.lo))

    def ess_sup(self):
        return float(self.hi)

    def _quantile_integral(self, a, b):
        return (b - a) * self.lo + 0.5 * (b * b - a * a) * (self.hi - self.lo)

    def to_spec(self):
        return f"uniform:{self.lo!r},{self.hi!r}"


@dataclass(frozen=True)
class PiecewiseConstantDensity(Reservoir):
    """Density ``levels[j]`` on ``[breaks[j], breaks[j+1])``."""

    breaks: tuple
    levels: tuple
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.asarray(self.breaks, dtype=np.float64)
        f = np.asarray(self.levels, dtype=np.float64)
        if x.ndim != 1 or x.size < 2 or f.shape != (x.size - 1,):
            raise ValueError("need m+1 breakpoints and m density levels")
        if x[0] < 0 or x[-1] > 1 or np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must increase strictly inside [0, 1]")
        if np.any(f < 0) or np.any(np.isnan(f)):
            raise ValueError("density levels must be nonnegative")
        mass = f * np.diff(x)
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"density integrates to {mass.sum()!r}, expected 1")
        object.__setattr__(self, "breaks", tuple(x.tolist()))
        object.__setattr__(self, "levels", tuple(f.tolist()))
        cum = np.concatenate(([0.0], np.cumsum(mass)))
        cum[-1] = 1.0
        object.__setattr__(self, "_cum", cum)

    @property
    def segment_masses(self):
        return np.diff(self._cum)

    def cdf(self, tau):
        x = np.asarray(self.breaks)
        f = np.asarray(self.levels)
        t = np.clip(np.asarray(tau, dtype=np.float64), x[0], x[-1])
        j = np.clip(np.searchsorted(x, t, side="right") - 1, 0, f.size - 1)
        out = np.minimum(self._cum[j] + f[j] * (t - x[j]), 1.0)
        out = np.where(t >= x[-1], 1.0, out)
        return _scalar_or_array(out)

    def inverse_cdf(self, q):
        q = _check_q(q)
        x = np.asarray(self.breaks)
        f = np.asarray(self.levels)
        ends = self._cum[1:]
        j = np.searchsorted(ends, q - MASS_TOL, side="left")
        j = np.minimum(j, f.size - 1)
        # q can sit fractionally above the last positive segment's end
        last_pos = int(np.flatnonzero(f > 0)[-1])
        j = np.minimum(j, last_pos)
        fj = f[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(fj > 0, (q - self._cum[j]) / fj, 0.0)
        out = np.clip(x[j] + step, x[j], x[j + 1])
        return _scalar_or_array(out)

    def ess_sup(self):
        f = np.asarray(self.levels)
        return self.breaks[int(np.flatnonzero(f > 0)[-1]) + 1]

    def _quantile_integral(self, a, b):
        inner = [c for c in self._cum[1:-1] if a < c < b]
        val, _ = integrate.quad(self.inverse_cdf, a, b, points=inner or None,
                                epsabs=1e-10, epsrel=1e-12, limit=200)
        return val

    def to_spec(self):
        return ("density:" + ",".join(repr(v) for v in self.breaks) + ";"
                + ",".join(repr(v) for v in self.levels))


@dataclass(frozen=True)
class AdmissibleReservoir(PiecewiseConstantDensity):
    """Two-level density on ``[gamma_lo, gamma_hi]`` with quantile
    ``1 - eta`` exactly at ``alpha``."""

    alpha: float = 0.0
    beta: float = 0.0
    eta: float = 0.0
    rho: float = 0.0

    @property
    def gamma_lo(self):
        return self.breaks[0]

    @property
    def gamma_hi(self):
        return self.breaks[-1]

    @property
    def f_lo(self):
        return min(self.levels)

    @property
    def f_hi(self):
        return max(self.levels)

    def to_spec(self):
        return (f"admissible:alpha={self.alpha!r},beta={self.beta!r},"
                f"eta={self.eta!r},rho={self.rho!r}")


def admissible_reservoir(alpha, beta, eta, rho):
    """Build the two-level admissible density used by the lower-bound adversary.

    The support ``[gamma_lo, gamma_hi]`` is obtained by moving ``rho**2`` in
    theta-space below ``beta`` and above ``alpha``.
    """
    alpha = check_scalar_in(alpha, "alpha", 0.0, 1.0, closed_low=False, closed_high=False)
    beta = check_scalar_in(beta, "beta", 0.0, 1.0, closed_low=False, closed_high=False)
    eta = check_probability(eta, "eta", allow_one=False)
    rho = check_scalar_in(rho, "rho", 0.0, closed_low=False)
    if not beta < alpha:
        raise ValueError(f"need beta < alpha, got alpha={alpha}, beta={beta}")
    t_lo = theta(beta) - rho * rho
    t_hi = theta(alpha) + rho * rho
    if t_lo <= 0.0 or t_hi >= math.pi:
        raise ValueError(f"rho={rho} pushes the support outside (0, 1)")
    g_lo, g_hi = theta_inv(t_lo), theta_inv(t_hi)
    if not (0.0 < g_lo < beta and alpha < g_hi < 1.0):
        raise ValueError(f"rho={rho} pushes the support outside (0, 1)")
    c1 = (1.0 - eta) / (alpha - g_lo)
    c2 = eta / (g_hi - alpha)
    return AdmissibleReservoir(breaks=(g_lo, alpha, g_hi), levels=(c1, c2),
                               alpha=alpha, beta=beta, eta=eta, rho=rho)


def cdf(res, tau):
    return res.cdf(tau)


def inverse_cdf(res, q):
    return res.inverse_cdf(q)


def ess_sup(res):
    return res.ess_sup()


def quantile_average(res, eta1, eta2):
    return res.quantile_average(eta1, eta2)


class ReservoirParseError(ValueError):
    """Malformed reservoir spec; ``position`` is the 0-based offending column."""

    def __init__(self, message, text, position):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.text = text
        self.position = position


_NUM = re.compile(r"\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*")


def _parse_numbers(text, start, body, sep=","):
    out = []
    pos = 0
    for piece in body.split(sep):
        m = _NUM.fullmatch(piece)
        if m is None:
            raise ReservoirParseError("expected a number", text, start + pos)
        out.append(float(m.group(1)))
        pos += len(piece) + 1
    return out


def parse_reservoir(text):
    """Parse the CLI mini-language.

    ``uniform:LO,HI``, ``atoms:V1@W1,V2@W2,...``,
    ``admissible:alpha=A,beta=B,eta=E,rho=R`` and
    ``density:X0,...,Xm;F1,...,Fm``.
    """
    kind, colon, body = text.partition(":")
    if not colon:
        raise ReservoirParseError("missing ':' after reservoir kind", text, len(text))
    start = len(kind) + 1
    kind = kind.strip().lower()
    try:
        if kind == "uniform":
            vals = _parse_numbers(text, start, body)
            if len(vals) != 2:
                raise ReservoirParseError("uniform needs exactly LO,HI", text, start)
            return UniformInterval(*vals)
        if kind == "atoms":
            values, weights = [], []
            pos = start
            for piece in body.split(","):
                v, at, w = piece.partition("@")
                if not at:
                    raise ReservoirParseError("atom needs VALUE@WEIGHT", text, pos)
                values.extend(_parse_numbers(text, pos, v))
                weights.extend(_parse_numbers(text, pos + len(v) + 1, w))
                pos += len(piece) + 1
            return DiscreteAtoms(tuple(values), tuple(weights))
        if kind == "admissible":
            params = {}
            pos = start
            for piece in body.split(","):
                key, eq, val = piece.partition("=")
                key = key.strip().lower()
                if not eq or key not in ("alpha", "beta", "eta", "rho"):
                    raise ReservoirParseError("expected alpha=,beta=,eta=,rho=", text, pos)
                params[key] = _parse_numbers(text, pos + len(key) + 1, val)[0]
                pos += len(piece) + 1
            missing = {"alpha", "beta", "eta", "rho"} - params.keys()
            if missing:
                raise ReservoirParseError(f"missing {sorted(missing)}", text, len(text))
            return admissible_reservoir(**params)
        if kind == "density":
            xs, semi, fs = body.partition(";")
            if not semi:
                raise ReservoirParseError("density needs BREAKS;LEVELS", text, start + len(xs))
            breaks = _parse_numbers(text, start, xs)
            levels = _parse_numbers(text, start + len(xs) + 1, fs)
            return PiecewiseConstantDensity(tuple(breaks), tuple(levels))
    except ReservoirParseError:
        raise
    except ValueError as exc:
        raise ReservoirParseError(str(exc), text, start) from exc
    raise ReservoirParseError(f"unknown reservoir kind {kind!r}", text, 0)

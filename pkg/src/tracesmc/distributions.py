"""Quantile functions and densities for the built-in distribution families.

Sampling is inverse-transform only: a draw ``u`` in [0, 1] taken from the
trace is pushed through ``inv_cdf``.  All functions take plain floats and
raise :class:`DistributionError` on invalid parameters; the evaluator turns
that into a stuck term.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy.special import betainc, betaincinv, ndtri

__all__ = [
    "Dist",
    "DistParams",
    "DistributionError",
    "inv_cdf",
    "density",
    "cdf",
    "normal_ppf",
    "QUANTILES",
    "DENSITIES",
]

# Smallest positive double; quantiles at u=0 or u=1 are evaluated here so
# they stay finite (about 38.5 standard deviations for the normal).
_TINY = 5e-324
_INF = math.inf
_LN_TINY = math.log(_TINY)
_NDTRI_TINY = float(ndtri(_TINY))


class DistributionError(ValueError):
    pass


class Dist(enum.IntEnum):
    BERNOULLI = 0
    UNIFORM = 1
    NORMAL = 2
    EXPONENTIAL = 3
    BETA = 4

    @property
    def arity(self) -> int:
        return _ARITY[self]


_ARITY = {Dist.BERNOULLI: 1, Dist.UNIFORM: 2, Dist.NORMAL: 2, Dist.EXPONENTIAL: 1, Dist.BETA: 2}


@dataclass(frozen=True)
class DistParams:
    dist: Dist
    params: tuple

    def __post_init__(self):
        if len(self.params) != self.dist.arity:
            raise DistributionError(
                f"{self.dist.name.lower()} takes {self.dist.arity} parameter(s), got {len(self.params)}"
            )


def _real(x) -> float:
    if type(x) is not float and type(x) is not int:
        raise DistributionError(f"parameter is not a real: {x!r}")
    x = float(x)
    if x != x:
        raise DistributionError("parameter is NaN")
    return x


def _check_u(u: float) -> float:
    if not (0.0 <= u <= 1.0):
        raise DistributionError(f"quantile level outside [0, 1]: {u!r}")
    return u


# -- Bernoulli ---------------------------------------------------------------

def _bern_p(p) -> float:
    p = _real(p)
    if not (0.0 <= p <= 1.0):
        raise DistributionError(f"bernoulli probability outside [0, 1]: {p}")
    return p


def bern_quantile(p, u):
    # Outcome 1 occupies the lower part of the unit interval.
    if type(p) is float and 0.0 <= p <= 1.0 and 0.0 <= u <= 1.0:
        return 1.0 if u <= p else 0.0
    p = _bern_p(p)
    return 1.0 if _check_u(u) <= p else 0.0


def bern_density(p, x):
    p = _bern_p(p)
    if x == 1.0:
        return p
    if x == 0.0:
        return 1.0 - p
    return 0.0


def bern_cdf(p, x):
    # CDF with respect to the order 1 < 0 used by the quantile above.
    p = _bern_p(p)
    if x == 1.0:
        return p
    return 1.0 if x == 0.0 else 0.0


# -- Uniform -----------------------------------------------------------------

def _unif_ab(a, b):
    a, b = _real(a), _real(b)
    if not (a < b) or math.isinf(a) or math.isinf(b):
        raise DistributionError(f"uniform needs finite a < b, got ({a}, {b})")
    return a, b


def unif_quantile(a, b, u):
    a, b = _unif_ab(a, b)
    return a + _check_u(u) * (b - a)


def unif_density(a, b, x):
    a, b = _unif_ab(a, b)
    return 1.0 / (b - a) if a <= x <= b else 0.0


def unif_cdf(a, b, x):
    a, b = _unif_ab(a, b)
    return min(1.0, max(0.0, (x - a) / (b - a)))


# -- Normal, parameterized by mean and variance ---------------------------

def normal_ppf(u: float) -> float:
    """Standard normal quantile; the endpoints map to the extreme finite values."""
    if u <= 0.0:
        return _NDTRI_TINY
    if u >= 1.0:
        return -_NDTRI_TINY
    return float(ndtri(u))


def _norm_mv(mu, var):
    if type(mu) is float and type(var) is float and 0.0 < var < _INF and -_INF < mu < _INF:
        return mu, var
    mu, var = _real(mu), _real(var)
    if not (var > 0.0) or math.isinf(var) or math.isinf(mu):
        raise DistributionError(f"normal needs finite mean and variance > 0, got ({mu}, {var})")
    return mu, var


def norm_quantile(mu, var, u):
    mu, var = _norm_mv(mu, var)
    if not (0.0 <= u <= 1.0):
        _check_u(u)
    return mu + math.sqrt(var) * normal_ppf(u)


def norm_density(mu, var, x):
    mu, var = _norm_mv(mu, var)
    z = x - mu
    return math.exp(-0.5 * z * z / var) / math.sqrt(2.0 * math.pi * var)


def norm_cdf(mu, var, x):
    mu, var = _norm_mv(mu, var)
    return 0.5 * math.erfc(-(x - mu) / math.sqrt(2.0 * var))


# -- Exponential, parameterized by rate -------------------------------------

def _exp_rate(lam):
    lam = _real(lam)
    if not (lam > 0.0) or math.isinf(lam):
        raise DistributionError(f"exponential rate must be finite and > 0, got {lam}")
    return lam


def exp_quantile(lam, u):
    lam = _exp_rate(lam)
    if _check_u(u) >= 1.0:
        return -_LN_TINY / lam
    return -math.log1p(-u) / lam


def exp_density(lam, x):
    lam = _exp_rate(lam)
    return lam * math.exp(-lam * x) if x >= 0.0 else 0.0


def exp_cdf(lam, x):
    lam = _exp_rate(lam)
    return -math.expm1(-lam * x) if x > 0.0 else 0.0


# -- Beta --------------------------------------------------------------------

def _beta_ab(a, b):
    a, b = _real(a), _real(b)
    if not (a > 0.0 and b > 0.0) or math.isinf(a) or math.isinf(b):
        raise DistributionError(f"beta needs finite a > 0 and b > 0, got ({a}, {b})")
    return a, b


def _log_beta_fn(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta_quantile(a, b, u):
    a, b = _beta_ab(a, b)
    u = _check_u(u)
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    x = float(betaincinv(a, b, u))
    if x != x:
        # scipy gives NaN for subnormal u; the quantile has underflowed there
        return 0.0 if u < 0.5 else 1.0
    return x


def beta_density(a, b, x):
    a, b = _beta_ab(a, b)
    if x < 0.0 or x > 1.0:
        return 0.0
    if x == 0.0:
        return math.inf if a < 1.0 else (1.0 / math.exp(_log_beta_fn(a, b)) if a == 1.0 else 0.0)
    if x == 1.0:
        return math.inf if b < 1.0 else (1.0 / math.exp(_log_beta_fn(a, b)) if b == 1.0 else 0.0)
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - _log_beta_fn(a, b))


def beta_cdf(a, b, x):
    a, b = _beta_ab(a, b)
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return float(betainc(a, b, x))


# Dispatch tables indexed by Dist; entries take (*params, x).
QUANTILES = (bern_quantile, unif_quantile, norm_quantile, exp_quantile, beta_quantile)
DENSITIES = (bern_density, unif_density, norm_density, exp_density, beta_density)
CDFS = (bern_cdf, unif_cdf, norm_cdf, exp_cdf, beta_cdf)


def inv_cdf(d: DistParams, u: float) -> float:
    return QUANTILES[d.dist](*d.params, u)


def density(d: DistParams, x: float) -> float:
    return DENSITIES[d.dist](*d.params, x)


def cdf(d: DistParams, x: float) -> float:
    return CDFS[d.dist](*d.params, x)

"""Reference answers the inference engine is checked against.

Everything here is computed independently of the particle filter: closed
forms, quadrature over traces (through the replay semantics, so the oracle
certifies exactly the semantics the engine runs), and Kalman filtering for
the linear-Gaussian tracking model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .semantics import replay


class UnsupportedProgram(ValueError):
    pass


@dataclass
class ReferencePosterior:
    """Either a pmf over a countable support or continuous summaries."""

    pmf: Optional[dict] = None
    mean: Optional[float] = None
    variance: Optional[float] = None
    log_z: Optional[float] = None
    means: list = field(default_factory=list)       # filtering marginals, if any
    variances: list = field(default_factory=list)

    def __post_init__(self):
        if self.pmf is not None and abs(sum(self.pmf.values()) - 1.0) > 1e-9:
            raise ValueError("pmf must sum to 1")
        if self.variance is not None and not self.variance > 0:
            raise ValueError("variance must be positive")


# -- geometric ---------------------------------------------------------------------

def geometric_pmf(k: int, p_continue: float = 0.6) -> float:
    """P(K = k) for the number of flips up to and including the first tails."""
    if k < 1:
        raise ValueError("geometric support starts at 1")
    return p_continue ** (k - 1) * (1.0 - p_continue)


def geometric_reference(kmax: int = 200) -> ReferencePosterior:
    pmf = {float(k): geometric_pmf(k) for k in range(1, kmax + 1)}
    rest = 1.0 - sum(pmf.values())
    pmf[float(kmax)] += rest
    return ReferencePosterior(pmf=pmf, log_z=0.0)


# -- quadrature over one-draw traces ----------------------------------------------

_PROBES = (0.013, 0.25, 0.5, 0.77, 0.991)


def _check_one_draw(t) -> None:
    for u in _PROBES:
        out = replay(t, (u,))
        if out.kind == "failed" and out.reason in ("trace exhausted", "trace not fully consumed"):
            raise UnsupportedProgram(f"traces of length 1 are not complete: {out.reason}")
        if replay(t, ()).kind != "failed" or replay(t, (u, u)).kind != "failed":
            raise UnsupportedProgram("program does not consume exactly one draw")


def quadrature_trace_integral(t, grid: int = 4096, smooth: bool = True):
    """Composite Simpson rule for u -> f_t(<u>) on [0, 1].

    Returns ``(Z, mean, variance)`` where the moments are those of the
    result value under the normalized weights.  ``grid`` is the number of
    subintervals and must be even.  With ``smooth`` the rule is applied after
    the substitution u = (1 - cos(pi v)) / 2, whose vanishing derivative at
    both ends tames the square-root behaviour quantile functions typically
    have there.
    """
    if grid < 2 or grid % 2:
        raise ValueError("grid must be a positive even number")
    _check_one_draw(t)
    v = np.linspace(0.0, 1.0, grid + 1)
    if smooth:
        u = 0.5 * (1.0 - np.cos(np.pi * v))
        jac = 0.5 * np.pi * np.sin(np.pi * v)
    else:
        u, jac = v, np.ones_like(v)
    f = np.zeros_like(u)
    r = np.zeros_like(u)
    for i, x in enumerate(u.tolist()):
        if jac[i] == 0.0 and smooth:
            continue
        out = replay(t, (x,))
        f[i] = out.weight
        if out.weight > 0.0:
            if type(out.result) is not float:
                raise UnsupportedProgram("result is not a real number")
            r[i] = out.result
    c = np.ones(grid + 1)
    c[1:-1:2] = 4.0
    c[2:-1:2] = 2.0
    c *= jac * (1.0 / grid) / 3.0
    z = float(np.dot(c, f))
    if z <= 0.0:
        return z, math.nan, math.nan
    mean = float(np.dot(c, f * r)) / z
    var = float(np.dot(c, f * (r - mean) ** 2)) / z
    return z, mean, var


# -- linear-Gaussian tracking model -----------------------------------------------

def _log_normal_pdf(x, mean, var):
    return -0.5 * (math.log(2.0 * math.pi * var) + (x - mean) ** 2 / var)


def kalman_filter(prior_mean: float, prior_var: float, observations: Sequence[float],
                  drift: float = 2.0, trans_var: float = 1.0, obs_var: float = 4.0):
    """Exact filtering for x_k = x_{k-1} + drift + N(0, trans_var), c_k ~ N(x_k, obs_var).

    Returns ``(means, variances, log_z)``; entry k is the posterior of x_{k+1}
    given c_1..c_{k+1}.  With no observations the lists are empty and
    ``log_z`` is 0 (the prior is the posterior).
    """
    m, v = float(prior_mean), float(prior_var)
    means, variances = [], []
    log_z = 0.0
    for c in observations:
        m, v = m + drift, v + trans_var
        s = v + obs_var
        log_z += _log_normal_pdf(c, m, s)
        gain = v / s
        m = m + gain * (c - m)
        v = (1.0 - gain) * v
        means.append(m)
        variances.append(v)
    return means, variances, log_z


def kalman_reference(prior_mean, prior_var, observations, **kw) -> ReferencePosterior:
    means, variances, log_z = kalman_filter(prior_mean, prior_var, observations, **kw)
    if not means:
        return ReferencePosterior(mean=prior_mean, variance=prior_var, log_z=0.0)
    return ReferencePosterior(mean=means[-1], variance=variances[-1], log_z=log_z,
                              means=means, variances=variances)


def point_mass_filter(steps: Sequence, lo: float = 0.0, hi: float = 100.0,
                      points: int = 10_000, drift: float = 2.0, trans_var: float = 1.0,
                      obs_var: float = 4.0, pad: float = 40.0,
                      emission: Optional[Callable] = None) -> ReferencePosterior:
    """Grid filter for a random walk with drift under a Uniform(lo, hi) prior.

    ``steps`` is a sequence of ``"move"`` and observed reals, applied in
    order; an observation c weights the grid by N(c; emission(x), obs_var)
    (``emission`` defaults to the identity).  The grid covers the prior
    support widened by ``pad`` on the right, since the drift moves mass
    upward, and moves are a discrete convolution with the Gaussian kernel.
    """
    xs = np.linspace(lo, hi + pad, points)
    dx = xs[1] - xs[0]
    p = np.where((xs >= lo) & (xs <= hi), 1.0, 0.0)
    p /= p.sum() * dx
    offs = np.arange(-points + 1, points) * dx
    kern = np.exp(-0.5 * (offs - drift) ** 2 / trans_var) / math.sqrt(2 * math.pi * trans_var)
    mu = xs if emission is None else np.array([emission(x) for x in xs.tolist()])
    log_z = 0.0
    for step in steps:
        if isinstance(step, str):
            if step != "move":
                raise ValueError(f"unknown step {step!r}")
            p = np.convolve(p, kern, mode="full")[points - 1:2 * points - 1] * dx
            continue
        lik = np.exp(-0.5 * (step - mu) ** 2 / obs_var) / math.sqrt(2 * math.pi * obs_var)
        joint = p * lik
        mass = joint.sum() * dx
        log_z += math.log(mass)
        p = joint / mass
    mean = float((xs * p).sum() * dx)
    var = float(((xs - mean) ** 2 * p).sum() * dx)
    return ReferencePosterior(mean=mean, variance=var, log_z=log_z)


def grid_filter(observations: Sequence[float], **kw) -> ReferencePosterior:
    """Tracking model with a uniform prior: move, then observe, for each observation."""
    steps = []
    for c in observations:
        steps += ["move", float(c)]
    return point_mass_filter(steps, **kw)


# -- comparison ------------------------------------------------------------------------

def _weighted(empirical):
    pairs = list(empirical)
    if not pairs:
        raise ValueError("empty empirical distribution")
    vals = [v for v, _ in pairs]
    w = np.array([w for _, w in pairs], dtype=float)
    if w.sum() <= 0:
        raise ValueError("empirical weights sum to zero")
    return vals, w / w.sum()


def empirical_pmf(empirical) -> dict:
    vals, w = _weighted(empirical)
    out: dict = {}
    for v, x in zip(vals, w.tolist()):
        out[v] = out.get(v, 0.0) + x
    return out


def tv_distance(p: dict, q: dict, support=None) -> float:
    keys = set(p) | set(q) if support is None else support
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def compare(empirical, ref: ReferencePosterior, log_z: Optional[float] = None) -> dict:
    """Distances between weighted samples ``[(value, weight)]`` and a reference."""
    out = {}
    if ref.pmf is not None:
        out["tv"] = tv_distance(empirical_pmf(empirical), ref.pmf)
    else:
        vals, w = _weighted(empirical)
        x = np.array(vals, dtype=float)
        mean = float(np.dot(w, x))
        out["mean_error"] = abs(mean - ref.mean)
        if ref.variance is not None:
            out["var_error"] = abs(float(np.dot(w, (x - mean) ** 2)) - ref.variance)
    if log_z is not None and ref.log_z is not None:
        out["log_z_error"] = abs(log_z - ref.log_z)
    return out

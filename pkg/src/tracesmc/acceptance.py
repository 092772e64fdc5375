"""End-to-end acceptance checks, shared by ``tracesmc accept`` and the test suite.

Each check returns a :class:`Outcome` carrying the measured quantities next
to the thresholds they were held to, so callers can print or assert them.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import core as C
from . import distributions as D
from . import oracle as O
from . import rng as R
from . import semantics as S
from . import smc
from .models import load_fixtures, load_model, load_placements
from .report import build_report

# Thresholds.
GEO_TV = 0.02
GEO_SECONDS = 10.0
OBS_MEAN_ERR = 0.01
OBS_Z_REL = 0.05
OBS_SECONDS = 10.0
UNBIASED_RUNS = 400
UNBIASED_SE = 3.0
UNBIASED_SECONDS = 60.0
SSM_MEAN_SD = 0.05
SSM_LOGZ = 0.05
SSM_SECONDS = 30.0
INVARIANCE_TRACES = 1000
PLACEMENT_REPS = 50
PLACEMENT_SE = 3.0
PLACEMENT_SECONDS = 120.0
UNIT_BAND = (0.8, 1.2)
UNIT_MAX_N = 6
DECOMP_TRACES = 1000
DECOMP_TOL = 1e-9
ROUNDTRIP_TOL = 1e-8
KS_ALPHA = 1e-3
KS_SAMPLES = 100_000
CRBD_REPS = 20
CRBD_PARTICLES = 2000
CRBD_SECONDS = 180.0


@dataclass
class Outcome:
    number: int
    name: str
    passed: bool
    seconds: float
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{flag}] criterion {self.number:2d} {self.name} ({self.seconds:.1f} s): {shown}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


class _Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _se(xs) -> float:
    return float(np.std(xs, ddof=1) / math.sqrt(len(xs)))


def _consistent(summary: dict, k: float) -> tuple:
    """Largest pairwise |difference| / combined standard error."""
    worst = 0.0
    for (_, (ma, sa)), (_, (mb, sb)) in itertools.combinations(summary.items(), 2):
        worst = max(worst, abs(ma - mb) / math.hypot(sa, sb))
    return worst <= k, worst


# -- 1: geometric -------------------------------------------------------------------------

def geometric_posterior(particles=100_000, seeds=(1, 2, 3, 4, 5)) -> Outcome:
    t = load_model("geometric_res")
    ref = O.geometric_reference()
    support = [float(k) for k in range(1, 16)]
    with _Clock() as clk:
        pmfs = []
        for s in seeds:
            r = smc.run(t, smc.SmcConfig(particles=particles, seed=s, record_traces=False))
            pmfs.append(O.empirical_pmf(r.posterior()))
    avg = {k: float(np.mean([p.get(k, 0.0) for p in pmfs])) for k in support}
    tv = O.tv_distance(avg, ref.pmf, support=support)
    ok = tv < GEO_TV and clk.seconds < GEO_SECONDS
    return Outcome(1, "geometric posterior", ok, clk.seconds,
                   {"tv": tv, "p1": avg[1.0], "p2": avg[2.0], "p3": avg[3.0]})


# -- 2: Beta-Bernoulli ---------------------------------------------------------------------

def beta_bernoulli(particles=100_000, seed=1) -> Outcome:
    t = load_model("beta_obs")
    with _Clock() as clk:
        z, qmean, _ = O.quadrature_trace_integral(t, grid=4096)
        r = smc.run(t, smc.SmcConfig(particles=particles, seed=seed, record_traces=False))
    mean_err = abs(r.mean() - 4.0 / 7.0)
    z_rel = abs(math.exp(r.log_z) - z) / z
    ok = mean_err < OBS_MEAN_ERR and z_rel < OBS_Z_REL and clk.seconds < OBS_SECONDS
    return Outcome(2, "Beta-Bernoulli posterior", ok, clk.seconds,
                   {"quadrature_Z": z, "mean_err": mean_err, "Z_rel_err": z_rel})


# -- 3: unbiasedness ---------------------------------------------------------------------

def unbiasedness(runs=UNBIASED_RUNS, particles=1000) -> Outcome:
    t = load_model("beta_obs")
    z, _, _ = O.quadrature_trace_integral(t, grid=4096)
    with _Clock() as clk:
        zs = [math.exp(smc.run(t, smc.SmcConfig(particles=particles, seed=s,
                                                record_traces=False)).log_z)
              for s in range(runs)]
    mean, se = float(np.mean(zs)), _se(zs)
    dev = abs(mean - z) / se
    ok = dev <= UNBIASED_SE and clk.seconds < UNBIASED_SECONDS
    return Outcome(3, "Z-hat unbiasedness", ok, clk.seconds,
                   {"mean_Z": mean, "stderr": se, "deviation_se": dev})


# -- 4: linear-Gaussian state space model -----------------------------------------------------

def gaussian_ssm(particles=100_000, seed=1) -> Outcome:
    fx = load_fixtures()["seq_gauss"]
    (m0, v0), obs = fx["prior"], fx["observations"]
    ref = O.kalman_reference(m0, v0, obs)
    t = load_model("seq_gauss")
    with _Clock() as clk:
        r = smc.run(t, smc.SmcConfig(particles=particles, seed=seed, record_traces=False))
    sd = math.sqrt(ref.variance)
    mean_err = abs(r.mean() - ref.mean)
    logz_err = abs(r.log_z - ref.log_z)
    ok = mean_err < SSM_MEAN_SD * sd and logz_err < SSM_LOGZ and clk.seconds < SSM_SECONDS
    return Outcome(4, "linear-Gaussian SSM vs Kalman", ok, clk.seconds,
                   {"mean_err": mean_err, "mean_tol": SSM_MEAN_SD * sd, "logZ_err": logz_err})


# -- 5: placement invariance of replay ------------------------------------------------------

CORPUS = ("geometric", "geometric_res", "beta", "beta_obs", "seq", "seq_gauss", "seq_bare", "loop",
          "unit", "aircraft", "crbd")


def insertable_paths(t) -> list:
    """Every node path where ``resample; _`` may go (not the lambda of a ``let rec``)."""
    out = []
    for p, _ in C.iter_paths(t):
        if p and p[-1] == 0 and isinstance(C.subterm(t, p[:-1]), C.LetRec):
            continue
        out.append(p)
    return out


def random_placement(t, rnd: random.Random, extra: int = 3) -> list:
    sites = C.after_weight_paths(t) + C.sample_sites(t)
    return sites + rnd.sample(insertable_paths(t), extra)


def corpus_traces(t, count: int, seed: int) -> list:
    """Half recorded runs, half random perturbations of them (mostly infeasible)."""
    rnd = random.Random(seed)
    out = []
    for i in range(count):
        stop, draws, _ = S.record(t, R.Stream.of(seed, 0, i), budget=20_000)
        s = list(draws)
        if i % 2:
            kind = rnd.randrange(3)
            if kind == 0 and s:
                s[rnd.randrange(len(s))] = rnd.random()
            elif kind == 1:
                s.append(rnd.random())
            elif s:
                s.pop()
        out.append(tuple(s))
    return out


def _same_outcome(a: S.ReplayOutcome, b: S.ReplayOutcome) -> bool:
    if a.kind != b.kind or a.log_weight != b.log_weight:
        return False
    if a.kind != "value":
        return True
    return a.result == b.result


def placement_invariance(traces=INVARIANCE_TRACES, seed=5) -> Outcome:
    rnd = random.Random(seed)
    checked, positive, mismatches = 0, 0, []
    with _Clock() as clk:
        for name in CORPUS:
            t = load_model(name)
            placed = C.insert_resamples(t, random_placement(t, rnd))
            for s in corpus_traces(t, traces, seed):
                a = S.replay(t, s, budget=20_000)
                b = S.replay(placed, s, budget=20_000)
                checked += 1
                positive += a.positive
                if not _same_outcome(a, b):
                    mismatches.append((name, s))
    return Outcome(5, "placement invariance (replay)", not mismatches, clk.seconds,
                   {"programs": len(CORPUS), "traces": checked, "positive": positive,
                    "mismatches": len(mismatches)})


# -- 6: placement consistency (tracking model) -------------------------------------------------

def placement_summary(t, placements: dict, particles: int, reps: int, seed0: int = 0,
                      **cfg) -> dict:
    """``{name: {"log_z": [...], "seconds": [...], "mean": [...]}}`` over seeds
    ``seed0 .. seed0 + reps - 1``; extra keywords go to :class:`SmcConfig`."""
    out = {}
    for name, sel in placements.items():
        tp = C.insert_resamples(t, C.resolve_placement(t, sel))
        rows = {"log_z": [], "seconds": [], "mean": [], "resamples": C.count_resamples(tp)}
        for s in range(seed0, seed0 + reps):
            t0 = time.perf_counter()
            r = smc.run(tp, smc.SmcConfig(particles=particles, seed=s, record_traces=False, **cfg))
            rows["seconds"].append(time.perf_counter() - t0)
            rows["log_z"].append(r.log_z)
            rows["mean"].append(r.mean() if r.posterior() and _real_valued(r) else math.nan)
        out[name] = rows
    return out


def _real_valued(r) -> bool:
    return all(type(v) is float for v, _ in r.posterior())


def placement_consistency(particles=10_000, reps=PLACEMENT_REPS) -> Outcome:
    t = load_model("seq_bare")
    with _Clock() as clk:
        summ = placement_summary(t, load_placements("seq_bare"), particles, reps)
    stats_ = {k: (float(np.mean(v["log_z"])), _se(v["log_z"])) for k, v in summ.items()}
    ok, worst = _consistent(stats_, PLACEMENT_SE)
    ok = ok and clk.seconds < PLACEMENT_SECONDS
    return Outcome(6, "placement consistency (SMC)", ok, clk.seconds,
                   {**{f"logZ[{k}]": m for k, (m, _) in stats_.items()}, "max_diff_se": worst})


# -- 7: pathological programs ----------------------------------------------------------------

def pathological(particles=10_000, seed=0) -> Outcome:
    with _Clock() as clk:
        loop = smc.run(load_model("loop"), smc.SmcConfig(particles=1000, max_rounds=10))
        unit = load_model("unit")
        r = smc.run(unit, smc.SmcConfig(particles=particles, seed=seed, record_traces=False))
        z_n = [math.exp(z) for z in r.log_z_history[:UNIT_MAX_N + 1]]
        completed, zero = 0, 0
        for i in range(1000):
            stop, draws, lw = S.record(unit, R.Stream.of(seed, 0, i))
            if stop.kind == "value":
                completed += 1
                zero += S.replay(unit, draws).weight == 0.0 and lw == -math.inf
    band = all(UNIT_BAND[0] <= z <= UNIT_BAND[1] for z in z_n) and len(z_n) == UNIT_MAX_N + 1
    ok = loop.termination == "round-cap" and loop.rounds == 10 and band and completed == zero > 0
    return Outcome(7, "pathological programs", ok, clk.seconds,
                   {"loop": loop.termination, "Z_n": z_n, "completed": completed,
                    "zero_density": zero})


# -- 8: decomposition -------------------------------------------------------------------------

def decomposition_check(t, s) -> tuple:
    """Check every n for one feasible trace; returns (checks, worst error, all unique)."""
    checks, worst, unique = 0, 0.0, True
    n = 1
    while True:
        pos = S.stop_position(t, s, n)
        prev = S.stop_position(t, s, n - 1)
        sn = s[:pos]
        full = S.replay_limited(t, sn, n)
        ks = S.split_points(t, sn, n)
        unique &= ks == [prev]
        head = S.replay_limited(t, sn[:prev], n - 1)
        tail = S.replay_limited(head.result, sn[prev:], 1)
        worst = max(worst, abs(full.log_weight - (head.log_weight + tail.log_weight)))
        checks += 1
        if full.kind == "value":
            return checks, worst, unique
        n += 1


def _smc_traces(t, count, seed):
    out, s = [], seed
    seen = set()
    while len(out) < count:
        r = smc.run(t, smc.SmcConfig(particles=2000, seed=s))
        for j, (v, w) in enumerate(zip(r.values, r.weights)):
            if w > 0:
                tr = r.trace(j)
                if tr not in seen:
                    seen.add(tr)
                    out.append(tr)
        s += 1
    return out[:count]


def decomposition(traces=DECOMP_TRACES, seed=11) -> Outcome:
    crbd = load_model("crbd")
    crbd = C.insert_resamples(crbd, C.resolve_placement(crbd, load_placements("crbd")["all"]))
    seq = load_model("seq")
    metrics = {}
    ok = True
    with _Clock() as clk:
        seq_traces = [S.record(seq, R.Stream.of(seed, 0, i))[1] for i in range(traces)]
        for name, t, ts in (("seq", seq, seq_traces), ("crbd", crbd, _smc_traces(crbd, traces, seed))):
            checks, worst, unique = 0, 0.0, True
            for s in ts:
                c, w, u = decomposition_check(t, s)
                checks, worst, unique = checks + c, max(worst, w), unique and u
            ok = ok and unique and worst <= DECOMP_TOL
            metrics[f"{name}_splits"] = checks
            metrics[f"{name}_max_err"] = worst
    return Outcome(8, "decomposition identity", ok, clk.seconds, metrics)


# -- 9: distributions -------------------------------------------------------------------------

KS_CASES = (
    (D.Dist.UNIFORM, (2.0, 5.0), stats.uniform(2.0, 3.0)),
    (D.Dist.NORMAL, (1.0, 4.0), stats.norm(1.0, 2.0)),
    (D.Dist.EXPONENTIAL, (1.5,), stats.expon(scale=1 / 1.5)),
    (D.Dist.BETA, (2.0, 2.0), stats.beta(2.0, 2.0)),
    (D.Dist.BETA, (0.5, 3.0), stats.beta(0.5, 3.0)),
)


def distribution_layer(samples=KS_SAMPLES, seed=3) -> Outcome:
    grid = (np.arange(1000) + 0.5) / 1000
    worst = 0.0
    min_p = 1.0
    with _Clock() as clk:
        for dist, params, _ in KS_CASES:
            d = D.DistParams(dist, params)
            for u in grid.tolist():
                worst = max(worst, abs(D.cdf(d, D.inv_cdf(d, u)) - u))
        u = R.uniforms(seed, 0, 0, R.MUTATION, samples).tolist()
        for dist, params, ref in KS_CASES:
            d = D.DistParams(dist, params)
            xs = [D.inv_cdf(d, x) for x in u]
            min_p = min(min_p, stats.kstest(xs, ref.cdf).pvalue)
        bern = D.DistParams(D.Dist.BERNOULLI, (0.6,))
        above = math.nextafter(0.6, 1.0)
        exact = (D.inv_cdf(bern, 0.6) == 1.0 and D.inv_cdf(bern, above) == 0.0
                 and D.inv_cdf(bern, 0.5) == 1.0 and D.inv_cdf(bern, 0.7) == 0.0)
    ok = worst < ROUNDTRIP_TOL and min_p > KS_ALPHA and exact
    return Outcome(9, "distribution layer", ok, clk.seconds,
                   {"roundtrip_err": worst, "min_ks_p": min_p, "bernoulli_exact": exact})


# -- 10: CRBD placements -----------------------------------------------------------------------

def crbd_experiment(particles=CRBD_PARTICLES, reps=CRBD_REPS) -> Outcome:
    t = load_model("crbd")
    with _Clock() as clk:
        summ = placement_summary(t, load_placements("crbd"), particles, reps)
    stats_ = {k: (float(np.mean(v["log_z"])), _se(v["log_z"])) for k, v in summ.items()}
    ok, worst = _consistent(stats_, PLACEMENT_SE)
    med = {k: float(np.median(v["seconds"])) for k, v in summ.items()}
    faster = med["extinction-and-edge"] <= med["all"]
    ok = ok and faster and clk.seconds < CRBD_SECONDS
    return Outcome(10, "CRBD placement experiment", ok, clk.seconds,
                   {**{f"logZ[{k}]": m for k, (m, _) in stats_.items()}, "max_diff_se": worst,
                    **{f"median_s[{k}]": v for k, v in med.items()}})


# -- 11: determinism across thread counts ----------------------------------------------------

def determinism(particles=20_000, seed=4, threads=(1, 4)) -> Outcome:
    digests = {}
    with _Clock() as clk:
        for name in ("seq", "geometric_res", "crbd"):
            t = load_model(name)
            outs = []
            for k in threads:
                r = smc.run(t, smc.SmcConfig(particles=particles, seed=seed, threads=k))
                rep = build_report(name, r, 0.0)
                outs.append(json.dumps([rep["posterior"], rep["log_norm_const"]]).encode())
            digests[name] = len(set(outs)) == 1
    return Outcome(11, "determinism across threads", all(digests.values()), clk.seconds,
                   {k: ("identical" if v else "DIFFERENT") for k, v in digests.items()})


CRITERIA = {
    1: geometric_posterior, 2: beta_bernoulli, 3: unbiasedness, 4: gaussian_ssm,
    5: placement_invariance, 6: placement_consistency, 7: pathological, 8: decomposition,
    9: distribution_layer, 10: crbd_experiment, 11: determinism,
}

SUITES = {
    "quick": (1, 2, 5, 7, 8, 9, 11),
    "full": tuple(CRITERIA),
    "unbiasedness": (3,),
}


def run_suite(name: str, echo=print) -> list:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    results = []
    for k in SUITES[name]:
        out = CRITERIA[k]()
        echo(out.line())
        results.append(out)
    return results

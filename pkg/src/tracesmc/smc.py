"""Bootstrap particle filter over program executions.

Each particle runs the program forward, recording its uniform draws, until
it reaches a ``resample``, finishes with a value, or dies (stuck, over
budget, or zero weight).  The correction weight of a particle is simply the
weight it accumulated during the segment just run.  Finished particles stay
in the population: they take part in selection and pass through mutation
unchanged, so particles may meet different numbers of resamples.

The estimate of the normalizing constant is the product over rounds of the
mean (unnormalized) segment weight.
"""

from __future__ import annotations

import gc
import math
from concurrent.futures import ThreadPoolExecutor
from array import array
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from . import machine as M
from . import rng as R
from .semantics import DEFAULT_BUDGET, program

AT_RESAMPLE, FINISHED, DEAD = 0, 1, 2


class AllDead(Exception):
    """Every particle has weight zero; selection is impossible."""


@dataclass
class SmcConfig:
    particles: int = 1000
    seed: int = 0
    resampling: str = "multinomial"
    max_rounds: int = 10_000
    step_budget: int = DEFAULT_BUDGET
    kill_zero: bool = True
    threads: int = 1
    record_traces: bool = True

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particles must be >= 1")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")
        if self.resampling not in RESAMPLERS:
            raise ValueError(f"unknown resampling scheme {self.resampling!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


class Population:
    """Particles as parallel arrays with cheap per-element writes.

    ``status`` is a bytearray and ``logw`` a ``array('d')``; both have
    zero-copy numpy views.  ``payload[j]`` is the paused ``(code, env, kont)``
    of a particle at a resample, the value of a finished one, or None.
    ``traces[j]`` is the persistent ``(key, count, parent)`` chain (or None when
    traces are not recorded); a link stands for the first ``count`` uniforms
    of stream ``key``.  ``logw[j]`` is the log-weight earned in the
    segment just run.
    """

    __slots__ = ("status", "logw", "payload", "traces", "draws")

    def __init__(self, status: bytearray, logw: array, payload: list, traces: list,
                 draws: int = 0):
        self.status = status
        self.logw = logw
        self.payload = payload
        self.traces = traces
        self.draws = draws

    @classmethod
    def fresh(cls, J: int) -> "Population":
        return cls(bytearray([AT_RESAMPLE]) * J, array("d", bytes(8 * J)), [None] * J, [None] * J)

    @property
    def size(self) -> int:
        return len(self.status)

    def statuses(self) -> np.ndarray:
        return np.frombuffer(self.status, dtype=np.int8)

    def log_weights(self) -> np.ndarray:
        return np.frombuffer(self.logw, dtype=np.float64)

    def paused_indices(self) -> list:
        return np.flatnonzero(self.statuses() == AT_RESAMPLE).tolist()

    def take(self, idx: np.ndarray) -> "Population":
        """Copies of the particles ``idx``, with weights reset to 1."""
        il = idx.tolist()
        payload, traces = self.payload, self.traces
        status = bytearray(self.statuses()[idx].tobytes())
        tr = [traces[i] for i in il] if traces[0] is not None else [None] * len(il)
        return Population(status, array("d", bytes(8 * len(il))), [payload[i] for i in il], tr,
                          self.draws)


@dataclass
class SmcResult:
    values: list
    weights: np.ndarray         # normalized over finished particles
    log_z: float
    ess_history: list
    dead_history: list
    rounds: int
    termination: str            # all-values | round-cap | all-dead
    config: SmcConfig
    final: Population = field(default=None, repr=False)
    log_z_history: list = field(default_factory=list)   # running log Z-hat after each correction

    def posterior(self) -> list:
        """``(value, weight)`` pairs with positive weight, in particle order."""
        return [(v, float(w)) for v, w in zip(self.values, self.weights) if w > 0.0]

    def trace(self, j: int) -> tuple:
        """Full trace of particle ``j`` (all segments, oldest first)."""
        if not self.config.record_traces:
            raise ValueError("traces were not recorded (record_traces=False)")
        return flatten_trace(self.final.traces[j])

    @property
    def dead_count(self) -> int:
        return self.dead_history[-1] if self.dead_history else 0

    def mean(self) -> float:
        post = self.posterior()
        if not post:
            return math.nan
        vals = np.array([v for v, _ in post], dtype=float)
        w = np.array([w for _, w in post])
        return float(np.dot(vals, w) / w.sum())


# -- weights -----------------------------------------------------------------

def log_mean_exp(logw: np.ndarray) -> float:
    m = float(np.max(logw))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.mean(np.exp(logw - m))))


def normalized(logw: np.ndarray) -> np.ndarray:
    """Weights divided by their sum, computed with a max-log shift."""
    m = float(np.max(logw))
    if m == -math.inf:
        raise AllDead()
    w = np.exp(logw - m)
    return w / w.sum()


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    top = w.max() if w.size else 0.0
    if top <= 0.0:
        return 0.0
    w = w / top   # keeps tiny weights from underflowing when squared
    s = w.sum()
    return float(s * s / np.dot(w, w))


# -- selection ---------------------------------------------------------------------

class SelectionStream:
    """Uniforms for the selection step of one round (``rng.random(size)``)."""

    def __init__(self, seed: int, rnd: int):
        self.seed = seed
        self.rnd = rnd
        self.used = 0

    def random(self, size=None):
        count = 1 if size is None else int(size)
        keys = R.stream_keys(self.seed, self.rnd, np.array([0]), R.SELECTION)
        block = R.uniform_block(keys, self.used + count)[0, self.used:]
        self.used += count
        return block[0] if size is None else block


def _cdf(weights):
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0.0:
        raise AllDead()
    cdf = np.cumsum(w / total)
    last = int(np.flatnonzero(w > 0)[-1])
    return cdf, last


def resample_multinomial(weights, rng, J=None) -> np.ndarray:
    """J independent categorical draws proportional to ``weights``."""
    J = len(weights) if J is None else J
    cdf, last = _cdf(weights)
    # sorting makes the CDF lookup cache-friendly; draws are exchangeable
    u = np.sort(np.asarray(rng.random(J), dtype=float))
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, last)


def resample_systematic(weights, rng, J=None) -> np.ndarray:
    """One uniform offset, J evenly spaced points pushed through the CDF."""
    J = len(weights) if J is None else J
    cdf, last = _cdf(weights)
    u0 = float(np.asarray(rng.random(1), dtype=float)[0])
    pts = (np.arange(J) + u0) / J
    idx = np.searchsorted(cdf, pts, side="right")
    return np.minimum(idx, last)


RESAMPLERS = {"multinomial": resample_multinomial, "systematic": resample_systematic}


# -- segments ------------------------------------------------------------------

def _run_particles(prog_code, pop: Population, which: list, cfg: SmcConfig, rnd: int,
                   prefetch: int) -> int:
    """Advance the particles ``which`` by one segment, in place.

    With ``prog_code`` set the particles start from scratch; otherwise they
    continue from their paused resample.  Returns the number of draws.
    """
    if not which:
        return 0
    keys = R.stream_keys(cfg.seed, rnd, np.asarray(which, dtype=np.uint64), R.MUTATION)
    block = R.uniform_block(keys, prefetch).tolist()
    keys = keys.tolist()
    budget, kill_zero, record = cfg.step_budget, cfg.kill_zero, cfg.record_traces
    status, logw, payload, traces = pop.status, pop.logw, pop.payload, pop.traces
    execute = M.execute
    Stream = R.Stream
    AT, VAL = M.AT_RESAMPLE, M.VALUE
    ninf = -math.inf

    def outcome(r):
        kind, lw = r[0], r[5]
        if kind == AT and lw > ninf:
            return AT_RESAMPLE, (r[2], r[3], r[4]), lw
        if kind == VAL and lw > ninf:
            return FINISHED, r[1], lw
        return DEAD, None, ninf

    def work(lo, hi):
        total = 0
        rec = []
        # A segment that draws nothing is a function of its start state alone,
        # so copies of one parent share its outcome.  Entries hold the start
        # state itself, which keeps identity keys from being recycled.
        memo = {}
        for k in range(lo, hi):
            j = which[k]
            start = payload[j] if prog_code is None else None
            hit = memo.get(id(start))
            if hit is not None and hit[0] is start:
                status[j], payload[j], logw[j] = hit[1]
                if record:
                    traces[j] = (0, 0, traces[j])
                continue
            st = Stream(keys[k], block[k])
            if prog_code is not None:
                r = execute(prog_code, (), None, None, 0.0, 0, 0, budget,
                            None, 0, st, rec, kill_zero, False)
            else:
                code, env, kont = start
                r = execute(code, env, None, kont, 0.0, 1, 0, budget,
                            None, 0, st, rec, kill_zero, False)
            out = outcome(r)
            status[j], payload[j], logw[j] = out
            if st.i == 0:
                memo[id(start)] = (start, out)
            total += st.i
            if record:
                # the segment's draws are uniforms 0..count-1 of its stream
                traces[j] = (keys[k], st.i, traces[j])
            if len(rec) > 4096:
                rec.clear()
        return total

    n = len(which)
    if cfg.threads <= 1 or n < 2 * cfg.threads:
        return work(0, n)
    bounds = np.linspace(0, n, cfg.threads + 1).astype(int).tolist()
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        futs = [ex.submit(work, bounds[i], bounds[i + 1]) for i in range(cfg.threads)]
        return sum(f.result() for f in futs)


def _prefetch_size(draws: int, moving: int) -> int:
    if moving == 0:
        return 0
    return int(min(64, math.ceil(draws / moving) + 1))


def init(t, cfg: SmcConfig) -> Population:
    """Round 0: run every particle from the start of the program."""
    J = cfg.particles
    prog = program(t)
    pop = Population.fresh(J)
    pop.draws = _run_particles(prog.code, pop, list(range(J)), cfg, 0, 4)
    return pop


def correct(pop: Population) -> np.ndarray:
    """Correction weights: exactly the segment log-weights."""
    return pop.log_weights().copy()


def mutate(pop: Population, cfg: SmcConfig, rnd: int) -> Population:
    """Continue each paused particle to its next stop; finished ones are untouched."""
    which = pop.paused_indices()
    pop.draws = _run_particles(None, pop, which, cfg, rnd, _prefetch_size(pop.draws, len(which)))
    return pop


def select(pop: Population, logw: np.ndarray, cfg: SmcConfig, rnd: int) -> Population:
    w = normalized(logw)
    idx = RESAMPLERS[cfg.resampling](w, SelectionStream(cfg.seed, rnd))
    return pop.take(idx)


@contextmanager
def _no_gc():
    # A population holds millions of small immutable tuples; letting the cyclic
    # collector rescan them every few thousand allocations dominates runtime.
    was = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was:
            gc.enable()
            # Nothing was promoted while disabled, so the run's cycles (recursive
            # closures) are all in the youngest generation; a full collection
            # would also walk the caller's whole heap.
            gc.collect(0)


def run(t, cfg: SmcConfig) -> SmcResult:
    with _no_gc():
        return _run(program(t), cfg)


def _run(prog, cfg: SmcConfig) -> SmcResult:
    pop = init(prog, cfg)
    log_z = 0.0
    ess_hist, dead_hist, z_hist = [], [], []
    rnd = 0
    while True:
        logw = correct(pop)
        log_z += log_mean_exp(logw)
        z_hist.append(log_z)
        status = pop.statuses()
        dead = int(np.count_nonzero(status == DEAD))
        dead_hist.append(dead)
        if dead == pop.size:
            ess_hist.append(0.0)
            return _finish(pop, logw, -math.inf, ess_hist, dead_hist, rnd, "all-dead", cfg, z_hist)
        ess_hist.append(effective_sample_size(normalized(logw)))
        if not np.any(status == AT_RESAMPLE):
            return _finish(pop, logw, log_z, ess_hist, dead_hist, rnd, "all-values", cfg, z_hist)
        if rnd >= cfg.max_rounds:
            return _finish(pop, logw, log_z, ess_hist, dead_hist, rnd, "round-cap", cfg, z_hist)
        pop = select(pop, logw, cfg, rnd)
        rnd += 1
        pop = mutate(pop, cfg, rnd)


def _finish(pop, logw, log_z, ess_hist, dead_hist, rnd, why, cfg, z_hist) -> SmcResult:
    status = pop.statuses()
    fin = status == FINISHED
    lw = np.where(fin, logw, -math.inf)
    w = normalized(lw) if np.any(fin) else np.zeros(pop.size)
    values = [v if f else None for v, f in zip(pop.payload, fin.tolist())]
    return SmcResult(values, w, log_z, ess_hist, dead_hist, rnd, why, cfg, pop, z_hist)


def flatten_trace(tr) -> tuple:
    """Concatenate the draws of a persistent ``(key, count, parent)`` chain."""
    parts = []
    while tr is not None:
        parts.append(tr)
        tr = tr[2]
    out = []
    for key, count, _ in reversed(parts):
        out.extend(R.uniform_at(key, i) for i in range(count))
    return tuple(out)

"""Operational semantics: stepping, replay of traces, and recorded segments.

A trace is a sequence of numbers in [0, 1].  In *replay* mode each
``sample`` consumes the next trace entry; in *record* mode it draws from a
random stream and appends the draw.  ``n`` bounds how many ``resample``
terms may be passed before execution stops at one (``None`` = no bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from . import core as C
from . import machine as M
from .machine import Clo

DEFAULT_BUDGET = 10_000_000

_KIND_NAMES = {M.VALUE: "value", M.AT_RESAMPLE: "at-resample", M.STUCK: "stuck",
               M.BUDGET: "budget", M.ZERO: "zero"}


class Program:
    """A closed core term together with its compiled form."""

    __slots__ = ("term", "code")

    def __init__(self, term):
        self.term = term
        self.code = M.compile_term(term)


_cache: dict = {}


def program(t) -> Program:
    if isinstance(t, Program):
        return t
    hit = _cache.get(id(t))
    if hit is not None and hit.term is t:
        return hit
    p = Program(t)
    if len(_cache) > 256:
        _cache.clear()
    _cache[id(t)] = p
    return p


# -- machine states --------------------------------------------------------------

@dataclass
class MachineState:
    """Pausable configuration: focus (code+env, or a value being returned),
    continuation, log-weight, trace cursor and resample allowance."""

    code: Optional[tuple]
    env: tuple
    value: object
    kont: Optional[tuple]
    logw: float = 0.0
    n: Optional[int] = None
    steps: int = 0
    trace: Optional[tuple] = None
    pos: int = 0
    stream: object = None
    draws: list = field(default_factory=list)

    @property
    def is_value(self) -> bool:
        return self.code is None and self.kont is None

    def term(self):
        """Read the configuration back as a core term E[t]."""
        return reify(self)


def initial_state(t, trace=None, n=None, stream=None) -> MachineState:
    p = program(t)
    return MachineState(p.code, (), None, None, 0.0, n, 0,
                        tuple(trace) if trace is not None else None, 0, stream, [])


def resume_state(paused: MachineState, trace=None, n=None, stream=None) -> MachineState:
    """Continue a state paused at ``resample`` with a fresh cursor and log-weight."""
    return MachineState(paused.code, paused.env, paused.value, paused.kont, 0.0, n, 0,
                        tuple(trace) if trace is not None else None, 0, stream, [])


@dataclass
class StopState:
    kind: str                 # value | at-resample | stuck | budget | zero
    value: object = None
    state: Optional[MachineState] = None
    reason: Optional[str] = None


class NotDetRedex:
    """Returned by :func:`step_det` when the focus is a value or an effect."""

    def __init__(self, reason):
        self.reason = reason

    def __repr__(self):
        return f"NotDetRedex({self.reason!r})"


class Stuck:
    def __init__(self, reason):
        self.reason = reason

    def __repr__(self):
        return f"Stuck({self.reason!r})"


def _advance(s: MachineState, limit, kill_zero=False, det_only=False):
    if s.trace is None and s.stream is None:
        trace = ()
    else:
        trace = s.trace
    rec = s.draws
    r = M.execute(s.code, s.env, s.value, s.kont, s.logw, s.n, s.steps, limit,
                  trace, s.pos, s.stream, rec, kill_zero, det_only)
    kind, value, code, env, kont, logw, n, steps, pos, info = r
    ns = MachineState(code, env, value, kont, logw, n, steps, s.trace, pos, s.stream, rec)
    return kind, ns, info


def step_det(s: MachineState):
    """One deterministic reduction (App, Prim, If, or a native-extension rule)."""
    if s.is_value:
        return NotDetRedex("value")
    kind, ns, info = _advance(s, s.steps + 1, det_only=True)
    if kind == M.STEPPED:
        return ns
    if kind == M.VALUE:
        return NotDetRedex("value")
    if kind == M.EFFECT:
        return NotDetRedex(info)
    return Stuck(info)


def run_to_stop(s: MachineState, budget: int = DEFAULT_BUDGET, kill_zero: bool = False) -> StopState:
    kind, ns, info = _advance(s, s.steps + budget, kill_zero=kill_zero)
    if kind == M.VALUE:
        return StopState("value", ns.value, ns)
    return StopState(_KIND_NAMES[kind], None, ns, info)


# -- replay ----------------------------------------------------------------------------

@dataclass
class ReplayOutcome:
    result: object            # value, the paused MachineState (limited mode), or 0.0
    log_weight: float
    consumed: bool
    kind: str                 # value | at-resample | failed
    reason: Optional[str] = None

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)

    @property
    def positive(self) -> bool:
        return self.log_weight > -math.inf

    def term(self):
        if self.kind == "at-resample":
            return reify(self.result)
        if self.kind == "value":
            return readback(self.result)
        return C.UNIT


def _failed(reason):
    return ReplayOutcome(0.0, -math.inf, False, "failed", reason)


def _replay_state(s: MachineState, budget) -> ReplayOutcome:
    stop = run_to_stop(s, budget)
    st = stop.state
    consumed = st.pos == len(st.trace)
    if stop.kind == "value":
        if not consumed:
            return _failed("trace not fully consumed")
        return ReplayOutcome(stop.value, st.logw, True, "value")
    if stop.kind == "at-resample":
        if not consumed:
            return _failed("trace not fully consumed")
        return ReplayOutcome(st, st.logw, True, "at-resample")
    return _failed(stop.reason or stop.kind)


def replay(t, s, budget: int = DEFAULT_BUDGET) -> ReplayOutcome:
    """Result value and weight of trace ``s`` (``r_t``, ``f_t``)."""
    return _replay_state(initial_state(t, trace=s, n=None), budget)


def replay_limited(t, s, n: int, budget: int = DEFAULT_BUDGET) -> ReplayOutcome:
    """Like :func:`replay` but execution may also stop at the resample that
    follows the first ``n`` passed ones (``r_{t,n}``, ``f_{t,n}``)."""
    if isinstance(t, MachineState):
        return _replay_state(resume_state(t, trace=s, n=n), budget)
    return _replay_state(initial_state(t, trace=s, n=n), budget)


def feasible(t, s, n: Optional[int], budget: int = DEFAULT_BUDGET) -> int:
    """1 iff the trace is used up exactly at a value or a stopping resample,
    regardless of weights."""
    if isinstance(t, MachineState):
        st0 = resume_state(t, trace=s, n=n)
    else:
        st0 = initial_state(t, trace=s, n=n)
    stop = run_to_stop(st0, budget)
    if stop.kind in ("value", "at-resample"):
        return int(stop.state.pos == len(stop.state.trace))
    return 0


def stop_position(t, s, n: int, budget: int = DEFAULT_BUDGET) -> Optional[int]:
    """How many draws of ``s`` are consumed before the run stops with allowance ``n``
    (``None`` when it gets stuck or runs out of draws first)."""
    stop = run_to_stop(initial_state(t, trace=s, n=n), budget)
    if stop.kind in ("value", "at-resample"):
        return stop.state.pos
    return None


def split_points(t, s, n: int, budget: int = DEFAULT_BUDGET) -> list:
    """Every k with f_{t,n-1}(s[:k]) > 0 and f_{r,1}(s[k:]) > 0 where r is the
    state reached by the prefix.  For a feasible trace there is exactly one."""
    if n < 1:
        raise ValueError("n must be at least 1")
    out = []
    for k in range(len(s) + 1):
        head = replay_limited(t, s[:k], n - 1, budget)
        if head.kind != "at-resample" or not head.positive:
            continue
        tail = replay_limited(head.result, s[k:], 1, budget)
        if tail.kind != "failed" and tail.positive:
            out.append(k)
    return out


# -- record mode ---------------------------------------------------------------------

def run_segment(state, rng, budget: int = DEFAULT_BUDGET, kill_zero: bool = True):
    """Record-mode run from a fresh program or a paused ``resample`` to the next stop.

    Returns ``(stop, draws, segment_log_weight)``; stuck, over-budget and
    zero-weight runs report ``-inf``.
    """
    if isinstance(state, MachineState):
        # the paused focus is the resample itself: pass it, stop at the next one
        s = resume_state(state, stream=rng, n=1)
    else:
        s = initial_state(state, stream=rng, n=0)
    stop = run_to_stop(s, budget, kill_zero=kill_zero)
    draws = tuple(stop.state.draws)
    if stop.kind in ("value", "at-resample"):
        return stop, draws, stop.state.logw
    return stop, draws, -math.inf


def record(t, rng, budget: int = DEFAULT_BUDGET):
    """Run a whole program in record mode with no resample bound."""
    s = initial_state(t, stream=rng, n=None)
    stop = run_to_stop(s, budget)
    return stop, tuple(stop.state.draws), stop.state.logw


# -- read-back ---------------------------------------------------------------------

def _src_scope(code):
    if code[0] == M.LAM:
        return code[3], code[4]
    return code[-2], code[-1]


def readback(v):
    """Convert a runtime value to a closed core term."""
    if type(v) is float:
        return C.Const(v)
    if type(v) is tuple:
        return C.ListLit(tuple(readback(x) for x in v))
    if type(v) is dict:
        return C.RecordLit(tuple((k, readback(x)) for k, x in v.items()))
    if type(v) is Clo:
        code = v.code
        src, capnames, recname = code[3], code[5], code[6]
        mapping = {}
        for name, val in zip(capnames, v.env):
            if recname is not None and name == recname and val is v:
                continue
            mapping[name] = readback(val)
        lam = C.subst(src, mapping)
        if recname is not None and recname in C.free_vars(lam):
            return C.LetRec(recname, lam, C.Var(recname))
        return lam
    raise TypeError(f"not a runtime value: {v!r}")


def _close(code, env):
    src, scope = _src_scope(code)
    fv = C.free_vars(src)
    mapping = {}
    for name, val in zip(scope, env):
        if name in fv:
            mapping[name] = val
    return C.subst(src, {k: readback(x) for k, x in mapping.items()})


def reify(s: MachineState):
    if s.code is not None:
        t = _close(s.code, s.env)
    else:
        t = readback(s.value)
    k = s.kont
    while k is not None:
        tag = k[0]
        if tag == M.K_CALL:
            t = C.App(readback(k[1]), t)
            k = k[2]
            continue
        if tag == M.K_PASS:
            t = C.App(t, readback(k[1]))
            k = k[2]
            continue
        if tag in (M.K_WEIGHT, M.K_PROJ):
            code = k[1]
            src = code[-2]
            t = C.Weight(t) if tag == M.K_WEIGHT else C.Proj(t, src.field)
            k = k[2]
            continue
        code, env = k[1], k[2]
        closed = _close(code, env)
        kids = list(C.children(closed))
        if tag == M.K_ARG or tag == M.K_IF or tag == M.K_MATCH:
            kids[0] = t
            nxt = k[3]
        elif tag == M.K_LET:
            kids[1] = t
            nxt = k[3]
        elif tag == M.K_ARGS:
            vals = k[3]
            for i, v in enumerate(vals):
                kids[i] = readback(v)
            kids[len(vals)] = t
            nxt = k[4]
        else:
            raise AssertionError(tag)
        t = C.with_children(closed, kids)
        k = nxt
    return t


__all__ = ["Program", "program", "MachineState", "initial_state", "resume_state", "StopState",
           "NotDetRedex", "Stuck", "step_det", "run_to_stop", "ReplayOutcome", "replay",
           "replay_limited", "feasible", "stop_position", "split_points", "run_segment", "record", "readback", "reify",
           "DEFAULT_BUDGET", "replace"]

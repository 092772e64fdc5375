import math

import pytest
from hypothesis import given, settings, strategies as st

from tracesmc import core as C
from tracesmc import distributions as D
from tracesmc import rng as R
from tracesmc import semantics as S
from tracesmc.models import NAMES, load_model

from conftest import prog


def h(u):
    return D.inv_cdf(D.DistParams(D.Dist.BETA, (2.0, 2.0)), u)


# -- deterministic steps ------------------------------------------------------------

def _det(src):
    return S.step_det(S.initial_state(prog(src)))


def test_step_beta_reduction():
    s = _det("(fun x -> x) 3")
    assert isinstance(s, S.MachineState)
    assert S.reify(s) == C.Const(3.0)


def test_step_if_true():
    assert S.reify(_det("if true then 7 else 8")) == C.Const(7.0)


def test_step_prim():
    assert S.reify(_det("1 + 2")) == C.Const(3.0)


def test_step_on_value_and_effects():
    assert isinstance(S.step_det(S.initial_state(prog("5"))), S.NotDetRedex)
    assert isinstance(_det("resample"), S.NotDetRedex)
    assert isinstance(_det("sample_U(0, 1)"), S.NotDetRedex)


@pytest.mark.parametrize("src", ["if 0.5 then 1 else 2", "(1).age", "0 / 0", "1 2",
                                 "match 3 with | [] -> 1"])
def test_stuck_terms(src):
    s = S.initial_state(prog(src))
    for _ in range(10):
        s = S.step_det(s)
        if not isinstance(s, S.MachineState):
            break
    assert isinstance(s, S.Stuck)


def test_det_steps_compose_to_value():
    s = S.initial_state(prog("let f x = x * 2 in f (f 3)"))
    steps = 0
    while isinstance(s, S.MachineState) and not s.is_value:
        s = S.step_det(s)
        steps += 1
    assert s.value == 12.0 and steps > 3


# -- replay -------------------------------------------------------------------------

def test_geometric_worked_trace(geometric):
    out = S.replay(geometric, (0.5, 0.3, 0.7))
    assert out.kind == "value" and out.result == 3.0
    assert out.log_weight == 0.0 and out.consumed


def test_geometric_leftover_and_short(geometric):
    assert S.replay(geometric, (0.5, 0.7, 0.3)).weight == 0.0
    assert S.replay(geometric, (0.5, 0.7, 0.3)).reason == "trace not fully consumed"
    assert S.replay(geometric, (0.5, 0.3)).weight == 0.0
    assert S.replay(geometric, (0.5, 0.3)).term() == C.UNIT


def test_t_obs_weight(beta_obs):
    out = S.replay(beta_obs, (0.8,))
    p = h(0.8)
    assert out.result == p
    assert out.weight == pytest.approx(p * p * (1 - p), rel=1e-14)


@pytest.mark.parametrize("s", [(), (0.3, 0.3), (0.1, 0.2, 0.3)])
def test_t_obs_wrong_length(beta_obs, s):
    assert S.replay(beta_obs, s).weight == 0.0


def test_loop_stops_after_three_resamples():
    stop = S.run_to_stop(S.initial_state(load_model("loop"), trace=(), n=3))
    assert stop.kind == "at-resample" and stop.state.n == 0


def test_divergence_hits_budget():
    omega = prog("let rec f x = f x in f 0")
    assert S.run_to_stop(S.initial_state(omega, trace=()), budget=1000).kind == "budget"
    assert S.replay(omega, (), budget=1000).weight == 0.0


@pytest.mark.parametrize("src", ["weight(-1)", "weight(0 / 0)", "weight(1 / 0)"])
def test_bad_weights_are_stuck(src):
    out = S.replay(prog(src), ())
    assert out.kind == "failed" and out.weight == 0.0


def test_weight_zero_is_not_stuck():
    out = S.replay(prog("weight(0)"), ())
    assert out.kind == "value" and out.weight == 0.0


# -- limited replay ----------------------------------------------------------------

def test_t_seq_pauses_at_resample_after_observing():
    seq = load_model("seq")
    out = S.replay_limited(seq, (0.4, 0.6), 0)
    assert out.kind == "at-resample" and out.positive
    term = S.reify(out.result)
    x0 = 100 * 0.4
    x1 = D.inv_cdf(D.DistParams(D.Dist.NORMAL, (x0 + 2, 1.0)), 0.6)
    hits = [n for _, n in C.iter_paths(term)
            if C.is_seq(n) and isinstance(n.arg, C.Resample) and n.fn.body == C.Const(x1)]
    assert hits, "expected resample; x1 in the paused term"
    # the read-back term continues exactly like the paused state; resuming
    # passes the paused resample and the two later ones
    rest = (0.3, 0.7)
    a = S.replay_limited(out.result, rest, 3)
    b = S.replay(term, rest)
    assert a.kind == b.kind == "value"
    assert a.result == b.result and a.log_weight == pytest.approx(b.log_weight, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 8), st.floats(0, 1))
def test_t_unit_limited_density(n, u):
    out = S.replay_limited(load_model("unit"), (u,), n)
    expected = 2.0 ** n if u <= 2.0 ** -n else 0.0
    # weights are kept as logs, so 2^n comes back within rounding
    assert out.weight == pytest.approx(expected, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1))
def test_t_unit_full_density_is_zero(u):
    assert S.replay(load_model("unit"), (u,)).weight == 0.0


def _recorded(t, i, seed=9):
    return S.record(t, R.Stream.of(seed, 0, i))[1]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 6))
def test_saturation_for_bounded_program(i, n):
    seq = load_model("seq")
    s = _recorded(seq, i)
    a, b = S.replay_limited(seq, s, n), S.replay(seq, s)
    assert a.kind == b.kind == "value"
    assert a.result == b.result and a.log_weight == b.log_weight


# -- feasibility -----------------------------------------------------------------

def test_weight_zero_is_feasible():
    t = prog("weight(0)")
    for n in (0, 1, 5):
        assert S.feasible(t, (), n) == 1
        assert S.replay_limited(t, (), n).weight == 0.0


def test_short_trace_infeasible(geometric):
    assert S.feasible(geometric, (0.5, 0.3), 0) == 0


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(["seq", "unit", "geometric_res", "beta_obs", "aircraft"]),
       st.lists(st.floats(0, 1), max_size=8), st.integers(0, 4))
def test_positive_density_implies_feasible(name, s, n):
    t = load_model(name)
    if S.replay_limited(t, tuple(s), n).positive:
        assert S.feasible(t, tuple(s), n) == 1


# -- record mode ------------------------------------------------------------------

def test_segments_split_weights():
    t = prog("weight(2); resample; weight(3)")
    stop, draws, lw = S.run_segment(t, R.Stream.of(0, 0, 0))
    assert stop.kind == "at-resample" and lw == pytest.approx(math.log(2))
    stop2, draws2, lw2 = S.run_segment(stop.state, R.Stream.of(0, 1, 0))
    assert stop2.kind == "value" and lw2 == pytest.approx(math.log(3))
    assert draws == draws2 == ()


def test_aircraft_one_position_per_segment():
    t = load_model("aircraft")
    state, counts = t, []
    for k in range(20):
        stop, draws, _ = S.run_segment(state, R.Stream.of(1, k, 0))
        counts.append(len(draws))
        if stop.kind == "value":
            break
        state = stop.state
    # one initial position, one per fold step, none once the final observation is made
    assert counts == [1] * 6 + [0]


def test_unit_segment_weights_are_two_or_zero():
    t = load_model("unit")
    for j in range(200):
        stop, _, _ = S.run_segment(t, R.Stream.of(2, 0, j))
        k = 1
        while stop.kind == "at-resample":
            stop, _, lw = S.run_segment(stop.state, R.Stream.of(2, k, j), kill_zero=False)
            assert lw in (math.log(2), -math.inf)
            k += 1


def test_stuck_segment_is_dead():
    _, _, lw = S.run_segment(prog("sample_U(1, 0)"), R.Stream.of(0, 0, 0))
    assert lw == -math.inf


@settings(max_examples=150, deadline=None)
@given(st.sampled_from([n for n in NAMES if n != "loop"]), st.integers(0, 10_000))
def test_record_replay_coherence(name, i):
    t = load_model(name)
    stop, draws, lw = S.record(t, R.Stream.of(4, 0, i), budget=200_000)
    if stop.kind != "value":
        return
    out = S.replay(t, draws, budget=200_000)
    assert out.kind == "value"
    assert out.result == stop.value and out.log_weight == lw


def test_replay_is_deterministic(beta_obs):
    a, b = S.replay(beta_obs, (0.25,)), S.replay(beta_obs, (0.25,))
    assert a.result == b.result and a.log_weight == b.log_weight


# -- decomposition ------------------------------------------------------------------

def test_unique_split_small_sample():
    seq = load_model("seq")
    for i in range(30):
        s = _recorded(seq, i)
        for n in (1, 2, 3):
            pos = S.stop_position(seq, s, n)
            prev = S.stop_position(seq, s, n - 1)
            assert S.split_points(seq, s[:pos], n) == [prev]


def test_split_points_rejects_zero():
    with pytest.raises(ValueError):
        S.split_points(load_model("seq"), (), 0)


# -- read-back ----------------------------------------------------------------------

def test_readback_of_closures_and_records():
    out = S.replay(prog("let a = 2 in {f: fun x -> x + a, xs: [1, 2]}"), ())
    term = S.readback(out.result)
    assert isinstance(term, C.RecordLit)
    fn = dict(term.fields)["f"]
    assert C.alpha_eq(fn, prog("fun y -> y + 2"))


def test_readback_of_recursive_closure():
    out = S.replay(prog("let rec f n = if n < 1 then 0 else f (n - 1) in f"), ())
    term = S.readback(out.result)
    assert isinstance(term, C.LetRec)
    assert S.replay(C.App(term, C.Const(3.0)), ()).result == 0.0

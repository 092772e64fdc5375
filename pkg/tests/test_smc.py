import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from tracesmc import distributions as D
from tracesmc import semantics as S
from tracesmc import smc
from tracesmc.models import load_model, load_placements
from tracesmc import core as C
from tracesmc.smc import AllDead, SmcConfig

from conftest import prog


def cfg(**kw):
    return SmcConfig(**{"particles": 200, **kw})


# -- init / correct -----------------------------------------------------------------

def test_init_constant_program():
    pop = smc.init(prog("42"), cfg(particles=3))
    assert pop.statuses().tolist() == [smc.FINISHED] * 3
    assert pop.log_weights().tolist() == [0.0] * 3
    assert pop.payload == [42.0] * 3


def test_init_t_obs_weights(beta_obs):
    pop = smc.init(beta_obs, cfg(particles=1000))
    for j in range(0, 1000, 97):
        s = smc.flatten_trace(pop.traces[j])
        assert len(s) == 1
        p = D.inv_cdf(D.DistParams(D.Dist.BETA, (2.0, 2.0)), s[0])
        assert pop.log_weights()[j] == pytest.approx(math.log(p * p * (1 - p)), abs=1e-12)


def test_init_loop():
    pop = smc.init(load_model("loop"), cfg(particles=5))
    assert pop.statuses().tolist() == [smc.AT_RESAMPLE] * 5
    assert pop.log_weights().tolist() == [0.0] * 5
    assert all(smc.flatten_trace(tr) == () for tr in pop.traces)


def test_correction_is_segment_weight():
    c = cfg(particles=4)
    pop = smc.init(prog("weight(2); resample; weight(3)"), c)
    assert np.allclose(smc.correct(pop), math.log(2))
    pop = smc.mutate(smc.select(pop, smc.correct(pop), c, 0), c, 1)
    assert np.allclose(smc.correct(pop), math.log(3))
    assert pop.statuses().tolist() == [smc.FINISHED] * 4


def test_geometric_weights_are_one():
    r = smc.run(load_model("geometric_res"), cfg(particles=500))
    assert r.termination == "all-values"
    assert r.log_z == 0.0
    assert r.ess_history == pytest.approx([500.0] * len(r.ess_history))


def test_unit_round_weights():
    c = cfg(particles=2000)
    pop = smc.init(load_model("unit"), c)
    for rnd in range(1, 5):
        pop = smc.mutate(smc.select(pop, smc.correct(pop), c, rnd - 1), c, rnd)
        lw = smc.correct(pop)
        assert set(np.round(np.exp(lw), 12).tolist()) <= {0.0, 2.0}
        assert np.all((pop.statuses() == smc.DEAD) == (lw == -math.inf))


def test_log_z_is_sum_of_round_log_means():
    r = smc.run(prog("weight(2); resample; weight(3)"), cfg())
    assert r.log_z == pytest.approx(math.log(6), abs=1e-12)
    assert r.log_z_history == pytest.approx([math.log(2), math.log(6)])


# -- selection ----------------------------------------------------------------------

class _Rng:
    def __init__(self, seed):
        self.g = np.random.default_rng(seed)

    def random(self, size=None):
        return self.g.random(size)


def test_multinomial_degenerate():
    assert smc.resample_multinomial([1.0, 0.0], _Rng(0)).tolist() == [0, 0]


def test_multinomial_equal_weights_chi_square():
    counts = np.zeros(10)
    for trial in range(10_000):
        idx = smc.resample_multinomial(np.ones(10), smc.SelectionStream(7, trial))
        counts += np.bincount(idx, minlength=10)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_multinomial_concentration():
    idx = smc.resample_multinomial([3.0, 1.0], smc.SelectionStream(1, 0), J=100_000)
    assert abs(np.mean(idx == 0) - 0.75) < 0.005


def test_systematic_examples():
    assert smc.resample_systematic([1.0, 0.0], _Rng(0)).tolist() == [0, 0]
    assert sorted(smc.resample_systematic([1.0] * 4, _Rng(1)).tolist()) == [0, 1, 2, 3]
    assert np.count_nonzero(smc.resample_systematic([3.0, 1.0], _Rng(2), J=4) == 0) == 3


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=30).filter(lambda w: sum(w) > 0),
       st.integers(0, 2**32))
def test_systematic_counts_within_one(w, seed):
    idx = smc.resample_systematic(w, _Rng(seed))
    expected = len(w) * np.asarray(w) / sum(w)
    counts = np.bincount(idx, minlength=len(w))
    assert np.all(np.abs(counts - expected) < 1 + 1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=30).filter(lambda w: sum(w) > 0),
       st.sampled_from(sorted(smc.RESAMPLERS)), st.integers(0, 2**32))
def test_ancestors_have_positive_weight(w, scheme, seed):
    idx = smc.RESAMPLERS[scheme](w, _Rng(seed))
    assert len(idx) == len(w)
    assert all(w[i] > 0 for i in idx.tolist())


@pytest.mark.parametrize("scheme", sorted(smc.RESAMPLERS))
def test_all_zero_weights(scheme):
    with pytest.raises(AllDead):
        smc.RESAMPLERS[scheme]([0.0, 0.0], _Rng(0))


def test_bad_weights_rejected():
    with pytest.raises(ValueError):
        smc.resample_multinomial([1.0, -1.0], _Rng(0))
    with pytest.raises(ValueError):
        smc.resample_multinomial([1.0, math.nan], _Rng(0))


def test_selection_resets_weights():
    c = cfg(particles=300)
    pop = smc.init(load_model("seq"), c)
    assert np.ptp(pop.log_weights()) > 0
    assert smc.select(pop, smc.correct(pop), c, 0).log_weights().tolist() == [0.0] * 300


def test_ess_examples():
    assert smc.effective_sample_size(np.ones(100)) == pytest.approx(100)
    assert smc.effective_sample_size(np.array([0, 0, 5.0, 0])) == pytest.approx(1)
    assert smc.effective_sample_size(np.array([3.0, 1.0])) == pytest.approx(1.6)
    assert smc.effective_sample_size(np.zeros(4)) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50).filter(lambda w: sum(w) > 0))
def test_ess_bounds(w):
    e = smc.effective_sample_size(np.array(w))
    assert 1 - 1e-9 <= e <= len(w) + 1e-9


def test_normalized_is_shift_invariant():
    lw = np.array([-1000.0, -1001.0, -math.inf])
    w = smc.normalized(lw)
    assert w.sum() == pytest.approx(1.0)
    assert w[0] / w[1] == pytest.approx(math.e)
    with pytest.raises(AllDead):
        smc.normalized(np.array([-math.inf, -math.inf]))


# -- mutation -----------------------------------------------------------------------

def test_tracking_model_consumes_one_observation_per_round():
    c = cfg(particles=100)
    t = load_model("seq")
    pop = smc.init(t, c)
    for k in range(3):
        alive = pop.statuses() != smc.DEAD
        lengths = {len(smc.flatten_trace(pop.traces[j])) for j in np.flatnonzero(alive).tolist()}
        assert lengths == {k + 2}   # initial position plus k+1 moves
        if k < 2:
            pop = smc.mutate(smc.select(pop, smc.correct(pop), c, k), c, k + 1)


def test_finished_particles_are_fixed_points():
    c = cfg(particles=400)
    pop = smc.init(load_model("geometric_res"), c)
    pop = smc.mutate(smc.select(pop, smc.correct(pop), c, 0), c, 1)
    done = np.flatnonzero(pop.statuses() == smc.FINISHED).tolist()
    before = [(pop.payload[j], pop.traces[j]) for j in done]
    pop = smc.mutate(pop, c, 2)
    assert [(pop.payload[j], pop.traces[j]) for j in done] == before


def test_value_only_population_is_unchanged():
    c = cfg(particles=10)
    pop = smc.init(prog("7"), c)
    again = smc.mutate(pop, c, 1)
    assert again.payload == [7.0] * 10 and again.statuses().tolist() == [smc.FINISHED] * 10


def test_crbd_mixes_paused_and_finished():
    t = load_model("crbd")
    t = C.insert_resamples(t, C.resolve_placement(t, load_placements("crbd")["all"]))
    c = cfg(particles=500, seed=3)
    pop, rnd, mixed = smc.init(t, c), 0, False
    while True:
        st_ = pop.statuses()
        mixed |= bool(np.any(st_ == smc.FINISHED) and np.any(st_ == smc.AT_RESAMPLE))
        if not np.any(st_ == smc.AT_RESAMPLE):
            break
        pop = smc.mutate(smc.select(pop, smc.correct(pop), c, rnd), c, rnd + 1)
        rnd += 1
    assert mixed and rnd > 2


# -- run --------------------------------------------------------------------------

def test_posterior_weights_sum_to_one(beta_obs):
    r = smc.run(beta_obs, cfg(particles=500))
    assert sum(w for _, w in r.posterior()) == pytest.approx(1.0)
    assert len(r.posterior()) == 500


def test_traces_replay_to_results():
    t = load_model("seq")
    r = smc.run(t, cfg(particles=100))
    for j in range(0, 100, 7):
        out = S.replay(t, r.trace(j))
        assert out.kind == "value" and out.result == r.values[j]


def test_trace_requires_recording(beta_obs):
    r = smc.run(beta_obs, cfg(record_traces=False))
    with pytest.raises(ValueError):
        r.trace(0)


def test_all_dead():
    r = smc.run(prog("weight(0)"), cfg())
    assert r.termination == "all-dead" and r.log_z == -math.inf
    assert r.posterior() == [] and math.isnan(r.mean())
    assert r.dead_count == 200


def test_all_dead_without_kill_zero():
    r = smc.run(prog("weight(0); resample; 1"), cfg(kill_zero=False))
    assert r.termination == "all-dead"


def test_stuck_particles_die():
    r = smc.run(prog("let x = sample_U(0, 1) in if x < 0.5 then 1 else (1).f"), cfg(particles=1000))
    assert 400 < r.dead_count < 600
    assert {v for v, _ in r.posterior()} == {1.0}


def test_round_cap():
    r = smc.run(load_model("loop"), cfg(max_rounds=10))
    assert r.termination == "round-cap" and r.rounds == 10 and r.posterior() == []
    r0 = smc.run(load_model("loop"), cfg(max_rounds=0))
    assert r0.termination == "round-cap" and r0.rounds == 0


def test_step_budget_kills():
    r = smc.run(prog("let rec f x = f x in f 0"), cfg(particles=3, step_budget=500))
    assert r.termination == "all-dead"


@pytest.mark.parametrize("scheme", sorted(smc.RESAMPLERS))
def test_both_schemes_recover_geometric(scheme):
    r = smc.run(load_model("geometric_res"), cfg(particles=20_000, resampling=scheme, seed=2))
    pmf = {}
    for v, w in r.posterior():
        pmf[v] = pmf.get(v, 0.0) + w
    assert pmf[1.0] == pytest.approx(0.4, abs=0.02)
    assert pmf[2.0] == pytest.approx(0.24, abs=0.02)


@pytest.mark.parametrize("name", ["seq", "crbd", "geometric_res"])
def test_thread_count_does_not_change_results(name):
    t = load_model(name)
    a = smc.run(t, cfg(particles=3000, seed=5, threads=1))
    b = smc.run(t, cfg(particles=3000, seed=5, threads=3))
    assert a.log_z == b.log_z
    assert a.values == b.values and a.weights.tolist() == b.weights.tolist()


def test_seed_changes_results(beta_obs):
    assert smc.run(beta_obs, cfg(seed=1)).log_z != smc.run(beta_obs, cfg(seed=2)).log_z


def test_law_of_large_numbers(beta_obs):
    med = []
    for J in (100, 1000, 10_000):
        errs = [abs(smc.run(beta_obs, cfg(particles=J, seed=s, record_traces=False)).mean() - 4 / 7)
                for s in range(20)]
        med.append(float(np.median(errs)))
    assert med[0] > med[1] > med[2]


@pytest.mark.parametrize("kw", [{"particles": 0}, {"max_rounds": -1}, {"resampling": "stratified"},
                                {"threads": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SmcConfig(**kw)

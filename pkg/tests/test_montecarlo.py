import math

import numpy as np
import pytest

from qmpsim import montecarlo as mc
from qmpsim.detector import DetectorParams, click_probability, conditional_calibrated
from qmpsim.dsl import DetectorStage, ProtocolSpec, RunParams
from qmpsim.hilbert import qubit
from qmpsim.nullprotocol import PartialCollapseSpec, bayes_null_conditional

S = 1 / math.sqrt(2)
I = qubit(0.6, 0.8)
PLUS = qubit(S, S)


def wv_protocol(eps=0.2, pre=(0.6, 0.8), post=(S, S), retain="click", run=None):
    return ProtocolSpec("wv", pre, DetectorStage(eps), post, retain, run)


def nwv_protocol(p1=0.25, pre=(0.6, 0.8), post=(S, S), run=None):
    return ProtocolSpec("nwv", pre, PartialCollapseSpec(p1=p1), post, "noclick", run)


def z_scores(result, protocol):
    return {c.path: c.z for c in mc.leaf_checks(result, protocol)}


def test_exact_leaves_sum_to_one():
    for proto in (wv_protocol(), nwv_protocol(), wv_protocol(retain="noclick")):
        assert sum(mc.exact_leaf_probabilities(proto).values()) == pytest.approx(1.0, abs=1e-12)


def test_exact_estimates_match_closed_forms():
    ex = mc.exact_estimates(wv_protocol())
    d = DetectorParams.from_angle(0.2)
    assert ex["P(first_click)"] == pytest.approx(click_probability(I, d), abs=1e-12)
    assert ex["calibrated_observable"] == pytest.approx(0.64, abs=1e-12)
    assert ex["conditional_calibrated"] == pytest.approx(conditional_calibrated(I, d, PLUS), abs=1e-12)
    ex = mc.exact_estimates(nwv_protocol())
    assert ex["P(first_click|retained)"] == pytest.approx(bayes_null_conditional(I, PartialCollapseSpec(0.25), PLUS), abs=1e-12)
    assert ex["null_conditional_over_p"] == pytest.approx(0.6427689239451129, abs=1e-12)


def test_zero_strength_detector_clicks_half_the_time():
    for pre in ((1.0, 0.0), (0.0, 1.0), (0.6, 0.8)):
        res = mc.estimate(wv_protocol(eps=0.0, pre=pre), 200_000, seed=3)
        k = sum(c for p, c in res.leaves if p.startswith("click/"))
        assert abs(k / 200_000 - 0.5) <= 4 * math.sqrt(0.25 / 200_000)


def test_fixed_seed_is_deterministic():
    a = mc.estimate(wv_protocol(), 50_000, seed=9)
    b = mc.estimate(wv_protocol(), 50_000, seed=9)
    c = mc.estimate(wv_protocol(), 50_000, seed=10)
    assert a == b
    assert a.to_json() == b.to_json()
    assert a.leaves != c.leaves


def test_click_frequency_at_a_million_trials():
    n = 1_000_000
    res = mc.estimate(wv_protocol(), n, seed=1)
    p = click_probability(I, DetectorParams.from_angle(0.2))
    freq = dict((e.name, e.value) for e in res.estimates)["P(first_click)"]
    assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_null_protocol_extremes():
    res = mc.estimate(nwv_protocol(p1=0.0), 10_000, seed=2)
    assert res.counts()["click/destroyed"] == 0
    res = mc.estimate(nwv_protocol(p1=1.0, pre=(0.0, 1.0)), 10_000, seed=2)
    assert res.counts()["click/destroyed"] == 10_000


def test_null_conditional_at_a_million_trials():
    n = 1_000_000
    res = mc.estimate(nwv_protocol(), n, seed=4)
    est = {e.name: e for e in res.estimates}["P(first_click|retained)"]
    assert abs(est.value - 0.16069223098627822) <= 3 * est.stderr
    assert res.counts()["click/click"] == 0


@pytest.mark.parametrize("shards", [2, 3, 7, 8, 64])
def test_shard_count_does_not_change_counts(shards):
    one = mc.estimate(wv_protocol(), 100_003, seed=5, shards=1)
    many = mc.estimate(wv_protocol(), 100_003, seed=5, shards=shards)
    assert one.leaves == many.leaves
    assert one.estimates == many.estimates


def test_workers_do_not_change_counts():
    a = mc.estimate(nwv_protocol(), 100_000, seed=6, shards=8, workers=1)
    b = mc.estimate(nwv_protocol(), 100_000, seed=6, shards=8, workers=4)
    assert a == b


def test_shards_are_order_independent():
    tree = mc._tree(wv_protocol())
    bounds = mc.shard_bounds(10_007, 5)
    fwd = sum(mc._run_shard(11, lo, hi, tree) for lo, hi in bounds)
    rev = sum(mc._run_shard(11, lo, hi, tree) for lo, hi in reversed(bounds))
    np.testing.assert_array_equal(fwd, rev)


def test_shard_bounds_cover_range():
    assert mc.shard_bounds(10, 3) == [(0, 3), (3, 6), (6, 10)]
    assert mc.shard_bounds(2, 4)[-1] == (0, 2)


def test_invalid_run_arguments():
    with pytest.raises(ValueError):
        mc.estimate(wv_protocol(), 0, seed=1)
    with pytest.raises(ValueError):
        mc.estimate(wv_protocol(), 10, seed=-1)
    with pytest.raises(ValueError):
        mc.estimate(wv_protocol(), 10, seed=1, shards=0)
    with pytest.raises(ValueError):
        mc.estimate(wv_protocol())


def test_run_directive_supplies_defaults():
    proto = wv_protocol(run=RunParams(trials=1000, seed=12, shards=3))
    res = mc.estimate(proto)
    assert (res.n_trials, res.seed, res.shards) == (1000, 12, 3)


@pytest.mark.parametrize("k", [0, 1, 17, 99_999])
def test_scalar_sampler_matches_batch(k):
    seed = 21
    batch = mc.uniforms(seed, 0, 100_000)[k]
    rng = np.random.Generator(np.random.Philox(key=seed, counter=[k, 0, 0, 0]))
    np.testing.assert_array_equal(rng.random(4), batch)
    d, spec = DetectorParams.from_angle(0.2), PartialCollapseSpec(0.25)
    tree = mc._tree(wv_protocol())
    first, second = mc._decide(batch, tree)
    rng = np.random.Generator(np.random.Philox(key=seed, counter=[k, 0, 0, 0]))
    out = mc.sample_wv_trajectory(rng, I, d, PLUS)
    assert (out.first_click, out.post_click) == (bool(first), bool(second))
    rng = np.random.Generator(np.random.Philox(key=seed, counter=[k, 0, 0, 0]))
    out = mc.sample_nwv_trajectory(rng, I, spec, PLUS)
    if out.first_click:
        assert out.post_click is None


def test_destroyed_trajectory_has_no_second_outcome():
    rng = np.random.default_rng(0)
    outs = [mc.sample_nwv_trajectory(rng, qubit(0, 1), PartialCollapseSpec(1.0), PLUS) for _ in range(20)]
    assert all(o.first_click and o.post_click is None for o in outs)


@pytest.mark.slow
def test_replications_stay_within_four_sigma():
    protos = (wv_protocol(), nwv_protocol())
    for proto in protos:
        inside = {p: 0 for p in mc.leaf_names(proto)}
        for rep in range(100):
            res = mc.estimate(proto, 100_000, seed=1000 + rep)
            for path, z in z_scores(res, proto).items():
                inside[path] += abs(z) <= 4
        assert all(v >= 99 for v in inside.values()), inside


def test_leaf_checks_flag_impossible_counts():
    proto = nwv_protocol()
    res = mc.estimate(proto, 1000, seed=1)
    forged = mc.EstimatorResult(res.protocol_hash, res.kind, res.seed, res.shards, res.n_trials,
                                (("click/click", 1),) + res.leaves[1:], res.estimates)
    checks = {c.path: c for c in mc.leaf_checks(forged, proto)}
    assert checks["click/click"].z == float("inf")


def test_pointer_protocol_has_no_trajectory_model():
    from qmpsim.dsl import PointerStage

    with pytest.raises(ValueError):
        mc.estimate(ProtocolSpec("pointer", (0.6, 0.8), PointerStage(0.1), (S, S)), 10, seed=0)


@pytest.mark.slow
def test_conditional_calibrated_at_ten_million_trials():
    proto = wv_protocol()
    res = mc.estimate(proto, 10**7, seed=8, shards=4, workers=4)
    est = {e.name: e for e in res.estimates}["conditional_calibrated"]
    exact = conditional_calibrated(I, DetectorParams.from_angle(0.2), PLUS)
    assert abs(est.value - exact) <= 3 * est.stderr

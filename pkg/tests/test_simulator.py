import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from mprtree import exact, simulator
from mprtree.errors import RunawayError
from mprtree.model import ChannelConfig, Feedback, Variant, classify_slot
from oracles import cri_length_pmf

TABLE_ONE_SPLITS = [0, 1, 0, 0, 1, 0, 1, 0]


def test_worked_example_trace_in_detail():
    trace = simulator.run_cri(5, ChannelConfig(K=2), split_decisions=TABLE_ONE_SPLITS)
    assert [s.occupancy for s in trace.slots] == [5, 3, 2, 1, 2]
    assert trace.feedback == ["e", "e", "1", "1", "1"]
    # users 1 and 4 in slot 3, user 3 in slot 4, users 2 and 5 in slot 5
    assert trace.decode_slot == (3, 5, 4, 3, 5)
    assert trace.split_decisions == tuple(TABLE_ONE_SPLITS)
    assert all(u.resolved and u.counter < 0 for u in trace.users)
    assert list(trace.csv_rows())[0] == (1, 5, "e")


def test_replay_must_cover_every_split():
    with pytest.raises(ValueError):
        simulator.run_cri(5, ChannelConfig(K=2), split_decisions=[0, 1, 0])
    with pytest.raises(ValueError):
        simulator.run_cri(3, ChannelConfig(K=1), split_decisions=[2, 0, 0])


def test_empty_batch_is_one_idle_slot():
    trace = simulator.run_cri(0)
    assert trace.length == 1 and trace.feedback == ["0"]
    with pytest.raises(ValueError):
        simulator.run_cri(-1)


def test_mta_skips_certain_collision():
    # both users pick group 1: the idle slot is followed by an immediate re-split
    trace = simulator.run_cri(2, ChannelConfig(variant="MTA"), split_decisions=[1, 1, 0, 1])
    assert trace.feedback == ["e", "0", "1", "1"]
    bta = simulator.run_cri(2, ChannelConfig(), split_decisions=[1, 1, 0, 1])
    assert bta.feedback == ["e", "0", "e", "1", "1"]


@given(
    st.integers(0, 25),
    st.integers(1, 4),
    st.floats(0.15, 0.85),
    st.sampled_from(["BTA", "MTA"]),
    st.integers(0, 2**32 - 1),
)
def test_protocol_invariants(n, K, p, variant, seed):
    trace = simulator.run_cri(n, ChannelConfig(K, p, variant), seed)
    fb = [s.feedback for s in trace.slots]
    for s in trace.slots:
        assert s.feedback is classify_slot(s.occupancy, K)
    # each user is decoded exactly once, in a success slot that carried it
    assert all(d >= 1 for d in trace.decode_slot)
    counts = np.bincount(trace.decode_slot, minlength=trace.length + 1)
    for j, s in enumerate(trace.slots, start=1):
        if s.feedback is Feedback.SUCCESS:
            assert counts[j] == s.occupancy
        else:
            assert counts[j] == 0
    assert sum(s.occupancy for s in trace.slots if s.feedback is Feedback.SUCCESS) == n
    assert all(u.resolved for u in trace.users)
    assert fb[-1] is not Feedback.ERROR


def test_run_cri_is_deterministic():
    config = ChannelConfig(2, 0.4, "MTA")
    assert simulator.run_cri(30, config, 11) == simulator.run_cri(30, config, 11)
    assert simulator.run_cri(30, config, 11) != simulator.run_cri(30, config, 12)


def test_runaway_cap(monkeypatch):
    monkeypatch.setattr(simulator, "MAX_SLOTS", 3)
    with pytest.raises(RunawayError):
        simulator.run_cri(5, ChannelConfig())
    with pytest.raises(RunawayError):
        simulator.counter_engine([5], ChannelConfig(), np.random.default_rng(0))


def _chi_square_against(samples, pmf):
    samples = np.asarray(samples)
    support = np.flatnonzero(pmf > 0)
    # a length with zero probability is an outright failure
    assert np.isin(samples, support).all()
    probs = pmf[support]
    obs = np.bincount(np.searchsorted(support, samples), minlength=len(support)).astype(float)
    exp = probs * len(samples)
    keep = np.flatnonzero(exp >= 5)
    lo, hi = keep[0], keep[-1]
    obs_b, exp_b = obs[lo : hi + 1].copy(), exp[lo : hi + 1].copy()
    obs_b[0] += obs[:lo].sum()
    exp_b[0] += exp[:lo].sum()
    obs_b[-1] += obs[hi + 1 :].sum()
    exp_b[-1] += exp[hi + 1 :].sum()
    exp_b *= obs_b.sum() / exp_b.sum()
    return stats.chisquare(obs_b, exp_b).pvalue


CASES = [(5, 1, 0.5, "BTA"), (6, 2, 0.3, "BTA"), (4, 1, 0.5, "MTA"), (7, 2, 0.3, "MTA")]


@pytest.mark.parametrize("n,K,p,variant", CASES)
def test_engines_match_exact_length_distribution(n, K, p, variant):
    config = ChannelConfig(K, p, variant)
    pmf = cri_length_pmf(n, K, p, variant)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
    rng = np.random.default_rng(1)
    tree = simulator.tree_engine(np.full(100_000, n), config, rng)
    counter = simulator.counter_engine(np.full(50_000, n), config, rng)[0]
    stack = [simulator.stack_cri(n, config, rng)[0] for _ in range(20_000)]
    literal = [simulator.run_cri(n, config, s).length for s in range(3000)]
    for sample in (tree, counter, stack, literal):
        assert _chi_square_against(sample, pmf) > 1e-3


def test_counter_engine_decodes_everyone_once():
    config = ChannelConfig(2, 0.5, "MTA")
    sizes = np.array([0, 1, 5, 12, 3, 0, 40])
    lengths, user_batch, decode = simulator.counter_engine(sizes, config, np.random.default_rng(2))
    assert len(decode) == sizes.sum()
    assert np.all(decode >= 1) and np.all(decode <= lengths[user_batch])
    np.testing.assert_array_equal(np.bincount(user_batch, minlength=len(sizes)), sizes)
    assert lengths[0] == 1 and lengths[1] == 1


@pytest.mark.parametrize("p", [0.5, 0.3])
def test_split_decisions_are_fair_coins(p):
    config = ChannelConfig(1, p)
    draws, seed = [], 0
    while len(draws) < 10**6:
        draws.extend(simulator.run_cri(40, config, seed).split_decisions)
        seed += 1
    draws = np.asarray(draws[: 10**6])
    zeros = int((draws == 0).sum())
    N = len(draws)
    pvalue = stats.chisquare([zeros, N - zeros], [N * p, N * (1 - p)]).pvalue
    assert pvalue > 1e-3


def test_estimate_trivial_batches():
    for n in range(0, 4):
        r = simulator.estimate_L_n(n, ChannelConfig(3), reps=500, seed=1)
        assert r.mean == 1.0 and r.ci95_halfwidth == 0.0


@pytest.mark.parametrize(
    "n,config,value",
    [
        (2, ChannelConfig(1), 5.0),
        (3, ChannelConfig(1), 23 / 3),
        (2, ChannelConfig(1, variant="MTA"), 4.5),
    ],
)
def test_estimate_covers_exact(n, config, value):
    r = simulator.estimate_L_n(n, config, reps=10**6, seed=3)
    assert r.covers(value)
    assert r.ci95_halfwidth < 0.02


def test_estimate_with_counter_engine():
    config = ChannelConfig(2, 0.3, "MTA")
    r = simulator.estimate_L_n(9, config, reps=20_000, seed=4, engine="counter")
    assert r.covers(exact.expected_cri(9, config), level=0.999)


def test_estimate_is_deterministic_and_worker_invariant():
    config = ChannelConfig(2, 0.4)
    a = simulator.estimate_L_n(12, config, reps=40_000, seed=9, keep_samples=True)
    b = simulator.estimate_L_n(12, config, reps=40_000, seed=9, keep_samples=True, workers=3)
    assert a == b
    np.testing.assert_array_equal(a.raw_samples, b.raw_samples)


def test_estimate_validation():
    with pytest.raises(ValueError):
        simulator.estimate_L_n(3, ChannelConfig(), reps=50)
    with pytest.raises(ValueError):
        simulator.estimate_L_n(-1, ChannelConfig(), reps=100)


def test_report_fields():
    r = simulator.SimulationReport.from_samples([1.0, 2.0, 3.0, 4.0], seed=5)
    assert r.mean == 2.5
    assert r.ci_halfwidth(0.95) == pytest.approx(r.ci95_halfwidth)
    assert r.ci_halfwidth(0.99) > r.ci95_halfwidth
    d = json.loads(simulator.report_json(r, ChannelConfig(2)))
    assert set(d) >= {"config", "seed", "reps", "mean", "ci95", "method"}
    assert d["method"] == "mc" and d["config"]["K"] == 2
    with pytest.raises(ValueError):
        simulator.SimulationReport(1, 0.0, 0.0, 0)


def test_arrival_process_validation():
    with pytest.raises(ValueError):
        simulator.ArrivalProcess(0.0, "windowed", 2.0)
    with pytest.raises(ValueError):
        simulator.ArrivalProcess(0.3, "windowed", None)
    with pytest.raises(ValueError):
        simulator.ArrivalProcess(0.3, "gated", horizon=100)
    with pytest.raises(ValueError):
        simulator.ArrivalProcess(0.3, "polling", 2.0)


def test_sparse_windowed_traffic_delay():
    delta = 2.675
    proc = simulator.ArrivalProcess(1e-3, "windowed", delta, 10**6, seed=2)
    res = simulator.run_arrivals(proc, ChannelConfig())
    # wait for the window to close, round up to a slot, transmit once
    assert res.delay.mean <= delta + 1 + 0.05
    assert res.delay.mean > 1.0
    assert not res.unstable


def test_windowed_run_is_deterministic():
    proc = simulator.ArrivalProcess(0.3, "windowed", 2.0, 10**5, seed=8)
    a = simulator.run_arrivals(proc, ChannelConfig())
    b = simulator.run_arrivals(proc, ChannelConfig())
    assert a.delay == b.delay
    np.testing.assert_array_equal(a.backlog, b.backlog)


def test_gated_access_low_and_high_load():
    config = ChannelConfig()
    low = simulator.run_arrivals(simulator.ArrivalProcess(0.2, "gated", horizon=2 * 10**5), config)
    assert not low.unstable and low.delay.mean < 20
    high = simulator.run_arrivals(simulator.ArrivalProcess(0.45, "gated", horizon=2 * 10**5), config)
    assert high.unstable


def test_backlog_trend_detector():
    rng = np.random.default_rng(0)
    t = np.arange(4000.0)
    flat = rng.poisson(3, 4000)
    assert not simulator.backlog_trend(t, flat)[2]
    growing = flat + 0.01 * t
    slope, pvalue, flag = simulator.backlog_trend(t, growing)
    assert flag and slope > 0 and pvalue < 0.01
    with pytest.raises(ValueError):
        simulator.backlog_trend(t[:10], flat[:10])


def test_arrival_report_dict():
    proc = simulator.ArrivalProcess(0.3, "windowed", 2.5, 10**5, seed=1)
    res = simulator.run_arrivals(proc, ChannelConfig(variant=Variant.MTA))
    d = res.as_dict(ChannelConfig(variant=Variant.MTA), proc)
    assert d["access"] == "windowed" and d["packets"] == res.delay.replications
    assert d["method"] == "mc" and d["unstable"] is False

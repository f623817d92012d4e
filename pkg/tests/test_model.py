import pytest
from hypothesis import given
from hypothesis import strategies as st

from mprtree.model import (
    MAX_K,
    ChannelConfig,
    CriStatistic,
    Feedback,
    Variant,
    classify_slot,
    throughput,
)


def test_defaults_are_fair_bta():
    c = ChannelConfig()
    assert (c.K, c.p, c.variant) == (1, 0.5, Variant.BTA)
    assert c.is_fair


@pytest.mark.parametrize("K", [0, -1, MAX_K + 1, 1.5, True])
def test_rejects_bad_K(K):
    with pytest.raises(ValueError):
        ChannelConfig(K=K)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.2, float("nan")])
def test_rejects_bad_p(p):
    with pytest.raises(ValueError):
        ChannelConfig(p=p)


def test_variant_parsing_and_switch():
    assert Variant.parse("mta") is Variant.MTA
    with pytest.raises(ValueError):
        Variant.parse("ternary")
    c = ChannelConfig(3, 0.4).with_variant("MTA")
    assert c.variant is Variant.MTA and c.K == 3 and c.p == 0.4
    assert c.as_dict() == {"K": 3, "p": 0.4, "variant": "MTA"}


def test_configs_are_hashable_keys():
    assert ChannelConfig(2, 0.5, "bta") == ChannelConfig(2, 0.5)
    assert len({ChannelConfig(2), ChannelConfig(2), ChannelConfig(3)}) == 2


def test_feedback_symbols_and_order():
    assert [f.symbol for f in Feedback] == ["0", "1", "e"]
    assert Feedback.IDLE < Feedback.SUCCESS < Feedback.ERROR


@given(st.integers(0, 500), st.integers(1, 200))
def test_classify_slot_partitions_occupancy(occupancy, K):
    fb = classify_slot(occupancy, K)
    if occupancy == 0:
        assert fb is Feedback.IDLE
    elif occupancy <= K:
        assert fb is Feedback.SUCCESS
    else:
        assert fb is Feedback.ERROR


@given(st.integers(0, 300), st.integers(0, 300), st.integers(1, 50))
def test_classify_slot_is_monotone(a, b, K):
    lo, hi = sorted((a, b))
    assert classify_slot(lo, K) <= classify_slot(hi, K)


def test_classify_slot_rejects_negative():
    with pytest.raises(ValueError):
        classify_slot(-1, 1)


def test_throughput_normalization():
    assert throughput(3, 1.0, 4) == pytest.approx(0.75)
    assert CriStatistic(2, 5.0, 1).T_n == pytest.approx(0.4)

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorafail.analysis import (
    ExceedanceDataset,
    ThresholdConfig,
    link_states,
    split_indices,
    split_train_test,
    summarize,
    threshold_series,
)
from lorafail.errors import EmptyDataset, InvalidConfig
from lorafail.ingest import LatencySample
from lorafail.model import estimate_exceedance_probability


def samples(values, direction="uplink"):
    return [LatencySample(i, v, direction) for i, v in enumerate(values)]


def dataset(n):
    return ExceedanceDataset("uplink", tuple(i % 2 for i in range(n)), 37.0)


def test_threshold_defaults():
    cfg = ThresholdConfig()
    assert (cfg.uplink_threshold_seconds, cfg.downlink_threshold_seconds) == (37.0, 42.0)


@pytest.mark.parametrize("bad", [0, -1, float("nan"), float("inf")])
def test_threshold_config_rejects(bad):
    with pytest.raises(InvalidConfig):
        ThresholdConfig(uplink_threshold_seconds=bad)


def test_threshold_inclusive_boundary():
    out = threshold_series(samples([37.0, 36.999]), ThresholdConfig())
    assert out["uplink"].indicators == (1, 0)
    assert out["downlink"].indicators == ()


def test_threshold_per_direction():
    mixed = samples([41.0, 42.0], "downlink") + samples([37.0], "uplink")
    out = threshold_series(mixed, ThresholdConfig())
    assert out["downlink"].indicators == (0, 1)
    assert out["uplink"].indicators == (1,)


def test_threshold_empty_and_zero():
    assert threshold_series([], ThresholdConfig())["uplink"].indicators == ()
    assert threshold_series(samples([0.0] * 5), ThresholdConfig())["uplink"].indicators == (0,) * 5


latency_lists = st.lists(st.floats(min_value=0, max_value=200), min_size=1, max_size=100)


@given(latency_lists, st.floats(min_value=0.5, max_value=150))
def test_estimator_agrees_with_indicator_mean(values, t):
    ds = threshold_series(samples(values), ThresholdConfig(uplink_threshold_seconds=t))["uplink"]
    assert estimate_exceedance_probability(values, t).probability == ds.probability


@given(latency_lists, st.floats(min_value=0.5, max_value=150), st.floats(min_value=0, max_value=50))
def test_thresholding_monotone(values, t, extra):
    low = threshold_series(samples(values), ThresholdConfig(uplink_threshold_seconds=t))["uplink"]
    high = threshold_series(samples(values), ThresholdConfig(uplink_threshold_seconds=t + extra))["uplink"]
    assert sum(high.indicators) <= sum(low.indicators)


# --- splitting -------------------------------------------------------------

def test_chronological_half_split():
    ds = ExceedanceDataset("uplink", tuple(range(10)), 37.0)
    train, test = split_train_test(ds)
    assert train.indicators == (0, 1, 2, 3, 4)
    assert test.indicators == (5, 6, 7, 8, 9)


def test_odd_split_gives_extra_to_train():
    train, test = split_train_test(dataset(87))
    assert (len(train), len(test)) == (44, 43)


def test_seeded_shuffle_deterministic():
    a = split_indices(50, 0.5, "seeded_shuffle", seed=9)
    b = split_indices(50, 0.5, "seeded_shuffle", seed=9)
    c = split_indices(50, 0.5, "seeded_shuffle", seed=10)
    assert a == b
    assert a != c
    assert a[0] != list(range(25))


@given(st.integers(1, 300), st.floats(min_value=0.01, max_value=0.99),
       st.sampled_from(["chronological", "seeded_shuffle"]), st.integers(0, 2**63))
def test_split_partitions(n, fraction, policy, seed):
    train, test = split_indices(n, fraction, policy, seed)
    assert len(train) + len(test) == n
    assert set(train).isdisjoint(test)
    assert set(train) | set(test) == set(range(n))


def test_split_errors():
    with pytest.raises(EmptyDataset):
        split_train_test(dataset(0))
    with pytest.raises(InvalidConfig):
        split_train_test(dataset(4), fraction=1.0)
    with pytest.raises(InvalidConfig):
        split_train_test(dataset(4), policy="random")
    with pytest.raises(InvalidConfig):
        split_train_test(dataset(4), policy="seeded_shuffle")


# --- summary ---------------------------------------------------------------

def test_summarize_small():
    s = summarize([1, 2, 3])
    assert (s["mean"], s["min"], s["max"], s["count"]) == (2.0, 1, 3, 3)


def test_summarize_single():
    s = summarize([7.5])
    assert {s[k] for k in ("min", "max", "mean", "p50", "p95")} == {7.5}


def test_summarize_nearest_rank():
    s = summarize(list(range(1, 101)))
    assert s["p95"] == 95
    assert s["p50"] == 50


def test_summarize_accepts_samples():
    assert summarize(samples([4.0, 2.0]))["min"] == 2.0


def test_summarize_empty():
    with pytest.raises(EmptyDataset):
        summarize([])


# --- link state ------------------------------------------------------------

def test_link_states_carry_last_other_direction():
    cfg = ThresholdConfig()
    directions = ["uplink", "downlink", "uplink", "downlink"]
    latencies = [40.0, 50.0, 10.0, 5.0]
    keys = [0, 1, 2, 3]
    assert link_states(directions, latencies, keys, cfg) == [(1, 0), (1, 1), (0, 1), (0, 0)]


def test_link_states_follow_order_keys_not_input_order():
    cfg = ThresholdConfig()
    out = link_states(["downlink", "uplink"], [50.0, 40.0], [5, 1], cfg)
    assert out == [(1, 1), (1, 0)]

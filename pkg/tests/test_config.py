import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radioforge.config import (
    ParameterDistribution,
    config_from_dict,
    deep_merge,
    derive_stream,
    frame_seed,
    load_config,
    sample_scenario,
)
from radioforge.errors import ConfigError


@pytest.fixture(scope="module")
def ref():
    return load_config(None)


def test_reference_overlap_probability_fixed(ref):
    d = ref.dist("overlap_probability")
    assert d.kind == "fixed" and d.value == 0.15


def test_reference_table_values(ref):
    assert (ref.dist("symbol_rate").low, ref.dist("symbol_rate").high) == (30e3, 50e3)
    assert (ref.dist("k_factor").low, ref.dist("k_factor").high) == (1.0, 9.0)
    assert (ref.dist("noise_figure").low, ref.dist("noise_figure").high) == (10.0, 20.0)
    assert (ref.dist("num_segments").low, ref.dist("num_segments").high) == (1, 3)
    assert (ref.dist("overlap_extent").low, ref.dist("overlap_extent").high) == (0.0, 0.15)
    assert len(ref.registry) == 100


def test_inverted_tx_bounds_rejected():
    with pytest.raises(ConfigError) as e:
        config_from_dict({"distributions": {"num_tx": {"kind": "uniform-discrete", "range": [4, 1]}}})
    assert "num_tx" in e.value.key


def test_channel_weights_accepted():
    cfg = config_from_dict({"channel": {"weights": {"statistical": 0.9, "raytrace": 0.1}}})
    assert cfg.channel_weights["statistical"] == 0.9


def test_channel_weights_must_sum_to_one():
    with pytest.raises(ConfigError):
        config_from_dict({"channel": {"weights": {"statistical": 0.5, "raytrace": 0.1, "awgn": 0.0}}})


def test_unknown_key_names_it():
    with pytest.raises(ConfigError) as e:
        config_from_dict({"schedule": {"bogus": 1}})
    assert e.value.key == "schedule.bogus"


def test_fixed_override_replaces_distribution():
    cfg = config_from_dict({"distributions": {"num_tx": {"kind": "fixed", "value": 2}}})
    assert cfg.dist("num_tx").kind == "fixed" and cfg.dist("num_tx").value == 2


def test_deep_merge_keeps_siblings():
    out = deep_merge({"a": {"b": 1, "c": 2}}, {"a": {"c": 3}})
    assert out == {"a": {"b": 1, "c": 3}}


def test_load_config_missing_file_is_io(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "nope.json")


def test_load_config_malformed(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_load_config_roundtrip(tmp_path, ref):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(ref.raw))
    assert load_config(p).digest() == ref.digest()


def test_plan_determinism(ref):
    a, b = sample_scenario(ref, 0), sample_scenario(ref, 0)
    assert repr(a) == repr(b)


def test_frame_index_bounds(ref):
    with pytest.raises(ConfigError):
        sample_scenario(ref, ref.num_frames)


def test_stream_same_label_identical():
    s = frame_seed(7, 0)
    assert np.array_equal(derive_stream(s, "tx0.bits").random(64), derive_stream(s, "tx0.bits").random(64))


def test_stream_labels_differ():
    s = frame_seed(7, 0)
    assert not np.any(derive_stream(s, "tx0.bits").random(64) == derive_stream(s, "tx1.bits").random(64))


def test_stream_empty_label():
    with pytest.raises(ConfigError):
        derive_stream(1, "")


def test_frame_seeds_distinct():
    assert len({frame_seed(7, i) for i in range(1000)}) == 1000


@pytest.mark.slow
def test_tx_count_frequencies_and_segments():
    cfg = config_from_dict({"num_frames": 10_000})
    tx, seg = Counter(), Counter()
    for i in range(10_000):
        p = sample_scenario(cfg, i)
        tx[len(p.txs)] += 1
        for t in p.txs:
            seg[len(t.segment_symbols)] += 1
    for k in (1, 2, 3, 4):
        assert abs(tx[k] / 10_000 - 0.25) <= 0.02
    assert set(seg) == {1, 2, 3}


@given(st.integers(1, 6), st.integers(0, 5))
def test_prob_at_least_discrete(lo, span):
    d = ParameterDistribution("uniform-discrete", low=lo, high=lo + span)
    n = span + 1
    for v in range(lo - 1, lo + span + 2):
        expect = sum(1 for k in range(lo, lo + span + 1) if k >= v) / n
        assert d.prob_at_least(v) == pytest.approx(expect)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 99))
def test_plans_stay_in_bounds(seed, idx):
    cfg = config_from_dict({"seed": seed})
    p = sample_scenario(cfg, idx)
    assert 1 <= len(p.txs) <= 4 and 1 <= len(p.rxs) <= 4
    for t in p.txs:
        assert 30e3 <= t.spec.symbol_rate <= 50e3
        assert 1 <= t.n_antennas <= 4
    for r in p.rxs:
        assert 10 <= r.noise_figure_db <= 20
    for lk in p.links:
        if lk.fading == "rician":
            assert 1 <= lk.k_factor <= 9

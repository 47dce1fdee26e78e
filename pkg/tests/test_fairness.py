import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairlens.errors import ShapeError
from fairlens.fairness import (
    ScoreHistogram,
    UndefinedRateError,
    build_report,
    ethnicity_kl,
    four_fifths_flag,
    kl_divergence,
    p_percent,
    p_percent_from_rates,
    select_top_k,
)


def test_kl_two_bin_example():
    p = ScoreHistogram([50, 50])
    q = ScoreHistogram([75, 25])
    assert kl_divergence(p, q, eps=0.0) == pytest.approx(0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(2.0), abs=1e-12)
    assert kl_divergence(p, q, eps=0.0) == pytest.approx(0.1438, abs=1e-4)


def test_kl_identical_is_zero_and_smoothing_finite():
    h = ScoreHistogram.from_scores([0.1, 0.2, 0.9])
    assert kl_divergence(h, h) == 0.0
    a = ScoreHistogram.from_scores([0.1] * 10)
    b = ScoreHistogram.from_scores([0.9] * 10)
    assert np.isfinite(kl_divergence(a, b)) and kl_divergence(a, b) > 5


def test_kl_rejects_mismatch():
    with pytest.raises(ValueError):
        kl_divergence(ScoreHistogram([1, 1]), ScoreHistogram([1, 1, 1]))
    with pytest.raises(ValueError):
        kl_divergence(ScoreHistogram([0, 0]), ScoreHistogram([1, 1]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=5, max_size=5), st.lists(st.integers(0, 50), min_size=5, max_size=5),
       st.integers(1, 9))
def test_kl_nonneg_and_scale_invariant(a, b, c):
    if sum(a) == 0 or sum(b) == 0:
        return
    p, q = ScoreHistogram(a), ScoreHistogram(b)
    d = kl_divergence(p, q)
    assert d >= 0.0
    scaled = kl_divergence(ScoreHistogram(np.array(a) * c), ScoreHistogram(np.array(b) * c))
    assert scaled == pytest.approx(d, rel=1e-9, abs=1e-12)


def test_ethnicity_kl_pairs():
    h = [ScoreHistogram([5, 5]), ScoreHistogram([5, 5]), ScoreHistogram([9, 1])]
    pairs, mean = ethnicity_kl(h)
    assert pairs[0] == 0.0 and pairs[1] == pytest.approx(pairs[2]) and mean == pytest.approx(sum(pairs) / 3)


def test_histogram_binning_includes_one():
    h = ScoreHistogram.from_scores([0.0, 0.5, 1.0])
    assert h.total == 3 and h.n_bins == 50 and h.counts[-1] == 1


def test_select_top_k_ties_by_id():
    scores = {0: 0.5, 1: 0.9, 2: 0.5, 3: 0.9, 4: 0.1}
    sel = select_top_k(scores, 3, {0: "a", 1: "b", 2: "a", 3: "a", 4: "b"})
    assert sel.selected_ids == [1, 3, 0]
    assert sel.group_counts == {"b": 1, "a": 2}
    with pytest.raises(ValueError):
        select_top_k(scores, 6)


def test_p_percent_examples():
    sel = select_top_k({i: float(i) for i in range(10)}, 4, {i: i % 2 for i in range(10)})
    # selected 9,8,7,6 -> two of each parity
    assert p_percent(sel, {0: 5, 1: 5}, 0, 1) == 100.0
    assert p_percent_from_rates(0.1, 0.2) == pytest.approx(50.0)
    assert p_percent_from_rates(0.0, 0.2) == 0.0
    with pytest.raises(UndefinedRateError):
        p_percent_from_rates(0.0, 0.0)


def test_p_percent_gender_shares():
    # equal pools: p% reduces to min share ratio
    sel = select_top_k({i: -i for i in range(100)}, 10, {i: int(i >= 9) for i in range(100)})
    assert sel.group_counts == {0: 9, 1: 1}
    assert p_percent(sel, {0: 50, 1: 50}, 0, 1) == pytest.approx(100 / 9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.001, 1.0), st.floats(0.001, 1.0))
def test_p_percent_symmetric_bounded(a, b):
    v = p_percent_from_rates(a, b)
    assert v == pytest.approx(p_percent_from_rates(b, a))
    assert 0.0 < v <= 100.0


def test_four_fifths_boundary():
    assert four_fifths_flag(79.99)
    assert not four_fifths_flag(80.0)
    assert not four_fifths_flag(100.0)


def test_build_report_on_known_scores(small_dataset):
    ds = small_dataset
    preds = {i: ds.profiles[i].score_g for i in ds.val_ids}
    rep = build_report(ds, preds, "biased-gender", k=20)
    assert rep.pool_size == len(ds.val_ids)
    assert rep.gender_shares["male"] + rep.gender_shares["female"] == pytest.approx(100.0)
    assert sum(rep.ethnicity_shares.values()) == pytest.approx(100.0)
    assert rep.leakage == "absent"
    assert rep.four_fifths["gender"] == four_fifths_flag(rep.p_gender)
    row = rep.summary_row()
    assert row["scenario"] == "biased-gender"
    with pytest.raises(ShapeError):
        build_report(ds, preds, "x", k=len(preds) + 1)


def test_report_json_round_trip(small_dataset):
    import json

    ds = small_dataset
    preds = {i: ds.profiles[i].score_u for i in ds.val_ids}
    rep = build_report(ds, preds, "neutral", k=10)
    assert json.loads(rep.to_json())["k"] == 10


def test_kl_is_asymmetric():
    p = ScoreHistogram([90, 10, 0])
    q = ScoreHistogram([30, 30, 40])
    assert kl_divergence(p, q) != pytest.approx(kl_divergence(q, p), rel=1e-3)

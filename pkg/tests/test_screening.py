"""Pearson correlation, category thresholds, best-fit selection, census."""

import numpy as np
import pytest
import scipy.stats

from trendmeter.calendar_signal import CalendarSignal
from trendmeter.errors import (
    ConstantInputError,
    DataError,
    InsufficientOverlapError,
)
from trendmeter.ingest import MeterType
from trendmeter.screening import (
    CorrelationCategory,
    classify_correlation,
    pearson_r,
    screen_meter,
    screening_census,
)
from trendmeter.trends import TrendSeries, standardize_by_year

from conftest import hourly_series


def test_identity_is_one():
    x = np.array([1.0, 2.0, 5.0, 9.0])
    assert pearson_r(x, x) == pytest.approx(1.0)


def test_exact_anticorrelation():
    assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


def test_textbook_example_is_point_eight():
    # frozen from direct evaluation of the product-moment formula
    assert pearson_r([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_matches_scipy_on_seeded_pairs():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        x = rng.normal(0, 1, 60)
        y = 0.4 * x + rng.normal(0, 1, 60)
        want = scipy.stats.pearsonr(x, y).statistic
        assert pearson_r(x, y) == pytest.approx(want, abs=1e-12)


def test_symmetry_affine_invariance_negation():
    rng = np.random.default_rng(1)
    x = rng.normal(0, 1, 40)
    y = rng.normal(0, 1, 40)
    r = pearson_r(x, y)
    assert pearson_r(y, x) == pytest.approx(r, abs=1e-12)
    assert pearson_r(3.5 * x + 2.0, y) == pytest.approx(r, abs=1e-12)
    assert pearson_r(-x, y) == pytest.approx(-r, abs=1e-12)


def test_nan_pairs_dropped_before_checks():
    x = np.array([1.0, np.nan, 2.0, 3.0, 4.0])
    y = np.array([2.0, 5.0, np.nan, 6.0, 8.0])
    r = pearson_r(x, y)
    assert r == pytest.approx(pearson_r([1, 3, 4], [2, 6, 8]), abs=1e-12)


def test_constant_and_short_inputs_raise():
    with pytest.raises(ConstantInputError):
        pearson_r([1, 1, 1, 1], [1, 2, 3, 4])
    with pytest.raises(InsufficientOverlapError):
        pearson_r([1, 2], [3, 4])


def test_classification_boundaries():
    assert classify_correlation(0.85) is CorrelationCategory.HIGH
    assert classify_correlation(0.59) is CorrelationCategory.POOR
    assert classify_correlation(0.80) is CorrelationCategory.FAIR
    assert classify_correlation(0.60) is CorrelationCategory.FAIR
    assert classify_correlation(0.0) is CorrelationCategory.POOR
    assert classify_correlation(1.0) is CorrelationCategory.HIGH
    with pytest.raises(DataError):
        classify_correlation(1.5)
    with pytest.raises(DataError):
        classify_correlation(-0.1)


def _signal(scores, year=2016, meter_id="m1"):
    scores = np.asarray(scores, dtype=np.float64)
    start = np.datetime64(f"{year}-01-01", "D")
    n_days = 366 if year % 4 == 0 else 365
    full = np.full(n_days, np.nan)
    full[: len(scores)] = scores
    mask = ~np.isnan(full)
    return CalendarSignal(
        meter_id=meter_id,
        year=year,
        dates=np.arange(start, start + n_days),
        scores=full,
        day_mask=mask,
    )


def _trend(topic_id, values, year=2016, geo="US"):
    values = np.asarray(values, dtype=np.float64)
    start = np.datetime64(f"{year}-01-01", "D")
    n_days = 366 if year % 4 == 0 else 365
    raw = np.full(n_days, 50.0)
    lo, hi = values.min(), values.max()
    span = hi - lo if hi > lo else 1.0
    raw[: len(values)] = np.rint(100 * (values - lo) / span)
    series = TrendSeries(
        topic_id=topic_id, geo=geo,
        dates=np.arange(start, start + n_days), raw=raw,
    )
    return standardize_by_year(series)


def test_identical_topic_wins_with_r_one(screening_cfg):
    rng = np.random.default_rng(0)
    pattern = rng.random(200)
    signal = _signal(pattern)
    match = _trend("match", pattern)
    aligned = match.standardized[:200]
    signal2 = _signal(aligned)  # calendar identical to the topic's z-scores
    decoy = _trend("decoy", rng.random(200))
    result = screen_meter(signal2, [match, decoy], 2016, screening_cfg)
    assert result.best_topic_id == "match"
    assert result.r == pytest.approx(1.0, abs=1e-9)
    assert result.category is CorrelationCategory.HIGH


def test_negated_topic_wins_by_r_squared(screening_cfg):
    rng = np.random.default_rng(1)
    pattern = rng.random(200)
    match = _trend("match", pattern)
    signal = _signal(-match.standardized[:200])
    decoy = _trend("decoy", rng.random(200))
    result = screen_meter(signal, [match, decoy], 2016, screening_cfg)
    assert result.best_topic_id == "match"
    assert result.r == pytest.approx(-1.0, abs=1e-9)
    assert result.r_squared == pytest.approx(1.0, abs=1e-9)
    assert result.category is CorrelationCategory.HIGH


def test_planted_topic_recovered_in_95_of_100_trials(screening_cfg):
    wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        planted_values = np.cumsum(rng.normal(0, 1, 366))
        planted = _trend("planted", planted_values)
        noise = rng.normal(
            0.0, 0.05 * planted.standardized.std(), 366
        )
        signal = _signal(planted.standardized + noise)
        decoys = [
            _trend(f"decoy{k:02d}", np.cumsum(rng.normal(0, 1, 366)))
            for k in range(10)
        ]
        result = screen_meter(signal, decoys + [planted], 2016, screening_cfg)
        if result.best_topic_id == "planted" and result.r_squared > 0.8:
            wins += 1
    assert wins >= 95


def test_selection_invariant_under_calendar_rescaling(screening_cfg):
    rng = np.random.default_rng(3)
    pattern = rng.random(250)
    topics = [
        _trend(f"t{k}", np.cumsum(rng.normal(0, 1, 300))) for k in range(5)
    ]
    topics.append(_trend("match", pattern + rng.normal(0, 0.1, 250)))
    base = screen_meter(_signal(pattern), topics, 2016, screening_cfg)
    scaled = screen_meter(
        _signal(4.2 * pattern + 17.0), topics, 2016, screening_cfg
    )
    assert base.best_topic_id == scaled.best_topic_id
    assert base.r_squared == pytest.approx(scaled.r_squared, abs=1e-9)


def test_ties_break_lexicographically(screening_cfg):
    rng = np.random.default_rng(4)
    pattern = rng.random(200)
    twin_a = _trend("aardvark", pattern)
    twin_b = _trend("zebra", pattern)
    result = screen_meter(
        _signal(twin_a.standardized[:200]), [twin_b, twin_a], 2016,
        screening_cfg,
    )
    assert result.best_topic_id == "aardvark"


def test_insufficient_overlap_raises(screening_cfg):
    rng = np.random.default_rng(5)
    signal = _signal(rng.random(50))  # fewer days than min_overlap_days
    topic = _trend("t", rng.random(366))
    with pytest.raises(InsufficientOverlapError):
        screen_meter(signal, [topic], 2016, screening_cfg)


def test_brute_force_equivalence_small_catalogs(screening_cfg):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        pattern = rng.random(300)
        topics = [
            _trend(f"t{k}", np.cumsum(rng.normal(0, 1, 320)))
            for k in range(8)
        ]
        signal = _signal(pattern)
        result = screen_meter(signal, topics, 2016, screening_cfg)
        best_id, best_r2 = None, -1.0
        for topic in sorted(topics, key=lambda t: t.topic_id):
            r = scipy.stats.pearsonr(
                pattern, topic.standardized[:300]
            ).statistic
            if r * r > best_r2 + 1e-15:
                best_id, best_r2 = topic.topic_id, r * r
        assert result.best_topic_id == best_id
        assert result.r_squared == pytest.approx(best_r2, abs=1e-12)


def _meters(n, meter_type=MeterType.ELECTRICITY):
    out = []
    for i in range(n):
        m = hourly_series(
            "2016-01-01", np.ones(24), meter_id=f"m{i}", building_id=f"b{i}"
        )
        m.meter_type = meter_type
        out.append(m)
    return out


def _result(meter_id, r2):
    from trendmeter.screening import ScreeningResult, classify_correlation

    r = np.sqrt(r2)
    return ScreeningResult(
        meter_id=meter_id, best_topic_id="t", geo="US", r=r, r_squared=r2,
        category=classify_correlation(r2), n_days_used=200,
        per_topic_table={"t": r2},
    )


def test_census_counts_and_percentages():
    meters = _meters(4)
    results = {
        "m0": _result("m0", 0.9),
        "m1": _result("m1", 0.85),
        "m2": _result("m2", 0.7),
        "m3": _result("m3", 0.1),
    }
    census = screening_census(results, meters)
    row = census.by_meter_type.iloc[0]
    assert row["group"] == "electricity"
    assert (row["poor_count"], row["fair_count"], row["high_count"]) == (1, 1, 2)
    pct_total = row["poor_pct"] + row["fair_pct"] + row["high_pct"]
    assert pct_total == pytest.approx(100.0, abs=0.1)


def test_census_unscreenable_counts_as_poor():
    meters = _meters(2)
    results = {"m0": _result("m0", 0.9), "m1": None}
    census = screening_census(results, meters)
    row = census.by_meter_type.iloc[0]
    assert row["poor_count"] == 1
    assert row["high_count"] == 1


def test_census_empty_input_all_zero():
    census = screening_census({}, [])
    assert census.by_meter_type.empty
    assert census.by_topic.empty

"""Topic catalog, trend CSV ingestion, and per-year standardization."""

import numpy as np
import pandas as pd
import pytest

from trendmeter.errors import DataError
from trendmeter.trends import (
    TrendSeries,
    default_topic_catalog,
    load_topic_catalog,
    load_trend_csv,
    standardize_by_year,
)

from conftest import write_csv


def test_default_catalog_has_39_topics():
    catalog = default_topic_catalog()
    assert len(catalog) == 39
    ids = {t.topic_id for t in catalog}
    assert len(ids) == 39
    by_category = {}
    for t in catalog:
        by_category.setdefault(t.category.value, 0)
        by_category[t.category.value] += 1
    assert by_category == {"building_type": 29, "productivity_tool": 10}


def test_empty_catalog_rejected(tmp_path):
    path = write_csv(tmp_path / "cat.csv", "topic_id,display_name,category\n")
    with pytest.raises(DataError, match="empty catalog"):
        load_topic_catalog(path)


def test_duplicate_topic_rejected(tmp_path):
    path = write_csv(
        tmp_path / "cat.csv",
        """
        topic_id,display_name,category
        education,Education,building_type
        education,Education again,building_type
        """,
    )
    with pytest.raises(DataError, match="duplicate topic_id"):
        load_topic_catalog(path)


def _trend_csv(tmp_path, rows):
    return write_csv(
        tmp_path / "trends.csv", "\n".join(["topic_id,geo,date,volume"] + rows)
    )


def _full_years_rows(topic="education", geo="US", years=(2016, 2017), value=None):
    rows = []
    days = pd.date_range(f"{years[0]}-01-01", f"{years[-1]}-12-31")
    rng = np.random.default_rng(0)
    for i, day in enumerate(days):
        v = value if value is not None else int(rng.integers(0, 101))
        rows.append(f"{topic},{geo},{day.date().isoformat()},{v}")
    return rows, len(days)


def test_two_year_series_loads_with_correct_length(tmp_path):
    rows, n = _full_years_rows()
    (series,) = load_trend_csv(_trend_csv(tmp_path, rows))
    assert n == 731  # 366 + 365
    assert len(series) == 731
    assert series.geo == "US"


def test_volume_out_of_range_rejected(tmp_path):
    rows, _ = _full_years_rows()
    rows[10] = "education,US,2016-01-11,101"
    with pytest.raises(DataError, match=r"volume outside \[0, 100\]"):
        load_trend_csv(_trend_csv(tmp_path, rows))


def test_missing_interior_date_interpolated_and_flagged(tmp_path):
    rows, _ = _full_years_rows(value=40)
    # drop 2016-03-10; its neighbors become 40 and 60
    rows = [r for r in rows if "2016-03-10" not in r]
    rows = [r.replace("2016-03-11,40", "2016-03-11,60") for r in rows]
    (series,) = load_trend_csv(_trend_csv(tmp_path, rows))
    idx = int(
        (np.datetime64("2016-03-10") - series.dates[0])
        / np.timedelta64(1, "D")
    )
    assert series.raw[idx] == 50.0
    assert series.interpolated[idx]
    assert not series.interpolated[idx - 1]


def test_short_series_rejected(tmp_path):
    rows = [
        f"education,US,{d.date().isoformat()},50"
        for d in pd.date_range("2016-01-01", "2016-06-30")
    ]
    with pytest.raises(DataError, match="shorter than one full year"):
        load_trend_csv(_trend_csv(tmp_path, rows))


def _series(dates, raw):
    return TrendSeries(
        topic_id="t", geo="US", dates=np.asarray(dates, dtype="datetime64[D]"),
        raw=np.asarray(raw, dtype=np.float64),
    )


def _one_year_dates(year=2016):
    start = np.datetime64(f"{year}-01-01", "D")
    end = np.datetime64(f"{year + 1}-01-01", "D")
    return np.arange(start, end)


def test_standardize_tristate_fixture():
    # a leap year has 366 = 3 * 122 days, so {0, 50, 100} repeats exactly
    # uniformly: mean 50, population std sqrt(5000/3) = 40.8248...
    dates = _one_year_dates(2016)
    raw = np.tile([0.0, 50.0, 100.0], 122)
    out = standardize_by_year(_series(dates, raw))
    assert raw.std() == pytest.approx(40.8248, abs=1e-4)
    assert out.standardized[0] == pytest.approx(-1.2247, abs=1e-4)
    assert out.standardized[1] == pytest.approx(0.0, abs=1e-12)
    assert out.standardized[2] == pytest.approx(1.2247, abs=1e-4)


def test_standardized_year_has_zero_mean_unit_std():
    rng = np.random.default_rng(1)
    dates = np.arange(
        np.datetime64("2016-01-01", "D"), np.datetime64("2018-01-01", "D")
    )
    raw = rng.integers(0, 101, len(dates)).astype(float)
    out = standardize_by_year(_series(dates, raw))
    years = out.years()
    for year in (2016, 2017):
        chunk = out.standardized[years == year]
        assert abs(chunk.mean()) < 1e-9
        assert abs(chunk.std() - 1.0) < 1e-9


def test_constant_year_degenerate_flag():
    dates = _one_year_dates()
    out = standardize_by_year(_series(dates, np.full(366, 42.0)))
    assert out.degenerate_years == [2016]
    np.testing.assert_array_equal(out.standardized, np.zeros(366))


def test_per_year_independence():
    dates = np.arange(
        np.datetime64("2016-01-01", "D"), np.datetime64("2018-01-01", "D")
    )
    rng = np.random.default_rng(2)
    raw = rng.integers(0, 101, len(dates)).astype(float)
    both = standardize_by_year(_series(dates, raw))
    # perturb 2016 values only; 2017 z-scores must not move
    raw2 = raw.copy()
    raw2[:366] = rng.integers(0, 101, 366).astype(float)
    other = standardize_by_year(_series(dates, raw2))
    y = both.years() == 2017
    np.testing.assert_array_equal(both.standardized[y], other.standardized[y])


def test_partial_year_rejected_unless_allowed():
    dates = np.arange(
        np.datetime64("2016-01-01", "D"), np.datetime64("2017-03-01", "D")
    )
    raw = np.arange(len(dates), dtype=float) % 90
    with pytest.raises(DataError, match="partial year"):
        standardize_by_year(_series(dates, raw))
    out = standardize_by_year(_series(dates, raw), allow_partial=True)
    assert out.standardized is not None


def test_affine_invariance_and_idempotence_seeded():
    # standardize(a*x + b) == standardize(x) elementwise for a > 0, and a
    # second standardization pass is the identity, both to 1e-9 over 100
    # seeded series
    dates = _one_year_dates()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        raw = rng.integers(0, 101, 366).astype(float)
        base = standardize_by_year(_series(dates, raw))
        a = float(rng.uniform(0.1, 0.9))
        b = float(rng.uniform(0.0, 10.0))
        scaled_raw = a * raw + b
        assert scaled_raw.min() >= 0 and scaled_raw.max() <= 100
        scaled = standardize_by_year(_series(dates, scaled_raw))
        np.testing.assert_allclose(
            scaled.standardized, base.standardized, atol=1e-9
        )
        # z-scores have mean 0 and std 1, so feeding any affine remap of
        # them back through the transform must reproduce them exactly
        remapped = standardize_by_year(
            _series(dates, 50.0 + 10.0 * base.standardized)
        )
        np.testing.assert_allclose(
            remapped.standardized, base.standardized, atol=1e-9
        )

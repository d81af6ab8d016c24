"""Cleaning rules, their report reconciliation, and weather imputation."""

import numpy as np
import pandas as pd
import pytest

from trendmeter.cleaning import clean_meter_series, impute_weather
from trendmeter.config import CleaningConfig
from trendmeter.errors import DataError
from trendmeter.ingest import WEATHER_FIELDS, WeatherSeries

from conftest import hourly_series


def test_constant_run_of_72_masked(cleaning_cfg):
    series = hourly_series("2016-01-01", [5.0] * 72)
    cleaned, report = clean_meter_series(series, cleaning_cfg)
    assert cleaned.valid_hours == 0
    assert report.removed_constant_run_count == 1
    assert len(report.removed_hours) == 72


def test_well_behaved_series_untouched(cleaning_cfg):
    rng = np.random.default_rng(0)
    series = hourly_series("2016-01-01", 10.0 + rng.random(200))
    cleaned, report = clean_meter_series(series, cleaning_cfg)
    assert cleaned.valid_hours == 200
    assert report.removed_outlier_count == 0
    assert report.removed_constant_run_count == 0
    assert report.removed_hours == []


def test_extreme_spike_masked_as_outlier(cleaning_cfg):
    # frozen from the z-score oracle below: one reading at 1e6 among
    # values near 10 exceeds |z| = 8 on log1p
    rng = np.random.default_rng(1)
    values = 10.0 + rng.random(500)
    values[123] = 1.0e6
    logs = np.log1p(values)
    z = np.abs(logs - logs.mean()) / logs.std()
    assert z[123] > 8.0  # oracle check on the fixture itself

    series = hourly_series("2016-01-01", values)
    cleaned, report = clean_meter_series(series, cleaning_cfg)
    assert not cleaned.mask[123]
    assert report.removed_outlier_count >= 1
    assert series.timestamps[123] in report.removed_hours


def test_cleaning_is_idempotent(cleaning_cfg):
    rng = np.random.default_rng(2)
    values = 10.0 + rng.random(400)
    values[50] = 2.0e6
    values[100:160] = 3.25
    series = hourly_series("2016-01-01", values)
    once, report1 = clean_meter_series(series, cleaning_cfg)
    twice, report2 = clean_meter_series(once, cleaning_cfg)
    assert np.array_equal(once.mask, twice.mask)
    assert report2.removed_outlier_count == 0
    assert report2.removed_constant_run_count == 0


def test_report_reconciles_with_mask_difference(cleaning_cfg):
    rng = np.random.default_rng(3)
    values = 5.0 + rng.random(300)
    values[10] = 5.0e6
    values[200:260] = 2.0
    series = hourly_series("2016-01-01", values)
    cleaned, report = clean_meter_series(series, cleaning_cfg)
    removed = int(series.mask.sum() - cleaned.mask.sum())
    assert removed == len(report.removed_hours)
    assert cleaned.valid_hours <= series.valid_hours
    run_hours = len(report.removed_hours) - report.removed_outlier_count
    assert run_hours >= cleaning_cfg.min_constant_hours * report.removed_constant_run_count


def test_masked_hours_break_constant_runs(cleaning_cfg):
    # 30 + gap + 30 identical readings: neither side reaches 48 alone
    values = np.array([7.0] * 30 + [np.nan] + [7.0] * 30)
    series = hourly_series("2016-01-01", values)
    cleaned, report = clean_meter_series(series, cleaning_cfg)
    assert report.removed_constant_run_count == 0
    assert cleaned.valid_hours == 60


def _weather(values: dict, start="2016-01-01") -> WeatherSeries:
    n = len(next(iter(values.values())))
    full = {}
    for name in WEATHER_FIELDS:
        full[name] = np.asarray(
            values.get(name, np.zeros(n)), dtype=np.float64
        )
    return WeatherSeries(
        site_id="s0",
        timestamps=pd.date_range(start, periods=n, freq="h").to_numpy(),
        values=full,
    )


def test_short_gap_linear_interpolation():
    temps = np.array([10.0, np.nan, np.nan, 12.0] + [11.0] * 20)
    weather = _weather({"air_temperature": temps, "dew_temperature": temps - 2})
    out = impute_weather(weather, CleaningConfig(max_interp_hours=2))
    assert out.values["air_temperature"][1] == pytest.approx(10.0 + 2.0 / 3.0)
    assert out.values["air_temperature"][2] == pytest.approx(10.0 + 4.0 / 3.0)
    assert out.imputed["air_temperature"][1]
    assert not out.imputed["air_temperature"][0]


def test_no_gaps_identity():
    temps = 10.0 + np.arange(48, dtype=float) % 5
    weather = _weather({"air_temperature": temps, "dew_temperature": temps - 2})
    out = impute_weather(weather, CleaningConfig())
    for name in WEATHER_FIELDS:
        np.testing.assert_array_equal(out.values[name], weather.values[name])
        assert not out.imputed[name].any()


def test_fully_missing_temperature_is_error():
    temps = np.full(48, np.nan)
    weather = _weather({"air_temperature": temps, "dew_temperature": temps})
    with pytest.raises(DataError, match="entirely missing"):
        impute_weather(weather, CleaningConfig())


def test_long_temperature_gap_uses_hourly_monthly_mean():
    n = 24 * 40
    hours = pd.date_range("2016-01-01", periods=n, freq="h")
    temps = 10.0 + 3.0 * np.sin(2 * np.pi * hours.hour.to_numpy() / 24)
    temps = temps.copy()
    temps[100:150] = np.nan  # longer than max_interp_hours
    weather = _weather({"air_temperature": temps, "dew_temperature": temps - 2})
    out = impute_weather(weather, CleaningConfig(max_interp_hours=6))
    filled = out.values["air_temperature"]
    assert not np.isnan(filled).any()
    # hour-of-day mean of January values at the gap's hours
    idx = 120
    hour = hours[idx].hour
    observed = ~np.isnan(temps)
    jan = hours.month.to_numpy() == 1
    same_slot = observed & jan & (hours.hour.to_numpy() == hour)
    assert filled[idx] == pytest.approx(temps[same_slot].mean())
    assert out.imputed["air_temperature"][idx]


def test_non_temperature_fields_stay_missing_beyond_interpolation():
    n = 96
    cloud = np.full(n, 4.0)
    cloud[10:40] = np.nan
    temps = np.full(n, 10.0)
    weather = _weather(
        {
            "air_temperature": temps,
            "dew_temperature": temps - 2,
            "cloud_coverage": cloud,
        }
    )
    out = impute_weather(weather, CleaningConfig(max_interp_hours=6))
    assert np.isnan(out.values["cloud_coverage"][20])


def test_impute_never_alters_present_values():
    rng = np.random.default_rng(4)
    n = 24 * 20
    temps = 12.0 + rng.normal(0, 2, n)
    gaps = rng.choice(n, size=60, replace=False)
    temps_g = temps.copy()
    temps_g[gaps] = np.nan
    weather = _weather(
        {"air_temperature": temps_g, "dew_temperature": temps_g - 2}
    )
    out = impute_weather(weather, CleaningConfig())
    present = ~np.isnan(temps_g)
    np.testing.assert_array_equal(
        out.values["air_temperature"][present], temps_g[present]
    )

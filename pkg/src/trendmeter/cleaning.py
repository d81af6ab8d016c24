"""Meter cleaning (outlier and constant-run removal) and weather imputation."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .config import CleaningConfig
from .errors import DataError
from .ingest import WEATHER_FIELDS, CleaningReport, MeterSeries, WeatherSeries

_MAX_CLEAN_PASSES = 50


def _outlier_pass(readings, mask, z_threshold):
    """Indices of valid hours whose log1p reading has |z| > threshold."""
    valid_idx = np.flatnonzero(mask)
    if valid_idx.size < 3:
        return np.array([], dtype=np.intp)
    logs = np.log1p(readings[valid_idx])
    std = logs.std()
    if std == 0:
        return np.array([], dtype=np.intp)
    z = (logs - logs.mean()) / std
    return valid_idx[np.abs(z) > z_threshold]


def _constant_runs(readings, mask, min_hours):
    """Maximal runs of >= min_hours identical consecutive valid readings.

    Consecutive means adjacent hours on the time grid; a masked hour
    breaks a run, so re-cleaning never forms new runs.
    """
    n = len(readings)
    runs = []
    start = 0
    while start < n:
        if not mask[start]:
            start += 1
            continue
        end = start + 1
        while end < n and mask[end] and readings[end] == readings[start]:
            end += 1
        if end - start >= min_hours:
            runs.append((start, end))
        start = end
    return runs


def clean_meter_series(
    series: MeterSeries, cfg: CleaningConfig
) -> tuple[MeterSeries, CleaningReport]:
    """Mask outlier hours and days-long constant runs on one meter.

    Outliers are hours with |z| > cfg.z_threshold computed on log1p
    readings over the currently-valid hours; constant runs are maximal
    stretches of >= cfg.min_constant_hours identical consecutive valid
    readings. Both rules repeat until no hour changes, which makes the
    whole operation idempotent. Cleaning is total: it never raises.
    """
    mask = series.mask.copy()
    outlier_hours: list[int] = []
    run_count = 0
    run_hours: list[int] = []

    for _ in range(_MAX_CLEAN_PASSES):
        changed = False

        hit = _outlier_pass(series.readings, mask, cfg.z_threshold)
        if hit.size:
            mask[hit] = False
            outlier_hours.extend(hit.tolist())
            changed = True

        for start, end in _constant_runs(
            series.readings, mask, cfg.min_constant_hours
        ):
            mask[start:end] = False
            run_count += 1
            run_hours.extend(range(start, end))
            changed = True

        if not changed:
            break

    removed = sorted(outlier_hours + run_hours)
    report = CleaningReport(
        meter_id=series.meter_id,
        removed_outlier_count=len(outlier_hours),
        removed_constant_run_count=run_count,
        removed_hours=[series.timestamps[i] for i in removed],
        rules_applied=[
            f"zscore_log1p>{cfg.z_threshold}",
            f"constant_run>={cfg.min_constant_hours}h",
        ],
    )
    cleaned = MeterSeries(
        meter_id=series.meter_id,
        building_id=series.building_id,
        site_id=series.site_id,
        meter_type=series.meter_type,
        timestamps=series.timestamps,
        readings=series.readings,
        mask=mask,
        duplicate_warning_count=series.duplicate_warning_count,
        negative_reading_count=series.negative_reading_count,
    )
    return cleaned, report


def cleaning_reports_frame(reports: list[CleaningReport]) -> pd.DataFrame:
    """Tabular CSV-ready view of cleaning reports (one row per meter)."""
    rows = []
    for rep in reports:
        rows.append(
            {
                "meter_id": rep.meter_id,
                "removed_outlier_count": rep.removed_outlier_count,
                "removed_constant_run_count": rep.removed_constant_run_count,
                "removed_hours_total": len(rep.removed_hours),
                "rules_applied": ";".join(rep.rules_applied),
            }
        )
    return pd.DataFrame(
        rows,
        columns=[
            "meter_id",
            "removed_outlier_count",
            "removed_constant_run_count",
            "removed_hours_total",
            "rules_applied",
        ],
    )


def _interpolate_short_gaps(values, max_gap):
    """Linearly fill interior NaN gaps of length <= max_gap (in place).

    Returns the boolean array of filled positions.
    """
    filled = np.zeros(len(values), dtype=bool)
    if max_gap <= 0:
        return filled
    isnan = np.isnan(values)
    n = len(values)
    i = 0
    while i < n:
        if not isnan[i]:
            i += 1
            continue
        j = i
        while j < n and isnan[j]:
            j += 1
        gap = j - i
        if 0 < i and j < n and gap <= max_gap:
            left, right = values[i - 1], values[j]
            steps = np.arange(1, gap + 1, dtype=np.float64) / (gap + 1)
            values[i:j] = left + (right - left) * steps
            filled[i:j] = True
        i = j
    return filled


def impute_weather(weather: WeatherSeries, cfg: CleaningConfig) -> WeatherSeries:
    """Fill weather gaps; temperatures end up complete.

    Gaps of <= cfg.max_interp_hours fill by linear interpolation for
    every field. Remaining air/dew temperature gaps fill with the site's
    hour-of-day monthly mean of observed values (falling back to the
    monthly then overall mean when a slot has no observations). Other
    fields stay missing beyond interpolation. Originally-present values
    are never altered; filled hours are flagged in ``imputed``.
    """
    ts = pd.DatetimeIndex(weather.timestamps)
    months = ts.month.to_numpy()
    hours = ts.hour.to_numpy()

    values = {}
    imputed = {}
    for name in WEATHER_FIELDS:
        col = weather.values[name].copy()
        flags = _interpolate_short_gaps(col, cfg.max_interp_hours)

        if name in ("air_temperature", "dew_temperature"):
            observed = ~np.isnan(weather.values[name])
            if not observed.any():
                raise DataError(
                    f"site {weather.site_id}: cannot impute {name}, "
                    "field entirely missing"
                )
            remaining = np.isnan(col)
            if remaining.any():
                obs_vals = weather.values[name][observed]
                obs_m = months[observed]
                obs_h = hours[observed]
                overall = obs_vals.mean()
                month_mean = {
                    m: obs_vals[obs_m == m].mean() for m in np.unique(obs_m)
                }
                slot_mean = {}
                for m, h in zip(obs_m, obs_h):
                    slot_mean.setdefault((m, h), []).append(True)
                slot_mean = {
                    key: obs_vals[(obs_m == key[0]) & (obs_h == key[1])].mean()
                    for key in slot_mean
                }
                for idx in np.flatnonzero(remaining):
                    key = (months[idx], hours[idx])
                    col[idx] = slot_mean.get(
                        key, month_mean.get(months[idx], overall)
                    )
                flags |= remaining

        values[name] = col
        imputed[name] = weather.imputed[name] | flags

    return WeatherSeries(
        site_id=weather.site_id,
        timestamps=weather.timestamps,
        values=values,
        imputed=imputed,
        invalid_value_count=weather.invalid_value_count,
    )

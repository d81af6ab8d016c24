"""Daily calendar signals: resample a meter's year to a day x hour matrix
and compress it to one score per day via the first principal component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .config import CalendarConfig
from .errors import DataError, ZeroVarianceError
from .ingest import MeterSeries

_POWER_MAX_ITER = 100_000
_POWER_TOL = 1e-13


@dataclass
class DayMatrix:
    """One calendar year of a meter as days-by-hours values.

    Rows are days (365 or 366 for a full year), columns are hours 0-23.
    A day is usable only when it had at least the configured number of
    valid hours; values on unusable days are NaN.
    """

    meter_id: str
    year: int
    values: np.ndarray  # (D, 24) kWh
    day_mask: np.ndarray  # (D,) bool, True = usable
    dates: np.ndarray  # (D,) datetime64[D]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.day_mask = np.asarray(self.day_mask, dtype=bool)
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        if self.values.ndim != 2 or self.values.shape[1] != 24:
            raise DataError("day matrix must be (days, 24)")
        if len(self.day_mask) != len(self.values) or len(self.dates) != len(
            self.values
        ):
            raise DataError("day matrix components must share one length")


@dataclass
class CalendarSignal:
    """Per-day scores summarizing a meter's year.

    Scores are defined exactly on usable days (NaN elsewhere). For the
    principal-component route, ``explained_variance_ratio`` holds the top
    eigenvalue's share of the day-covariance spectrum and the sign is
    fixed so scores correlate non-negatively with daily mean energy;
    ``sign_convention_applied`` records whether that fix flipped the raw
    eigenvector. The daily-totals fallback leaves
    ``explained_variance_ratio`` unset.
    """

    meter_id: str
    year: int
    dates: np.ndarray
    scores: np.ndarray
    day_mask: np.ndarray
    explained_variance_ratio: float | None = None
    sign_convention_applied: bool = False
    method: str = "pca"


def year_dates(year: int) -> np.ndarray:
    start = np.datetime64(f"{year}-01-01", "D")
    end = np.datetime64(f"{year + 1}-01-01", "D")
    return np.arange(start, end)


def resample_daily(
    series: MeterSeries, year: int, cfg: CalendarConfig
) -> DayMatrix:
    """Arrange one calendar year of hourly readings as a (D, 24) matrix.

    Invalid hours inside usable days fill with that day's mean of valid
    hours; days with fewer than cfg.min_valid_hours valid hours are
    masked unusable. Raises when the year has no usable day at all.
    """
    dates = year_dates(year)
    n_days = len(dates)
    values = np.full((n_days, 24), np.nan)
    valid = np.zeros((n_days, 24), dtype=bool)

    ts = pd.DatetimeIndex(series.timestamps)
    in_year = np.asarray(ts.year == year)
    if in_year.any():
        day_of_year = ts.dayofyear.to_numpy()[in_year] - 1
        hour = ts.hour.to_numpy()[in_year]
        values[day_of_year, hour] = series.readings[in_year]
        valid[day_of_year, hour] = series.mask[in_year]

    values[~valid] = np.nan
    counts = valid.sum(axis=1)
    day_mask = counts >= cfg.min_valid_hours
    if not day_mask.any():
        raise DataError(f"{series.meter_id}: no usable days in {year}")

    for day in np.flatnonzero(day_mask):
        row = values[day]
        gaps = np.isnan(row)
        if gaps.any():
            row[gaps] = row[~gaps].mean()
    values[~day_mask] = np.nan

    return DayMatrix(
        meter_id=series.meter_id,
        year=year,
        values=values,
        day_mask=day_mask,
        dates=dates,
    )


def _top_component_power(cov: np.ndarray) -> np.ndarray:
    """Unit top eigenvector of a PSD matrix by power iteration.

    Falls back to a dense eigendecomposition in the (pathological) case
    where the iteration has not settled within the cap, e.g. a top
    eigenvalue with near-ties.
    """
    dim = cov.shape[0]
    vec = np.full(dim, 1.0 / np.sqrt(dim))
    for _ in range(_POWER_MAX_ITER):
        nxt = cov @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            # start vector in the null space; restart off-axis
            vec = np.zeros(dim)
            vec[int(np.argmax(np.diag(cov)))] = 1.0
            continue
        nxt /= norm
        if nxt @ vec < 0:
            nxt = -nxt
        if np.max(np.abs(nxt - vec)) < _POWER_TOL:
            return nxt
        vec = nxt
    _, vectors = np.linalg.eigh(cov)
    return vectors[:, -1]


def pca_first_component(matrix: DayMatrix) -> CalendarSignal:
    """Project each usable day onto the top principal hourly profile.

    Columns are centered over usable days; scores are the projection of
    each centered day onto the unit top eigenvector of the 24x24 day
    covariance. The eigenvector's sign is flipped if needed so scores
    correlate non-negatively with daily mean energy.
    """
    usable = np.flatnonzero(matrix.day_mask)
    if len(usable) < 2:
        raise DataError(
            f"{matrix.meter_id}: need >= 2 usable days for PCA, "
            f"have {len(usable)}"
        )
    rows = matrix.values[usable]
    centered = rows - rows.mean(axis=0)
    cov = centered.T @ centered / len(usable)
    total_var = float(np.trace(cov))
    if total_var == 0.0:
        raise ZeroVarianceError(
            f"{matrix.meter_id}: all usable days identical in {matrix.year}"
        )

    component = _top_component_power(cov)
    top_eigenvalue = float(component @ cov @ component)
    scores_usable = centered @ component

    daily_mean = rows.mean(axis=1)
    flipped = False
    if daily_mean.std() > 0 and scores_usable.std() > 0:
        corr = float(np.corrcoef(scores_usable, daily_mean)[0, 1])
        if corr < 0:
            scores_usable = -scores_usable
            flipped = True
    elif component[int(np.argmax(np.abs(component)))] < 0:
        # no energy gradient to anchor the sign; canonicalize instead
        scores_usable = -scores_usable
        flipped = True

    scores = np.full(len(matrix.values), np.nan)
    scores[usable] = scores_usable
    return CalendarSignal(
        meter_id=matrix.meter_id,
        year=matrix.year,
        dates=matrix.dates,
        scores=scores,
        day_mask=matrix.day_mask.copy(),
        explained_variance_ratio=top_eigenvalue / total_var,
        sign_convention_applied=flipped,
        method="pca",
    )


def daily_totals(
    series: MeterSeries, year: int, cfg: CalendarConfig
) -> CalendarSignal:
    """Fallback signal: daily sum of valid readings over usable days."""
    dates = year_dates(year)
    n_days = len(dates)
    sums = np.zeros(n_days)
    counts = np.zeros(n_days, dtype=int)

    ts = pd.DatetimeIndex(series.timestamps)
    in_year = np.asarray(ts.year == year) & series.mask
    if in_year.any():
        day_of_year = ts.dayofyear.to_numpy()[in_year] - 1
        np.add.at(sums, day_of_year, series.readings[in_year])
        np.add.at(counts, day_of_year, 1)

    day_mask = counts >= cfg.min_valid_hours
    if not day_mask.any():
        raise DataError(f"{series.meter_id}: no usable days in {year}")
    scores = np.where(day_mask, sums, np.nan)
    return CalendarSignal(
        meter_id=series.meter_id,
        year=year,
        dates=dates,
        scores=scores,
        day_mask=day_mask,
        explained_variance_ratio=None,
        sign_convention_applied=False,
        method="daily_totals",
    )


def extract_calendar_signal(
    series: MeterSeries, year: int, cfg: CalendarConfig
) -> CalendarSignal:
    """PCA signal with the daily-totals fallback on degenerate years."""
    matrix = resample_daily(series, year, cfg)
    try:
        return pca_first_component(matrix)
    except (ZeroVarianceError, DataError):
        return daily_totals(series, year, cfg)

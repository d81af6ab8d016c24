"""Daily search-volume series: topic catalog, CSV ingestion, and the
per-calendar-year standardization applied before screening and modeling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import pandas as pd

from .errors import DataError

DAY = np.timedelta64(1, "D")


class TopicCategory(str, enum.Enum):
    BUILDING_TYPE = "building_type"
    PRODUCTIVITY_TOOL = "productivity_tool"


@dataclass(frozen=True)
class TrendTopic:
    topic_id: str
    display_name: str
    category: TopicCategory


@dataclass
class TrendSeries:
    """Daily relative search volume for one (topic, country) pair.

    ``raw`` holds platform volumes in [0, 100] on a contiguous daily
    grid; ``standardized`` holds per-calendar-year z-scores once
    :func:`standardize_by_year` has run. ``interpolated`` flags dates
    filled at load time; ``degenerate_years`` lists years whose raw data
    was constant (their z-scores are all zero).
    """

    topic_id: str
    geo: str
    dates: np.ndarray  # datetime64[D], contiguous daily
    raw: np.ndarray  # float64 integers in [0, 100]
    standardized: np.ndarray | None = None
    interpolated: np.ndarray | None = None
    degenerate_years: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if len(self.dates) != len(self.raw):
            raise DataError(
                f"trend series {self.topic_id}/{self.geo}: length mismatch"
            )
        if len(self.dates) > 1 and not np.all(np.diff(self.dates) == DAY):
            raise DataError(
                f"trend series {self.topic_id}/{self.geo}: dates must be "
                "contiguous daily"
            )
        if np.any(self.raw < 0) or np.any(self.raw > 100):
            raise DataError(
                f"trend series {self.topic_id}/{self.geo}: volume outside "
                "[0, 100]"
            )
        if self.interpolated is None:
            self.interpolated = np.zeros(len(self.dates), dtype=bool)

    def __len__(self) -> int:
        return len(self.dates)

    def years(self) -> np.ndarray:
        return self.dates.astype("datetime64[Y]").astype(int) + 1970

    def value_on(self, date) -> float:
        """Standardized value on a date, NaN when outside the range."""
        day = np.asarray([np.datetime64(date, "D")])
        return float(self.values_on(day)[0])

    def values_on(self, dates: np.ndarray) -> np.ndarray:
        """Standardized values at the given dates; NaN outside the range."""
        if self.standardized is None:
            raise DataError(
                f"trend series {self.topic_id}/{self.geo} not standardized"
            )
        offsets = (
            (np.asarray(dates, dtype="datetime64[D]") - self.dates[0]) / DAY
        ).astype(int)
        values = np.full(len(offsets), np.nan)
        inside = (offsets >= 0) & (offsets < len(self.dates))
        values[inside] = self.standardized[offsets[inside]]
        return values


def load_topic_catalog(path) -> list[TrendTopic]:
    """Load the topic catalog CSV (topic_id, display_name, category)."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"could not read {path}: {exc}") from exc
    missing = {"topic_id", "display_name", "category"} - set(frame.columns)
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")
    if frame.empty:
        raise DataError(f"{path}: empty catalog")
    topics = []
    seen = set()
    for row in frame.itertuples(index=False):
        topic_id = str(row.topic_id).strip()
        if topic_id in seen:
            raise DataError(f"{path}: duplicate topic_id {topic_id!r}")
        seen.add(topic_id)
        try:
            category = TopicCategory(str(row.category).strip())
        except ValueError:
            raise DataError(
                f"{path}: unknown category {row.category!r} for {topic_id}"
            ) from None
        topics.append(TrendTopic(topic_id, str(row.display_name), category))
    return topics


def default_topic_catalog() -> list[TrendTopic]:
    """The shipped 39-topic catalog (building types + productivity tools)."""
    ref = resources.files("trendmeter.data").joinpath("topic_catalog.csv")
    with resources.as_file(ref) as path:
        return load_topic_catalog(path)


def load_trend_csv(path) -> list[TrendSeries]:
    """Load raw daily trend series, one per (topic_id, geo).

    Missing interior dates fill by linear interpolation rounded to the
    nearest integer and are flagged; volumes must lie in [0, 100] and
    each series must span at least one full year of days.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"could not read {path}: {exc}") from exc
    missing = {"topic_id", "geo", "date", "volume"} - set(frame.columns)
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")

    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    if dates.isna().any():
        bad = frame.loc[dates.isna(), "date"].iloc[0]
        raise DataError(f"{path}: malformed date {bad!r}")
    volumes = pd.to_numeric(frame["volume"], errors="coerce")
    if volumes.isna().any():
        bad = frame.loc[volumes.isna(), "volume"].iloc[0]
        raise DataError(f"{path}: unparseable volume {bad!r}")
    if ((volumes < 0) | (volumes > 100)).any():
        bad = volumes[(volumes < 0) | (volumes > 100)].iloc[0]
        raise DataError(f"{path}: volume outside [0, 100]: {bad}")

    work = pd.DataFrame(
        {
            "topic_id": frame["topic_id"].astype(str),
            "geo": frame["geo"].astype(str).str.upper(),
            "date": dates.dt.normalize(),
            "volume": volumes.astype(np.float64),
        }
    )

    out: list[TrendSeries] = []
    for (topic, geo), group in work.groupby(["topic_id", "geo"], sort=True):
        group = group.sort_values("date", kind="stable")
        group = group.drop_duplicates(subset="date", keep="last")
        grid = pd.date_range(group["date"].iloc[0], group["date"].iloc[-1])
        if len(grid) < 365:
            raise DataError(
                f"{path}: series {topic}/{geo} spans {len(grid)} days, "
                "shorter than one full year"
            )
        values = (
            group.set_index("date")["volume"].reindex(grid).to_numpy(np.float64)
        )
        gaps = np.isnan(values)
        if gaps.any():
            idx = np.arange(len(values), dtype=np.float64)
            values[gaps] = np.interp(idx[gaps], idx[~gaps], values[~gaps])
            values[gaps] = np.rint(values[gaps])
        out.append(
            TrendSeries(
                topic_id=str(topic),
                geo=str(geo),
                dates=grid.to_numpy().astype("datetime64[D]"),
                raw=values,
                interpolated=gaps,
            )
        )
    return out


def standardize_by_year(series: TrendSeries, allow_partial: bool = False) -> TrendSeries:
    """Standardize raw volumes to z-scores within each calendar year.

    Each year uses its own mean and population standard deviation, so no
    year's statistics leak into another. A zero-variance year maps to all
    zeros and is flagged degenerate. Boundary years must be complete
    unless ``allow_partial`` is set, in which case partial years
    standardize over their available days.
    """
    first = series.dates[0].astype(object)
    last = series.dates[-1].astype(object)
    if not allow_partial:
        if first.month != 1 or first.day != 1 or last.month != 12 or last.day != 31:
            raise DataError(
                f"series {series.topic_id}/{series.geo} has a partial year at "
                f"the boundary ({first} .. {last}); pass allow_partial to "
                "standardize anyway"
            )

    years = series.years()
    standardized = np.empty_like(series.raw)
    degenerate: list[int] = []
    for year in np.unique(years):
        sel = years == year
        chunk = series.raw[sel]
        std = chunk.std()
        if std == 0:
            standardized[sel] = 0.0
            degenerate.append(int(year))
        else:
            standardized[sel] = (chunk - chunk.mean()) / std

    return TrendSeries(
        topic_id=series.topic_id,
        geo=series.geo,
        dates=series.dates,
        raw=series.raw,
        standardized=standardized,
        interpolated=series.interpolated.copy(),
        degenerate_years=degenerate,
    )

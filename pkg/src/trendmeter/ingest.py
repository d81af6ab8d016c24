"""Loading and validation of meter readings, building metadata, weather,
and day-type calendar files.

All CSV inputs are UTF-8 with a header row; timestamps are ISO-8601
"YYYY-MM-DD HH:MM:SS" in site-local naive time, dates are "YYYY-MM-DD".
After ingestion every hourly series is gap-free: missing hours exist as
rows with ``mask`` False, never as absent rows.
"""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError

WEATHER_FIELDS = (
    "air_temperature",
    "cloud_coverage",
    "dew_temperature",
    "precip_depth",
    "sea_level_pressure",
    "wind_speed",
    "wind_direction",
)

HOUR = np.timedelta64(1, "h")


class MeterType(str, enum.Enum):
    ELECTRICITY = "electricity"
    CHILLEDWATER = "chilledwater"
    STEAM = "steam"
    HOTWATER = "hotwater"


# Numeric meter codes follow the BDG2 / GEPIII convention.
METER_CODES = {
    "0": MeterType.ELECTRICITY,
    "1": MeterType.CHILLEDWATER,
    "2": MeterType.STEAM,
    "3": MeterType.HOTWATER,
}


def parse_meter_type(value) -> MeterType:
    key = str(value).strip()
    if key in METER_CODES:
        return METER_CODES[key]
    try:
        return MeterType(key.lower())
    except ValueError:
        raise DataError(f"unknown meter type: {value!r}") from None


class DayType(str, enum.Enum):
    REGULAR = "regular"
    PUBLIC_HOLIDAY = "public_holiday"
    SITE_SPECIFIC = "site_specific"


@dataclass
class MeterSeries:
    """One meter's hourly kWh readings on a contiguous hourly grid.

    ``mask`` marks valid hours; readings at invalid hours are NaN or
    whatever raw value was rejected. Valid readings are finite and >= 0.
    """

    meter_id: str
    building_id: str
    site_id: str
    meter_type: MeterType
    timestamps: np.ndarray  # datetime64[ns], strictly increasing, hourly
    readings: np.ndarray  # float64 kWh
    mask: np.ndarray  # bool, True = valid
    duplicate_warning_count: int = 0
    negative_reading_count: int = 0

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[ns]")
        self.readings = np.asarray(self.readings, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        n = len(self.timestamps)
        if len(self.readings) != n or len(self.mask) != n:
            raise DataError(f"{self.meter_id}: arrays must share one length")
        if n > 1:
            deltas = np.diff(self.timestamps)
            if not np.all(deltas == HOUR):
                raise DataError(
                    f"{self.meter_id}: timestamps must be strictly increasing "
                    "with hourly spacing"
                )
        valid = self.readings[self.mask]
        if valid.size and (not np.all(np.isfinite(valid)) or np.any(valid < 0)):
            raise DataError(
                f"{self.meter_id}: valid readings must be finite and >= 0"
            )

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def valid_hours(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class BuildingMeta:
    building_id: str
    site_id: str
    primary_use: str
    square_feet: float
    year_built: int | None = None
    floor_count: int | None = None


@dataclass
class WeatherSeries:
    """Per-site hourly weather on a contiguous grid; NaN marks missing.

    ``imputed`` flags hours filled by :func:`trendmeter.cleaning.impute_weather`.
    """

    site_id: str
    timestamps: np.ndarray
    values: dict[str, np.ndarray]  # field -> float64 (NaN = missing)
    imputed: dict[str, np.ndarray] = field(default_factory=dict)
    invalid_value_count: int = 0

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[ns]")
        for name in WEATHER_FIELDS:
            if name not in self.values:
                raise DataError(f"weather series missing field {name}")
            self.values[name] = np.asarray(self.values[name], dtype=np.float64)
            if len(self.values[name]) != len(self.timestamps):
                raise DataError(f"weather field {name} length mismatch")
        if not self.imputed:
            self.imputed = {
                name: np.zeros(len(self.timestamps), dtype=bool)
                for name in WEATHER_FIELDS
            }

    def present(self, name: str) -> np.ndarray:
        return ~np.isnan(self.values[name])


@dataclass
class DayTypeCalendar:
    """Total mapping (site_id, date) -> day type over the labeled range."""

    labels: dict[tuple[str, dt.date], DayType]

    def day_type(self, site_id: str, date: dt.date) -> DayType:
        try:
            return self.labels[(site_id, date)]
        except KeyError:
            raise DataError(
                f"unlabeled date for site {site_id}: {date.isoformat()}"
            ) from None

    def sites(self) -> list[str]:
        return sorted({site for site, _ in self.labels})

    def validate_range(
        self, site_ids, start: dt.date, end: dt.date
    ) -> None:
        """Check the calendar is total over [start, end] for each site."""
        for site in site_ids:
            day = start
            while day <= end:
                if (site, day) not in self.labels:
                    raise DataError(
                        f"day-type calendar missing {day.isoformat()} "
                        f"for site {site}"
                    )
                day += dt.timedelta(days=1)


@dataclass
class CleaningReport:
    meter_id: str
    removed_outlier_count: int
    removed_constant_run_count: int
    removed_hours: list
    rules_applied: list[str]


def _read_csv(path, required: tuple[str, ...]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"could not read {path}: {exc}") from exc
    missing = set(required) - set(frame.columns)
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")
    return frame


def _parse_timestamps(raw: pd.Series, path) -> pd.Series:
    parsed = pd.to_datetime(raw, format="%Y-%m-%d %H:%M:%S", errors="coerce")
    if parsed.isna().any():
        bad = raw[parsed.isna()].iloc[0]
        raise DataError(f"{path}: malformed timestamp {bad!r}")
    return parsed


def _parse_dates(raw: pd.Series, path) -> pd.Series:
    parsed = pd.to_datetime(raw, format="%Y-%m-%d", errors="coerce")
    if parsed.isna().any():
        bad = raw[parsed.isna()].iloc[0]
        raise DataError(f"{path}: malformed date {bad!r}")
    return parsed


def load_meter_readings(
    path,
    date_range: tuple[dt.datetime, dt.datetime] | None = None,
    site_map: dict[str, str] | None = None,
) -> list[MeterSeries]:
    """Load hourly meter readings into one series per (building, meter type).

    Columns: building_id, meter (0-3 or a type name), timestamp,
    meter_reading. Duplicate (meter, timestamp) rows resolve last-wins and
    are counted as warnings. Rows outside ``date_range`` are dropped.
    Negative readings are kept but masked invalid. Each series is
    reindexed onto the full hourly grid spanning its observations.
    """
    frame = _read_csv(path, ("building_id", "meter", "timestamp", "meter_reading"))
    if frame.empty:
        return []
    frame = frame.copy()
    frame["ts"] = _parse_timestamps(frame["timestamp"], path)
    frame["meter_type"] = frame["meter"].map(parse_meter_type)

    if date_range is not None:
        start, end = (pd.Timestamp(date_range[0]), pd.Timestamp(date_range[1]))
        frame = frame[(frame["ts"] >= start) & (frame["ts"] <= end)]

    readings = pd.to_numeric(frame["meter_reading"], errors="coerce")
    if readings.isna().any():
        bad = frame.loc[readings.isna(), "meter_reading"].iloc[0]
        raise DataError(f"{path}: unparseable meter_reading {bad!r}")
    frame["value"] = readings.astype(np.float64)

    series: list[MeterSeries] = []
    for (building, mtype), group in sorted(
        frame.groupby(["building_id", "meter_type"], sort=False),
        key=lambda kv: (kv[0][0], kv[0][1].value),
    ):
        group = group.sort_values("ts", kind="stable")
        dupes = int(group.duplicated(subset="ts").sum())
        group = group.drop_duplicates(subset="ts", keep="last")
        n_neg = int((group["value"] < 0).sum())

        grid = pd.date_range(group["ts"].iloc[0], group["ts"].iloc[-1], freq="h")
        values = (
            group.set_index("ts")["value"].reindex(grid).to_numpy(np.float64)
        )
        mask = ~np.isnan(values)
        mask &= ~(values < 0)

        meter_id = f"{building}_{mtype.value}"
        series.append(
            MeterSeries(
                meter_id=meter_id,
                building_id=str(building),
                site_id=(site_map or {}).get(str(building), ""),
                meter_type=mtype,
                timestamps=grid.to_numpy(),
                readings=values,
                mask=mask,
                duplicate_warning_count=dupes,
                negative_reading_count=n_neg,
            )
        )
    return series


def load_building_metadata(path) -> dict[str, BuildingMeta]:
    """Load building metadata keyed by building_id.

    Optional fields (year_built, floor_count) may be empty; square_feet
    must be > 0 and duplicate building ids are an error. Unknown
    primary_use categories are preserved verbatim.
    """
    frame = _read_csv(
        path,
        ("building_id", "site_id", "primary_use", "square_feet",
         "year_built", "floor_count"),
    )
    table: dict[str, BuildingMeta] = {}
    for row in frame.itertuples(index=False):
        building = str(row.building_id)
        if building in table:
            raise DataError(f"{path}: duplicate building_id {building!r}")
        try:
            sqft = float(row.square_feet)
        except ValueError:
            raise DataError(
                f"{path}: unparseable square_feet {row.square_feet!r} "
                f"for {building}"
            ) from None
        if not sqft > 0:
            raise DataError(f"{path}: square_feet must be > 0 for {building}")

        def _opt_int(raw):
            raw = str(raw).strip()
            if raw == "":
                return None
            try:
                return int(float(raw))
            except ValueError:
                raise DataError(
                    f"{path}: unparseable integer {raw!r} for {building}"
                ) from None

        table[building] = BuildingMeta(
            building_id=building,
            site_id=str(row.site_id),
            primary_use=str(row.primary_use),
            square_feet=sqft,
            year_built=_opt_int(row.year_built),
            floor_count=_opt_int(row.floor_count),
        )
    return table


def load_weather(path) -> dict[str, WeatherSeries]:
    """Load per-site hourly weather series with NaN-masked gaps.

    Unparseable numeric cells become missing with a warning count rather
    than silent zeros; wind_direction outside [0, 360] is masked invalid.
    """
    frame = _read_csv(path, ("site_id", "timestamp") + WEATHER_FIELDS)
    out: dict[str, WeatherSeries] = {}
    if frame.empty:
        return out
    frame = frame.copy()
    frame["ts"] = _parse_timestamps(frame["timestamp"], path)

    for site, group in frame.groupby("site_id", sort=True):
        group = group.sort_values("ts", kind="stable")
        group = group.drop_duplicates(subset="ts", keep="last")
        grid = pd.date_range(group["ts"].iloc[0], group["ts"].iloc[-1], freq="h")
        indexed = group.set_index("ts").reindex(grid)

        invalid = 0
        values = {}
        for name in WEATHER_FIELDS:
            raw = indexed[name]
            numeric = pd.to_numeric(raw, errors="coerce")
            # empty cells are expected gaps; non-empty non-numeric are warnings
            bad = numeric.isna() & raw.notna() & (raw.str.strip() != "")
            invalid += int(bad.sum())
            col = numeric.to_numpy(np.float64)
            if name == "wind_direction":
                out_of_range = (~np.isnan(col)) & ((col < 0) | (col > 360))
                invalid += int(out_of_range.sum())
                col[out_of_range] = np.nan
            values[name] = col

        out[str(site)] = WeatherSeries(
            site_id=str(site),
            timestamps=grid.to_numpy(),
            values=values,
            invalid_value_count=invalid,
        )
    return out


def load_daytype_calendar(
    path,
    date_range: tuple[dt.date, dt.date] | None = None,
    required_sites=None,
) -> DayTypeCalendar:
    """Load per-site day-type labels.

    Allowed day types: regular, public_holiday, site_specific. When
    ``date_range`` is given the calendar must be total over it for every
    required site (all labeled sites by default); a missing date is a
    load error naming the date.
    """
    frame = _read_csv(path, ("site_id", "date", "day_type"))
    labels: dict[tuple[str, dt.date], DayType] = {}
    allowed = ", ".join(t.value for t in DayType)
    dates = _parse_dates(frame["date"], path)
    for row, date in zip(frame.itertuples(index=False), dates):
        try:
            day_type = DayType(str(row.day_type).strip())
        except ValueError:
            raise DataError(
                f"{path}: unknown day_type {row.day_type!r} "
                f"(allowed: {allowed})"
            ) from None
        labels[(str(row.site_id), date.date())] = day_type

    calendar = DayTypeCalendar(labels)
    if date_range is not None:
        sites = required_sites if required_sites is not None else calendar.sites()
        calendar.validate_range(sites, date_range[0], date_range[1])
    return calendar


def load_site_geo(path) -> dict[str, str]:
    """Load the site -> ISO 3166-1 alpha-2 country map used for screening."""
    frame = _read_csv(path, ("site_id", "geo"))
    mapping: dict[str, str] = {}
    for row in frame.itertuples(index=False):
        site = str(row.site_id)
        geo = str(row.geo).strip().upper()
        if site in mapping:
            raise DataError(f"{path}: duplicate site_id {site!r}")
        if len(geo) != 2 or not geo.isalpha():
            raise DataError(f"{path}: invalid country code {row.geo!r}")
        mapping[site] = geo
    return mapping

"""Hourly feature matrices: the 11-feature baseline and the proposed
baseline-plus-trend variant, with log1p-transformed targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError
from .ingest import BuildingMeta, MeterSeries, WeatherSeries
from .screening import ScreeningResult
from .trends import TrendSeries


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # "numeric" | "categorical"
    source: str  # "meta" | "weather" | "temporal" | "trend"


BASELINE_FEATURES = (
    FeatureSpec("building_id", "categorical", "meta"),
    FeatureSpec("meter_type", "categorical", "meta"),
    FeatureSpec("primary_use", "categorical", "meta"),
    FeatureSpec("log10_square_feet", "numeric", "meta"),
    FeatureSpec("year_built", "numeric", "meta"),
    FeatureSpec("air_temperature", "numeric", "weather"),
    FeatureSpec("dew_temperature", "numeric", "weather"),
    FeatureSpec("cloud_coverage", "numeric", "weather"),
    FeatureSpec("precip_depth", "numeric", "weather"),
    FeatureSpec("hour_of_day", "numeric", "temporal"),
    FeatureSpec("day_of_week", "numeric", "temporal"),
)

TREND_FEATURE = FeatureSpec("trend_value", "numeric", "trend")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def width(self) -> int:
        return len(self.features)

    @property
    def categorical_indices(self) -> tuple[int, ...]:
        return tuple(
            i for i, f in enumerate(self.features) if f.kind == "categorical"
        )

    def to_dict(self) -> list[dict]:
        return [
            {"name": f.name, "kind": f.kind, "source": f.source}
            for f in self.features
        ]

    @classmethod
    def from_dict(cls, specs: list[dict]) -> "FeatureSchema":
        return cls(tuple(FeatureSpec(**s) for s in specs))


def baseline_schema() -> FeatureSchema:
    return FeatureSchema(BASELINE_FEATURES)


def proposed_schema() -> FeatureSchema:
    return FeatureSchema(BASELINE_FEATURES + (TREND_FEATURE,))


@dataclass
class FeatureMatrix:
    """Rows are (meter, hour) pairs ordered by meter_id then timestamp.

    Before encoding, categorical columns hold strings and numeric
    columns float64 with NaN as the missing marker. ``to_array`` is only
    available once categoricals are integer-coded.
    """

    schema: FeatureSchema
    columns: dict[str, np.ndarray]
    meter_ids: np.ndarray
    timestamps: np.ndarray
    encoded: bool = False

    def __len__(self) -> int:
        return len(self.meter_ids)

    def to_array(self) -> np.ndarray:
        if not self.encoded:
            raise DataError("encode categoricals before densifying")
        out = np.empty((len(self), self.schema.width), dtype=np.float64)
        for i, name in enumerate(self.schema.names):
            out[:, i] = self.columns[name].astype(np.float64)
        return out


@dataclass
class CategoricalDictionary:
    """Stable string -> integer code maps, one per categorical column.

    Codes follow first appearance in the fitted matrix; the reserved
    unknown code for a column equals its category count.
    """

    mappings: dict[str, dict[str, int]] = field(default_factory=dict)

    def fit_column(self, name: str, values: np.ndarray) -> None:
        mapping: dict[str, int] = {}
        for value in values:
            if value not in mapping:
                mapping[value] = len(mapping)
        self.mappings[name] = mapping

    def unknown_code(self, name: str) -> int:
        return len(self.mappings[name])

    def encode_column(self, name: str, values: np.ndarray) -> np.ndarray:
        mapping = self.mappings[name]
        unknown = self.unknown_code(name)
        return np.array(
            [mapping.get(v, unknown) for v in values], dtype=np.float64
        )

    def decode_column(self, name: str, codes: np.ndarray) -> np.ndarray:
        reverse = {code: value for value, code in self.mappings[name].items()}
        return np.array(
            [reverse.get(int(c), "<unknown>") for c in codes], dtype=object
        )

    def to_dict(self) -> dict:
        return {name: dict(mapping) for name, mapping in self.mappings.items()}

    @classmethod
    def from_dict(cls, raw: dict) -> "CategoricalDictionary":
        return cls({name: dict(mapping) for name, mapping in raw.items()})


def encode_categoricals(
    matrix: FeatureMatrix, dictionary: CategoricalDictionary | None = None
) -> tuple[FeatureMatrix, CategoricalDictionary]:
    """Replace categorical strings with stable integer codes.

    Without a dictionary (training) codes are assigned by first
    appearance; with one (prediction) unseen categories map to the
    reserved unknown code.
    """
    fitting = dictionary is None
    if fitting:
        dictionary = CategoricalDictionary()
    columns = dict(matrix.columns)
    for idx in matrix.schema.categorical_indices:
        name = matrix.schema.features[idx].name
        values = matrix.columns[name]
        if fitting:
            dictionary.fit_column(name, values)
        elif name not in dictionary.mappings:
            raise DataError(f"dictionary has no mapping for column {name}")
        columns[name] = dictionary.encode_column(name, values)
    encoded = FeatureMatrix(
        schema=matrix.schema,
        columns=columns,
        meter_ids=matrix.meter_ids,
        timestamps=matrix.timestamps,
        encoded=True,
    )
    return encoded, dictionary


def _weather_at(weather: WeatherSeries, name: str, ts: np.ndarray) -> np.ndarray:
    offsets = ((ts - weather.timestamps[0]) / np.timedelta64(1, "h")).astype(int)
    values = np.full(len(ts), np.nan)
    inside = (offsets >= 0) & (offsets < len(weather.timestamps))
    values[inside] = weather.values[name][offsets[inside]]
    return values


def build_feature_matrix(
    meters: list[MeterSeries],
    metadata: dict[str, BuildingMeta],
    weather: dict[str, WeatherSeries],
    trends: list[TrendSeries],
    screening: dict[str, ScreeningResult] | None,
    mode: str,
    year: int,
) -> tuple[FeatureMatrix, np.ndarray]:
    """Assemble the hourly design matrix and log1p target for one year.

    One row per valid cleaned hour of each meter inside the calendar
    year. Proposed mode appends the meter's best-fit topic value for the
    row's local date, broadcast over the day's 24 hours; every included
    meter must then have a screening result. Weather joins on
    (site_id, timestamp) and missing cells stay NaN for the learner's
    native missing handling.
    """
    if mode not in ("baseline", "proposed"):
        raise DataError(f"unknown feature mode {mode!r}")
    schema = proposed_schema() if mode == "proposed" else baseline_schema()

    trend_index = {(t.topic_id, t.geo): t for t in trends}
    parts: list[dict[str, np.ndarray]] = []
    meter_id_parts: list[np.ndarray] = []
    ts_parts: list[np.ndarray] = []
    y_parts: list[np.ndarray] = []

    for meter in sorted(meters, key=lambda m: m.meter_id):
        if meter.building_id not in metadata:
            raise DataError(f"{meter.meter_id}: no metadata for building "
                            f"{meter.building_id}")
        meta = metadata[meter.building_id]

        ts_all = pd.DatetimeIndex(meter.timestamps)
        keep = meter.mask & np.asarray(ts_all.year == year)
        if not keep.any():
            continue
        ts = meter.timestamps[keep]
        ts_index = ts_all[keep]
        n = len(ts)

        column_data: dict[str, np.ndarray] = {
            "building_id": np.full(n, meter.building_id, dtype=object),
            "meter_type": np.full(n, meter.meter_type.value, dtype=object),
            "primary_use": np.full(n, meta.primary_use, dtype=object),
            "log10_square_feet": np.full(n, np.log10(meta.square_feet)),
            "year_built": np.full(
                n,
                float(meta.year_built) if meta.year_built is not None else np.nan,
            ),
            "hour_of_day": ts_index.hour.to_numpy(np.float64),
            "day_of_week": ts_index.dayofweek.to_numpy(np.float64),
        }

        site_weather = weather.get(meter.site_id)
        for name in ("air_temperature", "dew_temperature", "cloud_coverage",
                     "precip_depth"):
            if site_weather is None:
                column_data[name] = np.full(n, np.nan)
            else:
                column_data[name] = _weather_at(site_weather, name, ts)

        if mode == "proposed":
            if screening is None or meter.meter_id not in screening:
                raise DataError(
                    f"{meter.meter_id}: proposed mode needs a screening result"
                )
            result = screening[meter.meter_id]
            key = (result.best_topic_id, result.geo)
            if key not in trend_index:
                raise DataError(
                    f"{meter.meter_id}: no trend series for topic "
                    f"{key[0]!r} in {key[1]!r}"
                )
            dates = ts.astype("datetime64[D]")
            column_data["trend_value"] = trend_index[key].values_on(dates)

        parts.append(column_data)
        meter_id_parts.append(np.full(n, meter.meter_id, dtype=object))
        ts_parts.append(ts)
        y_parts.append(np.log1p(meter.readings[keep]))

    if not parts:
        raise DataError(f"no valid hours found for year {year}")

    columns = {
        name: np.concatenate([p[name] for p in parts])
        for name in schema.names
    }
    matrix = FeatureMatrix(
        schema=schema,
        columns=columns,
        meter_ids=np.concatenate(meter_id_parts),
        timestamps=np.concatenate(ts_parts),
    )
    return matrix, np.concatenate(y_parts)

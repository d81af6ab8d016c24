"""CSV serialization of intermediate pipeline artifacts.

Cleaned meters and imputed weather round-trip exactly (values, masks,
and flags), so downstream stages can reload a cached stage's output
instead of recomputing it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .calendar_signal import CalendarSignal
from .errors import DataError, MissingArtifactError
from .ingest import WEATHER_FIELDS, MeterSeries, WeatherSeries, parse_meter_type

_TS_FORMAT = "%Y-%m-%d %H:%M:%S"


def save_meters(meters: list[MeterSeries], path) -> None:
    frames = []
    for m in sorted(meters, key=lambda s: s.meter_id):
        frames.append(
            pd.DataFrame(
                {
                    "building_id": m.building_id,
                    "site_id": m.site_id,
                    "meter": m.meter_type.value,
                    "timestamp": pd.DatetimeIndex(m.timestamps).strftime(
                        _TS_FORMAT
                    ),
                    "meter_reading": [repr(float(v)) for v in m.readings],
                    "valid": m.mask.astype(int),
                }
            )
        )
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)


def load_meters(path) -> list[MeterSeries]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"meters artifact not found: {path}")
    frame = pd.read_csv(
        path, dtype={"building_id": str, "site_id": str},
        float_precision="round_trip",
    )
    out = []
    for (building, meter), group in frame.groupby(
        ["building_id", "meter"], sort=True
    ):
        mtype = parse_meter_type(meter)
        out.append(
            MeterSeries(
                meter_id=f"{building}_{mtype.value}",
                building_id=str(building),
                site_id=str(group["site_id"].iloc[0]),
                meter_type=mtype,
                timestamps=pd.to_datetime(
                    group["timestamp"], format=_TS_FORMAT
                ).to_numpy(),
                readings=group["meter_reading"].to_numpy(np.float64),
                mask=group["valid"].to_numpy(bool),
            )
        )
    return out


def save_weather(weather: dict[str, WeatherSeries], path) -> None:
    frames = []
    for site in sorted(weather):
        w = weather[site]
        data = {
            "site_id": site,
            "timestamp": pd.DatetimeIndex(w.timestamps).strftime(_TS_FORMAT),
        }
        for name in WEATHER_FIELDS:
            data[name] = [
                "" if np.isnan(v) else repr(float(v)) for v in w.values[name]
            ]
            data[f"{name}_imputed"] = w.imputed[name].astype(int)
        frames.append(pd.DataFrame(data))
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)


def load_weather_artifact(path) -> dict[str, WeatherSeries]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"weather artifact not found: {path}")
    frame = pd.read_csv(path, dtype={"site_id": str}, float_precision="round_trip")
    out = {}
    for site, group in frame.groupby("site_id", sort=True):
        values = {}
        imputed = {}
        for name in WEATHER_FIELDS:
            values[name] = group[name].to_numpy(np.float64)
            imputed[name] = group[f"{name}_imputed"].to_numpy(bool)
        out[str(site)] = WeatherSeries(
            site_id=str(site),
            timestamps=pd.to_datetime(
                group["timestamp"], format=_TS_FORMAT
            ).to_numpy(),
            values=values,
            imputed=imputed,
        )
    return out


def save_signals(signals: dict[str, CalendarSignal], path) -> None:
    rows = []
    for meter_id in sorted(signals):
        s = signals[meter_id]
        for date, score, usable in zip(s.dates, s.scores, s.day_mask):
            if usable:
                rows.append(
                    {
                        "meter_id": meter_id,
                        "date": str(date),
                        "score": repr(float(score)),
                        "method": s.method,
                    }
                )
    pd.DataFrame(rows, columns=["meter_id", "date", "score", "method"]).to_csv(
        path, index=False
    )


def load_signals(path, year: int) -> dict[str, CalendarSignal]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"calendar signals artifact not found: {path}")
    frame = pd.read_csv(
        path, dtype={"meter_id": str, "method": str},
        float_precision="round_trip",
    )
    if frame.empty:
        raise DataError(f"{path}: no calendar signals")
    start = np.datetime64(f"{year}-01-01", "D")
    end = np.datetime64(f"{year + 1}-01-01", "D")
    dates = np.arange(start, end)
    out = {}
    for meter_id, group in frame.groupby("meter_id", sort=True):
        scores = np.full(len(dates), np.nan)
        mask = np.zeros(len(dates), dtype=bool)
        idx = (
            group["date"].to_numpy(dtype="datetime64[D]") - start
        ).astype(int)
        keep = (idx >= 0) & (idx < len(dates))
        scores[idx[keep]] = group["score"].to_numpy(np.float64)[keep]
        mask[idx[keep]] = True
        out[str(meter_id)] = CalendarSignal(
            meter_id=str(meter_id),
            year=year,
            dates=dates,
            scores=scores,
            day_mask=mask,
            method=str(group["method"].iloc[0]),
        )
    return out

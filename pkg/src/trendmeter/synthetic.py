"""Deterministic synthetic corpus for end-to-end runs and acceptance checks.

Ten electricity meters across two sites (one US, one GB) whose holiday
and break-period dips are driven by a single planted search topic among
eight decoy topics. The occupancy pattern on regular days is a pure
day-of-week function, so a model without the trend feature can already
predict those days; only holidays and site-specific breaks carry signal
the baseline cannot see.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np
import pandas as pd

PLANTED_TOPIC = "education"
DECOY_TOPICS = (
    ("retail", "Retail", "building_type"),
    ("parking", "Parking", "building_type"),
    ("warehouse", "Warehouse", "building_type"),
    ("science", "Science", "building_type"),
    ("storage", "Storage", "building_type"),
    ("utility", "Utility", "building_type"),
    ("gmail", "Gmail", "productivity_tool"),
    ("career", "Career", "building_type"),
)

def _site_holidays(site: str, year: int) -> list[dt.date]:
    """Ten public holidays per site-year, scattered across weekdays.

    Scattering matters: if holidays all fell on one weekday, their deep
    dips would contaminate that weekday's regular-day predictions for
    any model lacking a holiday feature, muddying the comparison.
    """
    dow_offset = 0 if site == "s0" else 2
    shift = 0 if year % 2 == 0 else 3
    out = []
    for k in range(10):
        day = dt.date(year, 1, 1) + dt.timedelta(days=(k * 36 + 2 + shift) % 358)
        want = (k * 3 + dow_offset) % 7
        while day.weekday() != want:
            day += dt.timedelta(days=1)
        out.append(day)
    return out

_BREAKS = {
    ("s0", 2016): [("03-12", "03-20"), ("07-08", "07-28"), ("12-20", "12-31")],
    ("s0", 2017): [("03-11", "03-19"), ("07-07", "07-27"), ("12-19", "12-31")],
    ("s1", 2016): [("01-01", "01-05"), ("04-01", "04-09"), ("08-05", "08-25"),
                   ("12-22", "12-31")],
    ("s1", 2017): [("01-01", "01-04"), ("03-31", "04-08"), ("08-04", "08-24"),
                   ("12-21", "12-31")],
}

SITES = {"s0": "US", "s1": "GB"}


def _dates_between(start: str, end: str, year: int) -> list[dt.date]:
    first = dt.date.fromisoformat(f"{year}-{start}")
    last = dt.date.fromisoformat(f"{year}-{end}")
    return [
        first + dt.timedelta(days=i) for i in range((last - first).days + 1)
    ]


def _site_day_types(site: str, years) -> dict[dt.date, str]:
    labels: dict[dt.date, str] = {}
    for year in years:
        day = dt.date(year, 1, 1)
        while day.year == year:
            labels[day] = "regular"
            day += dt.timedelta(days=1)
        for start, end in _BREAKS[(site, year)]:
            for day in _dates_between(start, end, year):
                labels[day] = "site_specific"
        for day in _site_holidays(site, year):
            labels[day] = "public_holiday"
    return labels


def _occupancy(day: dt.date, day_type: str) -> float:
    """Deep dips on holidays, shallow ones during breaks, and a pure
    day-of-week pattern otherwise."""
    dow = day.weekday()
    if dow == 5:
        weekday_level = 0.35
    elif dow == 6:
        weekday_level = 0.25
    else:
        weekday_level = 1.0
    if day_type == "public_holiday":
        return 0.40 * weekday_level
    if day_type == "site_specific":
        # breaks thin out weekday activity; weekends already idle
        return weekday_level if dow >= 5 else 0.62
    return weekday_level


def _site_temperature(rng, hours: pd.DatetimeIndex, mean: float) -> np.ndarray:
    doy = hours.dayofyear.to_numpy()
    hod = hours.hour.to_numpy()
    annual = 9.0 * np.sin(2 * np.pi * (doy - 110) / 365.25)
    diurnal = 5.5 * np.sin(2 * np.pi * (hod - 15) / 24.0)
    return mean + annual + diurnal + rng.normal(0.0, 0.6, len(hours))


def _poke_gaps(rng, columns: dict[str, np.ndarray], n_gaps: int) -> None:
    n = len(next(iter(columns.values())))
    for name, col in columns.items():
        starts = rng.integers(24, n - 24, size=n_gaps)
        lengths = rng.integers(1, 3, size=n_gaps)
        for start, length in zip(starts, lengths):
            col[start:start + length] = np.nan


def generate_corpus(out_dir, seed: int = 42, years=(2016, 2017)) -> dict[str, Path]:
    """Write the full synthetic input set and a ready-to-run config.

    Returns the mapping of logical names to file paths. Everything is a
    pure function of the seed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    day_types = {site: _site_day_types(site, years) for site in SITES}
    occupancy = {
        site: {day: _occupancy(day, label) for day, label in labels.items()}
        for site, labels in day_types.items()
    }

    # day-type calendar
    cal_rows = []
    for site in sorted(SITES):
        for day in sorted(day_types[site]):
            cal_rows.append(
                {"site_id": site, "date": day.isoformat(),
                 "day_type": day_types[site][day]}
            )
    daytypes_path = out_dir / "daytypes.csv"
    pd.DataFrame(cal_rows).to_csv(daytypes_path, index=False)

    # site -> country map
    geo_path = out_dir / "site_geo.csv"
    pd.DataFrame(
        [{"site_id": s, "geo": g} for s, g in sorted(SITES.items())]
    ).to_csv(geo_path, index=False)

    # topic catalog: the planted topic plus eight decoys
    topics = [(PLANTED_TOPIC, "Education", "building_type")] + list(DECOY_TOPICS)
    topics_path = out_dir / "topics.csv"
    pd.DataFrame(
        topics, columns=["topic_id", "display_name", "category"]
    ).to_csv(topics_path, index=False)

    # trend series per (topic, geo)
    all_days = sorted(day_types["s0"])
    trend_rows = []
    for site, geo in sorted(SITES.items()):
        occ = np.array([occupancy[site][d] for d in all_days])
        planted = 12.0 + 80.0 * occ + rng.normal(0.0, 1.2, len(all_days))
        planted = np.clip(np.rint(planted), 0, 100)
        series_by_topic = {PLANTED_TOPIC: planted}
        for topic_id, _, _ in DECOY_TOPICS:
            walk = np.cumsum(rng.normal(0.0, 3.0, len(all_days))) + 50.0
            lo, hi = walk.min(), walk.max()
            scaled = 5.0 + 90.0 * (walk - lo) / max(hi - lo, 1e-9)
            series_by_topic[topic_id] = np.clip(np.rint(scaled), 0, 100)
        for topic_id, values in series_by_topic.items():
            for day, value in zip(all_days, values):
                trend_rows.append(
                    {"topic_id": topic_id, "geo": geo,
                     "date": day.isoformat(), "volume": int(value)}
                )
    trends_path = out_dir / "trends.csv"
    pd.DataFrame(trend_rows).to_csv(trends_path, index=False)

    # weather per site, with a few short gaps to exercise imputation
    start = pd.Timestamp(f"{years[0]}-01-01 00:00:00")
    end = pd.Timestamp(f"{years[-1]}-12-31 23:00:00")
    hours = pd.date_range(start, end, freq="h")
    weather_frames = []
    site_temps: dict[str, np.ndarray] = {}
    for site, mean_temp in (("s0", 13.0), ("s1", 9.5)):
        temp = _site_temperature(rng, hours, mean_temp)
        site_temps[site] = temp.copy()  # _poke_gaps mutates `temp` below
        dew = temp - (4.0 + np.abs(rng.normal(0.0, 1.5, len(hours))))
        doy = hours.dayofyear.to_numpy()
        cloud = np.clip(
            np.rint(4.0 + 2.5 * np.sin(2 * np.pi * doy / 91)
                    + rng.normal(0.0, 2.0, len(hours))),
            0, 8,
        ).astype(float)
        precip = np.maximum(0.0, rng.normal(-2.0, 4.0, len(hours)))
        pressure = 1013.0 + rng.normal(0.0, 6.0, len(hours))
        wind = np.abs(rng.normal(4.0, 2.5, len(hours)))
        direction = rng.uniform(0.0, 360.0, len(hours))
        columns = {
            "air_temperature": temp,
            "cloud_coverage": cloud,
            "dew_temperature": dew,
            "precip_depth": precip,
            "sea_level_pressure": pressure,
            "wind_speed": wind,
            "wind_direction": direction,
        }
        _poke_gaps(rng, columns, n_gaps=15)
        frame = pd.DataFrame(columns)
        frame.insert(0, "timestamp", hours.strftime("%Y-%m-%d %H:%M:%S"))
        frame.insert(0, "site_id", site)
        weather_frames.append(frame)
    weather_path = out_dir / "weather.csv"
    pd.concat(weather_frames, ignore_index=True).to_csv(
        weather_path, index=False, float_format="%.3f"
    )

    # buildings: six on s0 (education), four on s1 (office)
    buildings = []
    for i in range(10):
        site = "s0" if i < 6 else "s1"
        buildings.append(
            {
                "building_id": f"b{i:02d}",
                "site_id": site,
                "primary_use": "Education" if site == "s0" else "Office",
                "square_feet": int(rng.integers(20_000, 300_000)),
                "year_built": ""
                if i == 7
                else int(rng.integers(1960, 2012)),
                "floor_count": int(rng.integers(1, 11)),
            }
        )
    metadata_path = out_dir / "metadata.csv"
    pd.DataFrame(buildings).to_csv(metadata_path, index=False)

    # hourly electricity readings driven by occupancy, profile, weather;
    # the profile shape is shared so day-of-week structure stays learnable
    # from temporal features alone, leaving holidays and breaks as the
    # only signal the planted topic adds
    hour_dates = hours.date
    hod = hours.hour.to_numpy()
    profile = 0.12 + 0.88 * np.exp(-0.5 * ((hod - 13.5) / 3.8) ** 2)
    meter_frames = []
    for i, building in enumerate(buildings):
        site = building["site_id"]
        base = float(rng.uniform(4.0, 8.0))
        amp = float(rng.uniform(22.0, 45.0))
        cool = float(rng.uniform(0.08, 0.20))
        occ_by_day = occupancy[site]
        occ = np.array([occ_by_day[d] for d in hour_dates])
        temp = site_temps[site]
        signal = (
            base
            + amp * occ * profile
            + cool * np.maximum(temp - 22.0, 0.0)
        )
        # multiplicative noise keeps regular days noise-dominated for any
        # model, so only the day types the baseline cannot see move the
        # error comparison
        load = signal * np.exp(rng.normal(0.0, 0.32, len(hours)))
        load = np.maximum(load, 0.01)

        # a few implausible spikes and one days-long constant stretch,
        # for the cleaning stage to find
        if i == 2:
            spikes = rng.integers(0, len(hours), size=4)
            load[spikes] *= 1.0e4
        if i == 5:
            start_idx = 4000
            load[start_idx:start_idx + 60] = load[start_idx]

        meter_frames.append(
            pd.DataFrame(
                {
                    "building_id": building["building_id"],
                    "meter": 0,
                    "timestamp": hours.strftime("%Y-%m-%d %H:%M:%S"),
                    "meter_reading": np.round(load, 4),
                }
            )
        )
    meters_path = out_dir / "meters.csv"
    pd.concat(meter_frames, ignore_index=True).to_csv(meters_path, index=False)

    config_path = out_dir / "config.yaml"
    config_path.write_text(
        "\n".join(
            [
                "data:",
                "  meters: meters.csv",
                "  metadata: metadata.csv",
                "  weather: weather.csv",
                "  trends: trends.csv",
                "  topic_catalog: topics.csv",
                "  daytype_calendar: daytypes.csv",
                "  site_geo: site_geo.csv",
                "years:",
                f"  training: {years[0]}",
                f"  validation: {years[-1]}",
                "model:",
                "  n_trees: 200",
                "  learning_rate: 0.08",
                "  max_leaves: 31",
                "  min_samples_leaf: 20",
                "  feature_fraction: 0.9",
                "  row_fraction: 0.9",
                "  n_bins: 127",
                "  seed: 7",
                "  n_folds: 3",
                "run:",
                "  mode: both",
                "  out_dir: runs/synthetic",
                "",
            ]
        ),
        encoding="utf-8",
    )

    return {
        "meters": meters_path,
        "metadata": metadata_path,
        "weather": weather_path,
        "trends": trends_path,
        "topic_catalog": topics_path,
        "daytype_calendar": daytypes_path,
        "site_geo": geo_path,
        "config": config_path,
    }

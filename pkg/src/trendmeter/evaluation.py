"""RMSLE scoring, day-type segmentation, change rates, and report files.

Records enter as pandas frames with one row per (meter, hour):
meter_id, timestamp, site_id, geo, meter_type, category, topic_id,
actual, predicted. Baseline and proposed runs must cover identical row
sets; comparisons are always paired.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError
from .ingest import DayType, DayTypeCalendar

TIER_LABELS = ("Top 5", "Gold", "Silver", "Bronze")
DAY_TYPE_ORDER = (DayType.REGULAR, DayType.PUBLIC_HOLIDAY, DayType.SITE_SPECIFIC)

RECORD_COLUMNS = (
    "meter_id",
    "timestamp",
    "site_id",
    "geo",
    "meter_type",
    "category",
    "topic_id",
    "actual",
    "predicted",
)


def rmsle(predicted, actual) -> float:
    """Root mean squared logarithmic error with natural logs.

    sqrt(mean((ln(p + 1) - ln(a + 1))^2)); inputs must be non-negative,
    finite, equal-length, and non-empty.
    """
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise DataError("rmsle inputs must have equal length")
    if p.size == 0:
        raise DataError("rmsle of empty input is undefined")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise DataError("rmsle inputs must be finite")
    if np.any(p < 0) or np.any(a < 0):
        raise DataError("rmsle inputs must be non-negative")
    diff = np.log1p(p) - np.log1p(a)
    return float(np.sqrt(np.mean(diff * diff)))


def segment_by_daytype(
    records: pd.DataFrame, calendar: DayTypeCalendar
) -> dict[DayType, float]:
    """RMSLE per day type; empty segments are absent, never zero.

    Every record's (site, date) must be labeled in the calendar.
    """
    dates = pd.DatetimeIndex(records["timestamp"]).date
    labels = [
        calendar.day_type(site, date)
        for site, date in zip(records["site_id"], dates)
    ]
    label_arr = np.array([d.value for d in labels], dtype=object)
    out: dict[DayType, float] = {}
    for day_type in DAY_TYPE_ORDER:
        sel = label_arr == day_type.value
        if sel.any():
            out[day_type] = rmsle(
                records["predicted"].to_numpy()[sel],
                records["actual"].to_numpy()[sel],
            )
    return out


def change_rate(baseline_rmsle: float, proposed_rmsle: float) -> float:
    """Percent change of error, computed on unrounded scores."""
    if baseline_rmsle <= 0:
        raise DataError("change rate needs a positive baseline score")
    return 100.0 * (proposed_rmsle - baseline_rmsle) / baseline_rmsle


@dataclass(frozen=True)
class BenchmarkTable:
    """Average RMSLE per competition tier, per correlation category."""

    rows: dict[str, tuple[float, float, float, float]]

    def __post_init__(self):
        for category, tiers in self.rows.items():
            if len(tiers) != len(TIER_LABELS):
                raise DataError(f"benchmark row {category} needs 4 tiers")
            if not all(a < b for a, b in zip(tiers, tiers[1:])):
                raise DataError(
                    f"benchmark tiers for {category} must strictly increase"
                )


def default_benchmark_table() -> BenchmarkTable:
    ref = resources.files("trendmeter.data").joinpath("gepiii_benchmark.csv")
    with resources.as_file(ref) as path:
        frame = pd.read_csv(path)
    rows = {
        str(r.category): (
            float(r.top_5), float(r.gold), float(r.silver), float(r.bronze)
        )
        for r in frame.itertuples(index=False)
    }
    return BenchmarkTable(rows)


def benchmark_tier(
    score: float, category: str, table: BenchmarkTable
) -> str:
    """Smallest tier whose average RMSLE is >= the score; else no medal."""
    if category not in table.rows:
        raise DataError(f"no benchmark row for category {category!r}")
    for label, average in zip(TIER_LABELS, table.rows[category]):
        if average >= score:
            return label
    return "no medal"


def _check_paired(baseline: pd.DataFrame, proposed: pd.DataFrame) -> None:
    left = set(zip(baseline["meter_id"], baseline["timestamp"]))
    right = set(zip(proposed["meter_id"], proposed["timestamp"]))
    if left != right:
        raise DataError(
            "baseline and proposed runs cover different row sets; "
            f"baseline {len(left)} rows vs proposed {len(right)} rows, "
            f"{len(left ^ right)} rows differ"
        )


def _sorted_records(frame: pd.DataFrame) -> pd.DataFrame:
    missing = set(RECORD_COLUMNS) - set(frame.columns)
    if missing:
        raise DataError(f"prediction records missing columns {sorted(missing)}")
    return frame.sort_values(
        ["meter_id", "timestamp"], kind="stable"
    ).reset_index(drop=True)


def _daytype_labels(frame: pd.DataFrame, calendar: DayTypeCalendar) -> np.ndarray:
    dates = pd.DatetimeIndex(frame["timestamp"]).date
    return np.array(
        [
            calendar.day_type(site, date).value
            for site, date in zip(frame["site_id"], dates)
        ],
        dtype=object,
    )


def _segment_scores(base_grp, prop_grp, day_labels):
    """Per-day-type and total (baseline, proposed, change) for one group."""
    cells = {}
    for day_type in DAY_TYPE_ORDER:
        sel = day_labels == day_type.value
        if sel.any():
            b = rmsle(base_grp["predicted"].to_numpy()[sel],
                      base_grp["actual"].to_numpy()[sel])
            p = rmsle(prop_grp["predicted"].to_numpy()[sel],
                      prop_grp["actual"].to_numpy()[sel])
            cells[day_type.value] = (b, p, change_rate(b, p))
    b = rmsle(base_grp["predicted"], base_grp["actual"])
    p = rmsle(prop_grp["predicted"], prop_grp["actual"])
    cells["total"] = (b, p, change_rate(b, p))
    return cells


def _fmt(value, pattern="{:.6f}"):
    return pattern.format(value)


def _group_table(baseline, proposed, day_labels, keys, min_meters):
    """Rows of (group keys, RMSLE pair, per-day-type change rates, count)."""
    rows = []
    grouped = baseline.groupby(keys, sort=True).indices
    for key in sorted(grouped):
        idx = grouped[key]
        base_grp = baseline.iloc[idx]
        prop_grp = proposed.iloc[idx]
        labels = day_labels[idx]
        n_meters = base_grp["meter_id"].nunique()
        cells = _segment_scores(base_grp, prop_grp, labels)
        suppress = n_meters < min_meters
        row = dict(zip(keys, key if isinstance(key, tuple) else (key,)))
        row["baseline_rmsle"] = _fmt(cells["total"][0])
        row["proposed_rmsle"] = _fmt(cells["total"][1])
        for day_type in DAY_TYPE_ORDER:
            name = f"change_{day_type.value}_pct"
            if suppress or day_type.value not in cells:
                row[name] = "-"
            else:
                row[name] = _fmt(cells[day_type.value][2], "{:+.1f}")
        row["change_total_pct"] = (
            "-" if suppress else _fmt(cells["total"][2], "{:+.1f}")
        )
        row["meter_count"] = n_meters
        rows.append(row)
    return rows


def _weekly_series(baseline, proposed, day_labels):
    """Pooled weekly RMSLE per correlation category and overall."""
    iso = pd.DatetimeIndex(baseline["timestamp"]).isocalendar()
    week_key = [
        f"{y}-W{w:02d}" for y, w in zip(iso["year"], iso["week"])
    ]
    frame = pd.DataFrame(
        {
            "week": week_key,
            "category": baseline["category"].to_numpy(),
            "actual": baseline["actual"].to_numpy(),
            "base_pred": baseline["predicted"].to_numpy(),
            "prop_pred": proposed["predicted"].to_numpy(),
        }
    )
    all_weeks = sorted(set(week_key))
    categories = ["all"] + sorted(frame["category"].unique())
    rows = []
    for week in all_weeks:
        in_week = frame[frame["week"] == week]
        row = {"week": week}
        for category in categories:
            sub = in_week if category == "all" else in_week[
                in_week["category"] == category
            ]
            if len(sub):
                row[f"baseline_{category}"] = _fmt(
                    rmsle(sub["base_pred"], sub["actual"])
                )
                row[f"proposed_{category}"] = _fmt(
                    rmsle(sub["prop_pred"], sub["actual"])
                )
            else:
                row[f"baseline_{category}"] = ""
                row[f"proposed_{category}"] = ""
        rows.append(row)
    return rows, categories


def emit_report(
    baseline: pd.DataFrame,
    proposed: pd.DataFrame,
    calendar: DayTypeCalendar,
    out_dir,
    benchmark: BenchmarkTable | None = None,
    min_meters: int = 3,
) -> dict:
    """Write the comparison report files and return the summary dict.

    Files: report.json, error_by_metertype.csv, error_by_topic.csv,
    benchmark.csv, weekly_rmsle.csv. Change-rate cells for groups with
    fewer than ``min_meters`` meters print as "-". Raises when the two
    runs cover different row sets.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    benchmark = benchmark or default_benchmark_table()

    baseline = _sorted_records(baseline)
    proposed = _sorted_records(proposed)
    _check_paired(baseline, proposed)
    day_labels = _daytype_labels(baseline, calendar)

    overall = _segment_scores(baseline, proposed, day_labels)

    type_rows = _group_table(
        baseline, proposed, day_labels, ["meter_type", "category"], min_meters
    )
    pd.DataFrame(type_rows).to_csv(
        out_dir / "error_by_metertype.csv", index=False
    )

    topic_source = proposed if proposed["topic_id"].astype(bool).any() else baseline
    baseline_t = baseline.assign(topic_id=topic_source["topic_id"])
    proposed_t = proposed.assign(topic_id=topic_source["topic_id"])
    has_topic = baseline_t["topic_id"].astype(bool).to_numpy()
    topic_rows = []
    if has_topic.any():
        topic_rows = _group_table(
            baseline_t[has_topic].reset_index(drop=True),
            proposed_t[has_topic].reset_index(drop=True),
            day_labels[has_topic],
            ["geo", "topic_id"],
            min_meters,
        )
    pd.DataFrame(topic_rows).to_csv(out_dir / "error_by_topic.csv", index=False)

    bench_rows = []
    grouped = baseline.groupby("category", sort=True).indices
    for category in sorted(grouped):
        idx = grouped[category]
        b = rmsle(baseline["predicted"].iloc[idx], baseline["actual"].iloc[idx])
        p = rmsle(proposed["predicted"].iloc[idx], proposed["actual"].iloc[idx])
        row = {
            "category": category,
            "baseline_rmsle": _fmt(b),
            "proposed_rmsle": _fmt(p),
            "change_rate_pct": _fmt(change_rate(b, p), "{:+.1f}"),
            "meter_count": baseline["meter_id"].iloc[idx].nunique(),
        }
        if category in benchmark.rows:
            row["baseline_tier"] = benchmark_tier(b, category, benchmark)
            row["proposed_tier"] = benchmark_tier(p, category, benchmark)
            for label, avg in zip(TIER_LABELS, benchmark.rows[category]):
                row[f"benchmark_{label.lower().replace(' ', '_')}"] = _fmt(avg, "{:.3f}")
        else:
            row["baseline_tier"] = ""
            row["proposed_tier"] = ""
        bench_rows.append(row)
    pd.DataFrame(bench_rows).to_csv(out_dir / "benchmark.csv", index=False)

    weekly_rows, _ = _weekly_series(baseline, proposed, day_labels)
    pd.DataFrame(weekly_rows).to_csv(out_dir / "weekly_rmsle.csv", index=False)

    summary = {
        "schema_version": 1,
        "n_rows": int(len(baseline)),
        "n_meters": int(baseline["meter_id"].nunique()),
        "overall": {
            "baseline_rmsle": overall["total"][0],
            "proposed_rmsle": overall["total"][1],
            "change_rate_pct": overall["total"][2],
        },
        "by_day_type": {
            name: {
                "baseline_rmsle": cells[0],
                "proposed_rmsle": cells[1],
                "change_rate_pct": cells[2],
            }
            for name, cells in overall.items()
            if name != "total"
        },
        "by_meter_type_category": type_rows,
        "by_topic": topic_rows,
        "benchmark": bench_rows,
    }
    (out_dir / "report.json").write_text(
        json.dumps(summary, indent=1, sort_keys=True), encoding="utf-8"
    )
    return summary

"""Best-fit topic screening: linear correlation of calendar signals
against candidate trend series, strength categories, and the census
tables summarizing them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .calendar_signal import CalendarSignal
from .config import ScreeningConfig
from .errors import ConstantInputError, DataError, InsufficientOverlapError
from .ingest import BuildingMeta, MeterSeries
from .trends import TrendSeries


class CorrelationCategory(str, enum.Enum):
    POOR = "Poor"
    FAIR = "Fair"
    HIGH = "High"


CATEGORY_ORDER = (
    CorrelationCategory.POOR,
    CorrelationCategory.FAIR,
    CorrelationCategory.HIGH,
)


def classify_correlation(
    r_squared: float, fair_threshold: float = 0.6, high_threshold: float = 0.8
) -> CorrelationCategory:
    """Map r-squared onto Poor / Fair / High.

    Boundaries: r2 < fair -> Poor, fair <= r2 <= high -> Fair,
    r2 > high -> High.
    """
    if not 0.0 <= r_squared <= 1.0 or not np.isfinite(r_squared):
        raise DataError(f"r_squared out of range [0, 1]: {r_squared}")
    if r_squared < fair_threshold:
        return CorrelationCategory.POOR
    if r_squared <= high_threshold:
        return CorrelationCategory.FAIR
    return CorrelationCategory.HIGH


def pearson_r(x, y, min_overlap: int = 3) -> float:
    """Pearson product-moment correlation with pairwise NaN dropping.

    Indices where either side is NaN are dropped first; fewer than
    ``min_overlap`` surviving pairs raises InsufficientOverlapError and a
    constant side raises ConstantInputError.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError("pearson_r inputs must have equal length")
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if len(x) < min_overlap:
        raise InsufficientOverlapError(
            f"{len(x)} overlapping points, need >= {min_overlap}"
        )
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInputError("correlation input has zero variance")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


@dataclass
class ScreeningResult:
    meter_id: str
    best_topic_id: str
    geo: str
    r: float
    r_squared: float
    category: CorrelationCategory
    n_days_used: int
    per_topic_table: dict[str, float]  # topic_id -> r_squared


def screen_meter(
    signal: CalendarSignal,
    trends: list[TrendSeries],
    training_year: int,
    cfg: ScreeningConfig,
) -> ScreeningResult:
    """Pick the catalog topic whose series best matches a calendar signal.

    Correlations use only usable days of the training year that both
    sides cover, and at least cfg.min_overlap_days of them. The winner
    maximizes r-squared (ties break lexicographically by topic_id);
    strong negative correlates are admitted since the squared value
    drives ranking and the sign is retained for reporting.
    """
    if signal.year != training_year:
        raise DataError(
            f"{signal.meter_id}: calendar signal is for {signal.year}, "
            f"screening wants {training_year}"
        )
    usable = signal.day_mask & ~np.isnan(signal.scores)
    dates = signal.dates[usable]
    scores = signal.scores[usable]

    per_topic: dict[str, float] = {}
    best: tuple[float, str, float, int] | None = None  # (r2, topic, r, n)
    saw_overlap = False
    geo = trends[0].geo if trends else ""
    for trend in sorted(trends, key=lambda t: t.topic_id):
        values = trend.values_on(dates)
        n_overlap = int((~np.isnan(values)).sum())
        if n_overlap < cfg.min_overlap_days:
            continue
        saw_overlap = True
        try:
            r = pearson_r(scores, values, min_overlap=cfg.min_overlap_days)
        except ConstantInputError:
            continue
        r2 = r * r
        per_topic[trend.topic_id] = r2
        if best is None or r2 > best[0]:
            best = (r2, trend.topic_id, r, n_overlap)

    if best is None:
        if not saw_overlap:
            raise InsufficientOverlapError(
                f"{signal.meter_id}: no topic overlaps >= "
                f"{cfg.min_overlap_days} usable days of {training_year}"
            )
        raise ConstantInputError(
            f"{signal.meter_id}: every overlapping topic was constant"
        )

    r2, topic_id, r, n_days = best
    return ScreeningResult(
        meter_id=signal.meter_id,
        best_topic_id=topic_id,
        geo=geo,
        r=r,
        r_squared=r2,
        category=classify_correlation(
            r2, cfg.fair_threshold, cfg.high_threshold
        ),
        n_days_used=n_days,
        per_topic_table=per_topic,
    )


def _census_frame(counts: dict[str, dict[CorrelationCategory, int]]) -> pd.DataFrame:
    total = sum(sum(row.values()) for row in counts.values()) or 1
    records = []
    for key in sorted(counts):
        row = {"group": key}
        for cat in CATEGORY_ORDER:
            n = counts[key].get(cat, 0)
            row[f"{cat.value.lower()}_count"] = n
            row[f"{cat.value.lower()}_pct"] = round(100.0 * n / total, 1)
        records.append(row)
    columns = ["group"]
    for cat in CATEGORY_ORDER:
        columns += [f"{cat.value.lower()}_count", f"{cat.value.lower()}_pct"]
    return pd.DataFrame(records, columns=columns)


@dataclass
class ScreeningCensus:
    by_meter_type: pd.DataFrame
    by_primary_use: pd.DataFrame
    by_topic: pd.DataFrame


def screening_census(
    results: dict[str, ScreeningResult | None],
    meters: list[MeterSeries],
    metadata: dict[str, BuildingMeta] | None = None,
) -> ScreeningCensus:
    """Counts and percentages per (meter type x category), plus
    per-primary-use and per-best-topic breakdowns.

    ``results`` maps every meter id to its screening result, or None for
    meters marked unscreenable, which group as Poor. Percentages are of
    the grand meter total, so each table's percentages sum to 100.
    """
    meter_index = {m.meter_id: m for m in meters}
    unknown = set(results) - set(meter_index)
    if unknown:
        raise DataError(f"screening results for unknown meters: {sorted(unknown)}")

    by_type: dict[str, dict] = {}
    by_use: dict[str, dict] = {}
    by_topic: dict[str, dict] = {}
    for meter_id, result in results.items():
        meter = meter_index[meter_id]
        category = result.category if result else CorrelationCategory.POOR
        type_row = by_type.setdefault(meter.meter_type.value, {})
        type_row[category] = type_row.get(category, 0) + 1
        if metadata and meter.building_id in metadata:
            use = metadata[meter.building_id].primary_use
            use_row = by_use.setdefault(use, {})
            use_row[category] = use_row.get(category, 0) + 1
        if result is not None:
            topic_row = by_topic.setdefault(result.best_topic_id, {})
            topic_row[category] = topic_row.get(category, 0) + 1

    return ScreeningCensus(
        by_meter_type=_census_frame(by_type),
        by_primary_use=_census_frame(by_use),
        by_topic=_census_frame(by_topic),
    )


def screening_results_frame(
    results: dict[str, ScreeningResult | None]
) -> pd.DataFrame:
    """CSV-ready screening results, one row per meter."""
    rows = []
    for meter_id in sorted(results):
        result = results[meter_id]
        if result is None:
            rows.append(
                {
                    "meter_id": meter_id,
                    "best_topic": "",
                    "geo": "",
                    "r": "",
                    "r2": "",
                    "category": "unscreenable",
                    "n_days_used": 0,
                }
            )
        else:
            rows.append(
                {
                    "meter_id": meter_id,
                    "best_topic": result.best_topic_id,
                    "geo": result.geo,
                    "r": f"{result.r:.6f}",
                    "r2": f"{result.r_squared:.6f}",
                    "category": result.category.value,
                    "n_days_used": result.n_days_used,
                }
            )
    return pd.DataFrame(
        rows,
        columns=["meter_id", "best_topic", "geo", "r", "r2", "category",
                 "n_days_used"],
    )

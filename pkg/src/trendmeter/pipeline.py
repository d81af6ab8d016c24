"""Pipeline stages: ingest -> screen -> train -> evaluate, plus charts.

Each stage owns a subdirectory of the run directory, writes its outputs
plus a manifest, and is cached content-addressed: the stage key hashes
the relevant input file bytes and config sections, so re-touching an
input with identical bytes never invalidates a cache and changing any
byte always does. Stages fail fast when an upstream artifact is absent.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pandas as pd
from filelock import FileLock, Timeout

from . import __version__
from .artifacts import (
    load_meters,
    load_signals,
    load_weather_artifact,
    save_meters,
    save_signals,
    save_weather,
)
from .calendar_signal import extract_calendar_signal
from .cleaning import clean_meter_series, cleaning_reports_frame, impute_weather
from .config import PipelineConfig
from .errors import (
    ConstantInputError,
    DataError,
    InsufficientOverlapError,
    MissingArtifactError,
)
from .evaluation import default_benchmark_table, emit_report
from .features import build_feature_matrix, encode_categoricals
from .gbdt import load_bundle, predict, save_bundle, train
from .ingest import (
    load_building_metadata,
    load_daytype_calendar,
    load_meter_readings,
    load_site_geo,
    load_weather,
)
from .screening import (
    CorrelationCategory,
    ScreeningResult,
    screen_meter,
    screening_census,
    screening_results_frame,
)
from .trends import load_topic_catalog, load_trend_csv, standardize_by_year

log = logging.getLogger(__name__)

STAGE_INGEST = "ingest"
STAGE_SCREEN = "screen"
STAGE_TRAIN = "train"
STAGE_EVALUATE = "evaluate"


def _hash_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _stage_key(input_hashes: dict, sections: dict) -> str:
    payload = json.dumps(
        {"inputs": input_hashes, "sections": sections, "version": __version__},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@contextmanager
def run_lock(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(out_dir / ".lock"))
    try:
        lock.acquire(timeout=0.1)
    except Timeout:
        raise DataError(
            f"run directory {out_dir} is owned by another process"
        ) from None
    try:
        yield
    finally:
        lock.release()


def _manifest_path(stage_dir: Path) -> Path:
    return stage_dir / "manifest.json"


def _is_cached(stage_dir: Path, key: str, outputs: list[str]) -> bool:
    manifest = _manifest_path(stage_dir)
    if not manifest.exists():
        return False
    try:
        recorded = json.loads(manifest.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return False
    if recorded.get("stage_key") != key:
        return False
    return all((stage_dir / name).exists() for name in outputs)


def _write_manifest(
    stage_dir: Path,
    stage: str,
    key: str,
    cfg: PipelineConfig,
    input_hashes: dict,
    counts: dict,
    elapsed: float,
) -> None:
    manifest = {
        "stage": stage,
        "stage_key": key,
        "config": cfg.snapshot(),
        "input_hashes": input_hashes,
        "seed": cfg.model.seed,
        "software_version": __version__,
        "counts": counts,
        "timings_s": {stage: round(elapsed, 3)},
        "created_at": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    _manifest_path(stage_dir).write_text(
        json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8"
    )


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(
            f"{what} not found at {path}; run the upstream stage first"
        )
    return path


def _date_range(cfg: PipelineConfig):
    years = sorted((cfg.training_year, cfg.validation_year))
    return (
        dt.datetime(years[0], 1, 1, 0, 0, 0),
        dt.datetime(years[-1], 12, 31, 23, 0, 0),
    )


INGEST_OUTPUTS = ["meters_clean.csv", "weather_imputed.csv", "cleaning_report.csv"]


def cmd_ingest(cfg: PipelineConfig) -> Path:
    """Load, clean, and impute the raw inputs; cache the results."""
    stage_dir = cfg.out_dir / STAGE_INGEST
    input_hashes = {
        name: _hash_file(getattr(cfg.data, name))
        for name in ("meters", "metadata", "weather", "daytype_calendar")
    }
    sections = {
        "cleaning": cfg.cleaning.__dict__,
        "years": [cfg.training_year, cfg.validation_year],
    }
    key = _stage_key(input_hashes, sections)
    if _is_cached(stage_dir, key, INGEST_OUTPUTS):
        log.info("ingest: cache hit at %s", stage_dir)
        return stage_dir

    started = time.perf_counter()
    stage_dir.mkdir(parents=True, exist_ok=True)

    metadata = load_building_metadata(cfg.data.metadata)
    site_map = {b: m.site_id for b, m in metadata.items()}
    meters = load_meter_readings(
        cfg.data.meters, date_range=_date_range(cfg), site_map=site_map
    )
    if not meters:
        raise DataError("no meter series inside the configured date range")
    for meter in meters:
        if meter.building_id not in metadata:
            raise DataError(
                f"{meter.meter_id}: building {meter.building_id} missing "
                "from metadata"
            )

    cleaned = []
    reports = []
    for meter in meters:
        series, report = clean_meter_series(meter, cfg.cleaning)
        cleaned.append(series)
        reports.append(report)

    weather = load_weather(cfg.data.weather)
    weather = {
        site: impute_weather(series, cfg.cleaning)
        for site, series in weather.items()
    }

    sites = sorted({m.site_id for m in cleaned})
    load_daytype_calendar(
        cfg.data.daytype_calendar,
        date_range=(
            dt.date(cfg.validation_year, 1, 1),
            dt.date(cfg.validation_year, 12, 31),
        ),
        required_sites=sites,
    )

    save_meters(cleaned, stage_dir / "meters_clean.csv")
    save_weather(weather, stage_dir / "weather_imputed.csv")
    cleaning_reports_frame(reports).to_csv(
        stage_dir / "cleaning_report.csv", index=False
    )

    counts = {
        "meters": len(cleaned),
        "valid_hours": int(sum(m.valid_hours for m in cleaned)),
        "removed_outliers": int(sum(r.removed_outlier_count for r in reports)),
        "removed_constant_runs": int(
            sum(r.removed_constant_run_count for r in reports)
        ),
        "weather_sites": len(weather),
    }
    _write_manifest(
        stage_dir, STAGE_INGEST, key, cfg, input_hashes, counts,
        time.perf_counter() - started,
    )
    return stage_dir


SCREEN_OUTPUTS = [
    "calendar_signals.csv",
    "screening_results.csv",
    "census_by_meter_type.csv",
    "census_by_primary_use.csv",
    "census_by_topic.csv",
]


def _screen_key(cfg: PipelineConfig) -> tuple[str, dict]:
    input_hashes = {
        name: _hash_file(getattr(cfg.data, name))
        for name in ("trends", "topic_catalog", "site_geo")
    }
    ingest_manifest = _manifest_path(cfg.out_dir / STAGE_INGEST)
    if ingest_manifest.exists():
        input_hashes["ingest_stage"] = json.loads(
            ingest_manifest.read_text(encoding="utf-8")
        )["stage_key"]
    sections = {
        "screening": cfg.screening.__dict__,
        "calendar": cfg.calendar.__dict__,
        "training_year": cfg.training_year,
        "allow_partial_years": cfg.allow_partial_years,
    }
    return _stage_key(input_hashes, sections), input_hashes


def _load_standardized_trends(cfg: PipelineConfig):
    catalog = load_topic_catalog(cfg.data.topic_catalog)
    catalog_ids = {t.topic_id for t in catalog}
    raw_series = load_trend_csv(cfg.data.trends)
    series = [
        standardize_by_year(s, allow_partial=cfg.allow_partial_years)
        for s in raw_series
        if s.topic_id in catalog_ids
    ]
    if not series:
        raise DataError("no trend series matches the topic catalog")
    return catalog, series


def cmd_screen(cfg: PipelineConfig) -> Path:
    """Extract calendar signals and pick each meter's best-fit topic."""
    stage_dir = cfg.out_dir / STAGE_SCREEN
    _require(
        cfg.out_dir / STAGE_INGEST / "meters_clean.csv",
        "cleaned meters artifact",
    )
    key, input_hashes = _screen_key(cfg)
    if _is_cached(stage_dir, key, SCREEN_OUTPUTS):
        log.info("screen: cache hit at %s", stage_dir)
        return stage_dir

    started = time.perf_counter()
    stage_dir.mkdir(parents=True, exist_ok=True)

    meters = load_meters(cfg.out_dir / STAGE_INGEST / "meters_clean.csv")
    site_geo = load_site_geo(cfg.data.site_geo)
    _, series = _load_standardized_trends(cfg)
    by_geo: dict[str, list] = {}
    for s in series:
        by_geo.setdefault(s.geo, []).append(s)

    signals = {}
    results: dict[str, ScreeningResult | None] = {}
    for meter in meters:
        geo = site_geo.get(meter.site_id)
        if geo is None:
            raise DataError(
                f"{meter.meter_id}: site {meter.site_id} has no country in "
                "the site_geo map"
            )
        try:
            signal = extract_calendar_signal(
                meter, cfg.training_year, cfg.calendar
            )
        except DataError:
            results[meter.meter_id] = None
            continue
        signals[meter.meter_id] = signal
        try:
            results[meter.meter_id] = screen_meter(
                signal, by_geo.get(geo, []), cfg.training_year, cfg.screening
            )
        except (InsufficientOverlapError, ConstantInputError):
            results[meter.meter_id] = None

    save_signals(signals, stage_dir / "calendar_signals.csv")
    screening_results_frame(results).to_csv(
        stage_dir / "screening_results.csv", index=False
    )
    metadata = load_building_metadata(cfg.data.metadata)
    census = screening_census(results, meters, metadata)
    census.by_meter_type.to_csv(
        stage_dir / "census_by_meter_type.csv", index=False
    )
    census.by_primary_use.to_csv(
        stage_dir / "census_by_primary_use.csv", index=False
    )
    census.by_topic.to_csv(stage_dir / "census_by_topic.csv", index=False)

    counts = {
        "meters": len(meters),
        "screened": sum(1 for r in results.values() if r is not None),
        "unscreenable": sum(1 for r in results.values() if r is None),
        "trend_series": len(series),
    }
    _write_manifest(
        stage_dir, STAGE_SCREEN, key, cfg, input_hashes, counts,
        time.perf_counter() - started,
    )
    return stage_dir


def load_screening_results(path) -> dict[str, ScreeningResult | None]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"screening artifact not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    results: dict[str, ScreeningResult | None] = {}
    for row in frame.itertuples(index=False):
        if row.category == "unscreenable":
            results[row.meter_id] = None
            continue
        r = float(row.r)
        results[row.meter_id] = ScreeningResult(
            meter_id=row.meter_id,
            best_topic_id=row.best_topic,
            geo=row.geo,
            r=r,
            r_squared=float(row.r2),
            category=CorrelationCategory(row.category),
            n_days_used=int(row.n_days_used),
            per_topic_table={},
        )
    return results


def _modes(cfg: PipelineConfig, mode: str | None) -> list[str]:
    mode = mode or cfg.mode
    return ["baseline", "proposed"] if mode == "both" else [mode]


def _groups(
    cfg: PipelineConfig, screening: dict[str, ScreeningResult | None]
) -> dict[str, list[str]]:
    """Meters per training group; only screened meters are modeled."""
    screened = sorted(k for k, v in screening.items() if v is not None)
    if not screened:
        raise DataError("no meter passed screening; nothing to train on")
    if cfg.group_by == "none":
        return {"all": screened}
    groups: dict[str, list[str]] = {}
    for meter_id in screened:
        groups.setdefault(screening[meter_id].category.value, []).append(
            meter_id
        )
    return groups


def _bundle_name(mode: str, group: str) -> str:
    return f"model_{mode}_{group}.json"


def _train_key(cfg: PipelineConfig, modes: list[str]) -> tuple[str, dict]:
    input_hashes = {}
    screen_manifest = _manifest_path(cfg.out_dir / STAGE_SCREEN)
    if screen_manifest.exists():
        input_hashes["screen_stage"] = json.loads(
            screen_manifest.read_text(encoding="utf-8")
        )["stage_key"]
    sections = {
        "model": cfg.model.__dict__,
        "modes": modes,
        "group_by": cfg.group_by,
        "training_year": cfg.training_year,
    }
    return _stage_key(input_hashes, sections), input_hashes


def _assemble(cfg, meters, metadata, weather, series, screening, mode, year):
    matrix, y = build_feature_matrix(
        meters, metadata, weather, series, screening, mode, year
    )
    encoded, dictionary = encode_categoricals(matrix)
    return matrix, encoded, dictionary, y


def cmd_train(cfg: PipelineConfig, mode: str | None = None) -> Path:
    """Train fold-ensembles for the requested mode(s) and group(s)."""
    stage_dir = cfg.out_dir / STAGE_TRAIN
    _require(
        cfg.out_dir / STAGE_INGEST / "meters_clean.csv",
        "cleaned meters artifact",
    )
    _require(
        cfg.out_dir / STAGE_SCREEN / "screening_results.csv",
        "screening artifact",
    )
    modes = _modes(cfg, mode)
    screening = load_screening_results(
        cfg.out_dir / STAGE_SCREEN / "screening_results.csv"
    )
    groups = _groups(cfg, screening)
    outputs = [
        _bundle_name(m, g) for m in modes for g in sorted(groups)
    ]
    key, input_hashes = _train_key(cfg, modes)
    if _is_cached(stage_dir, key, outputs):
        log.info("train: cache hit at %s", stage_dir)
        return stage_dir

    started = time.perf_counter()
    stage_dir.mkdir(parents=True, exist_ok=True)

    meters = load_meters(cfg.out_dir / STAGE_INGEST / "meters_clean.csv")
    weather = load_weather_artifact(
        cfg.out_dir / STAGE_INGEST / "weather_imputed.csv"
    )
    metadata = load_building_metadata(cfg.data.metadata)
    _, series = _load_standardized_trends(cfg)
    meters_by_id = {m.meter_id: m for m in meters}

    counts: dict = {"groups": {}}
    for group, meter_ids in sorted(groups.items()):
        group_meters = [meters_by_id[m] for m in meter_ids]
        rowset_hash = None
        for m in modes:
            matrix, encoded, dictionary, y = _assemble(
                cfg, group_meters, metadata, weather, series, screening, m,
                cfg.training_year,
            )
            fingerprint = hashlib.sha256()
            fingerprint.update("".join(matrix.meter_ids).encode())
            fingerprint.update(np.ascontiguousarray(matrix.timestamps).tobytes())
            fingerprint = fingerprint.hexdigest()
            if rowset_hash is None:
                rowset_hash = fingerprint
            elif fingerprint != rowset_hash:
                raise DataError(
                    f"group {group}: baseline and proposed training row sets "
                    "differ"
                )
            bundle = train(encoded, y, cfg.model, dictionary)
            bundle.meta = {
                "mode": m,
                "group": group,
                "rowset_hash": fingerprint,
                "training_year": cfg.training_year,
                "n_rows": len(matrix),
                "meter_ids": meter_ids,
            }
            save_bundle(bundle, stage_dir / _bundle_name(m, group))
            counts["groups"].setdefault(group, {})[m] = len(matrix)

    _write_manifest(
        stage_dir, STAGE_TRAIN, key, cfg, input_hashes, counts,
        time.perf_counter() - started,
    )
    return stage_dir


EVALUATE_OUTPUTS = [
    "report.json",
    "error_by_metertype.csv",
    "error_by_topic.csv",
    "benchmark.csv",
    "weekly_rmsle.csv",
    "predictions_baseline.csv",
    "predictions_proposed.csv",
]


def _prediction_records(cfg, meters, metadata, weather, series, screening,
                        site_geo, mode, bundle) -> pd.DataFrame:
    matrix, y = build_feature_matrix(
        meters, metadata, weather, series,
        screening if mode == "proposed" else None,
        mode, cfg.validation_year,
    )
    encoded, _ = encode_categoricals(matrix, bundle.dictionary)
    predicted = predict(bundle, encoded)
    meter_info = {m.meter_id: m for m in meters}
    rows = {
        "meter_id": matrix.meter_ids,
        "timestamp": matrix.timestamps,
        "site_id": [meter_info[m].site_id for m in matrix.meter_ids],
        "geo": [
            site_geo.get(meter_info[m].site_id, "") for m in matrix.meter_ids
        ],
        "meter_type": [
            meter_info[m].meter_type.value for m in matrix.meter_ids
        ],
        "category": [
            screening[m].category.value if screening.get(m) else "unscreenable"
            for m in matrix.meter_ids
        ],
        "topic_id": [
            screening[m].best_topic_id
            if mode == "proposed" and screening.get(m)
            else ""
            for m in matrix.meter_ids
        ],
        "actual": np.expm1(y),
        "predicted": predicted,
    }
    return pd.DataFrame(rows)


def cmd_evaluate(cfg: PipelineConfig) -> Path:
    """Compare baseline vs proposed predictions on the validation year."""
    stage_dir = cfg.out_dir / STAGE_EVALUATE
    train_dir = cfg.out_dir / STAGE_TRAIN
    _require(
        cfg.out_dir / STAGE_INGEST / "meters_clean.csv",
        "cleaned meters artifact",
    )
    _require(
        cfg.out_dir / STAGE_SCREEN / "screening_results.csv",
        "screening artifact",
    )
    screening = load_screening_results(
        cfg.out_dir / STAGE_SCREEN / "screening_results.csv"
    )
    groups = _groups(cfg, screening)
    for group in groups:
        for m in ("baseline", "proposed"):
            _require(train_dir / _bundle_name(m, group), f"{m} bundle")

    train_manifest = _manifest_path(train_dir)
    input_hashes = {}
    if train_manifest.exists():
        input_hashes["train_stage"] = json.loads(
            train_manifest.read_text(encoding="utf-8")
        )["stage_key"]
    input_hashes["daytype_calendar"] = _hash_file(cfg.data.daytype_calendar)
    sections = {
        "evaluation": cfg.evaluation.__dict__,
        "validation_year": cfg.validation_year,
    }
    key = _stage_key(input_hashes, sections)
    if _is_cached(stage_dir, key, EVALUATE_OUTPUTS):
        log.info("evaluate: cache hit at %s", stage_dir)
        return stage_dir

    started = time.perf_counter()
    stage_dir.mkdir(parents=True, exist_ok=True)

    meters = load_meters(cfg.out_dir / STAGE_INGEST / "meters_clean.csv")
    weather = load_weather_artifact(
        cfg.out_dir / STAGE_INGEST / "weather_imputed.csv"
    )
    metadata = load_building_metadata(cfg.data.metadata)
    site_geo = load_site_geo(cfg.data.site_geo)
    _, series = _load_standardized_trends(cfg)
    meters_by_id = {m.meter_id: m for m in meters}

    frames = {"baseline": [], "proposed": []}
    for group, meter_ids in sorted(groups.items()):
        group_meters = [meters_by_id[m] for m in meter_ids]
        rowset = {}
        for mode in ("baseline", "proposed"):
            bundle = load_bundle(train_dir / _bundle_name(mode, group))
            rowset[mode] = bundle.meta.get("rowset_hash")
            frames[mode].append(
                _prediction_records(
                    cfg, group_meters, metadata, weather, series, screening,
                    site_geo, mode, bundle,
                )
            )
        if rowset["baseline"] != rowset["proposed"]:
            raise DataError(
                f"group {group}: bundles were trained on different row sets"
            )

    baseline = pd.concat(frames["baseline"], ignore_index=True)
    proposed = pd.concat(frames["proposed"], ignore_index=True)

    record_dates = pd.DatetimeIndex(baseline["timestamp"])
    calendar = load_daytype_calendar(
        cfg.data.daytype_calendar,
        date_range=(record_dates.min().date(), record_dates.max().date()),
        required_sites=sorted(set(baseline["site_id"])),
    )

    for mode, frame in (("baseline", baseline), ("proposed", proposed)):
        out = frame.copy()
        out["timestamp"] = pd.DatetimeIndex(out["timestamp"]).strftime(
            "%Y-%m-%d %H:%M:%S"
        )
        out["actual"] = out["actual"].map("{:.6f}".format)
        out["predicted"] = out["predicted"].map("{:.6f}".format)
        out.to_csv(stage_dir / f"predictions_{mode}.csv", index=False)

    summary = emit_report(
        baseline,
        proposed,
        calendar,
        stage_dir,
        benchmark=default_benchmark_table(),
        min_meters=cfg.evaluation.min_meters,
    )

    counts = {
        "rows": int(len(baseline)),
        "meters": int(baseline["meter_id"].nunique()),
        "overall_change_rate_pct": summary["overall"]["change_rate_pct"],
    }
    _write_manifest(
        stage_dir, STAGE_EVALUATE, key, cfg, input_hashes, counts,
        time.perf_counter() - started,
    )
    return stage_dir


def cmd_run_all(cfg: PipelineConfig) -> Path:
    """Full pipeline; evaluation runs when both modes were trained."""
    cmd_ingest(cfg)
    cmd_screen(cfg)
    cmd_train(cfg)
    if cfg.mode == "both":
        cmd_evaluate(cfg)
    else:
        log.info("run-all: mode=%s, skipping evaluate (needs both)", cfg.mode)
    return cfg.out_dir


def cmd_chart(cfg: PipelineConfig) -> Path:
    """Emit convenience charts from cached artifacts (presence-tested only)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    chart_dir = cfg.out_dir / "charts"
    chart_dir.mkdir(parents=True, exist_ok=True)

    signals_path = _require(
        cfg.out_dir / STAGE_SCREEN / "calendar_signals.csv",
        "calendar signals artifact",
    )
    signals = load_signals(signals_path, cfg.training_year)
    fig, ax = plt.subplots(figsize=(10, 4))
    for meter_id in sorted(signals)[:6]:
        s = signals[meter_id]
        ax.plot(s.dates[s.day_mask], s.scores[s.day_mask], label=meter_id,
                linewidth=0.8)
    ax.set_title(f"Calendar signals, {cfg.training_year}")
    ax.set_ylabel("first-component score")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(chart_dir / "calendar_signals.png", dpi=120)
    plt.close(fig)

    weekly_path = cfg.out_dir / STAGE_EVALUATE / "weekly_rmsle.csv"
    if weekly_path.exists():
        weekly = pd.read_csv(weekly_path)
        fig, ax = plt.subplots(figsize=(10, 4))
        ax.plot(weekly["week"], weekly["baseline_all"], label="baseline")
        ax.plot(weekly["week"], weekly["proposed_all"], label="proposed")
        step = max(1, len(weekly) // 12)
        ax.set_xticks(range(0, len(weekly), step))
        ax.tick_params(axis="x", rotation=45, labelsize=7)
        ax.set_ylabel("weekly RMSLE")
        ax.legend()
        fig.tight_layout()
        fig.savefig(chart_dir / "weekly_rmsle.png", dpi=120)
        plt.close(fig)

    return chart_dir

"""Run configuration: dataclasses plus YAML/JSON loading and validation.

A config file is a YAML mapping with the sections shown in the README
(``data``, ``years``, ``cleaning``, ``calendar``, ``screening``, ``model``,
``evaluation``, ``run``). JSON works too since YAML is a superset.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class CleaningConfig:
    z_threshold: float = 8.0
    min_constant_hours: int = 48
    max_interp_hours: int = 6

    def validate(self) -> None:
        if self.z_threshold <= 0:
            raise ConfigError("cleaning.z_threshold must be > 0")
        if self.min_constant_hours < 2:
            raise ConfigError("cleaning.min_constant_hours must be >= 2")
        if self.max_interp_hours < 0:
            raise ConfigError("cleaning.max_interp_hours must be >= 0")


@dataclass(frozen=True)
class CalendarConfig:
    min_valid_hours: int = 12

    def validate(self) -> None:
        if not 1 <= self.min_valid_hours <= 24:
            raise ConfigError("calendar.min_valid_hours must be in [1, 24]")


@dataclass(frozen=True)
class ScreeningConfig:
    fair_threshold: float = 0.6
    high_threshold: float = 0.8
    min_overlap_days: int = 180

    def validate(self) -> None:
        if not 0.0 < self.fair_threshold < self.high_threshold < 1.0:
            raise ConfigError(
                "screening thresholds must satisfy 0 < fair < high < 1"
            )
        if self.min_overlap_days < 3:
            raise ConfigError("screening.min_overlap_days must be >= 3")


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 500
    learning_rate: float = 0.05
    max_leaves: int = 31
    min_samples_leaf: int = 20
    feature_fraction: float = 0.9
    row_fraction: float = 0.9
    n_bins: int = 255
    seed: int = 7
    n_folds: int = 3

    def validate(self) -> None:
        if self.n_trees < 0:
            raise ConfigError("model.n_trees must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("model.learning_rate must be in (0, 1]")
        if self.max_leaves < 2:
            raise ConfigError("model.max_leaves must be >= 2")
        if self.min_samples_leaf < 1:
            raise ConfigError("model.min_samples_leaf must be >= 1")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ConfigError("model.feature_fraction must be in (0, 1]")
        if not 0.0 < self.row_fraction <= 1.0:
            raise ConfigError("model.row_fraction must be in (0, 1]")
        if not 2 <= self.n_bins <= 1024:
            raise ConfigError("model.n_bins must be in [2, 1024]")
        if self.n_folds < 2:
            raise ConfigError("model.n_folds must be >= 2")


@dataclass(frozen=True)
class EvalConfig:
    min_meters: int = 3

    def validate(self) -> None:
        if self.min_meters < 1:
            raise ConfigError("evaluation.min_meters must be >= 1")


@dataclass(frozen=True)
class DataPaths:
    meters: Path
    metadata: Path
    weather: Path
    trends: Path
    topic_catalog: Path
    daytype_calendar: Path
    site_geo: Path

    def validate(self) -> None:
        for name in (f.name for f in dataclasses.fields(self)):
            path = getattr(self, name)
            if not Path(path).exists():
                raise ConfigError(f"data.{name}: file not found: {path}")


MODES = ("baseline", "proposed", "both")
GROUP_BY = ("none", "category")


@dataclass(frozen=True)
class PipelineConfig:
    data: DataPaths
    training_year: int = 2016
    validation_year: int = 2017
    cleaning: CleaningConfig = field(default_factory=CleaningConfig)
    calendar: CalendarConfig = field(default_factory=CalendarConfig)
    screening: ScreeningConfig = field(default_factory=ScreeningConfig)
    model: GbdtParams = field(default_factory=GbdtParams)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    mode: str = "both"
    group_by: str = "none"
    out_dir: Path = Path("runs/default")
    allow_partial_years: bool = False

    def validate(self, check_paths: bool = True) -> None:
        if self.training_year == self.validation_year:
            raise ConfigError("training_year and validation_year must differ")
        if self.mode not in MODES:
            raise ConfigError(f"run.mode must be one of {MODES}")
        if self.group_by not in GROUP_BY:
            raise ConfigError(f"run.group_by must be one of {GROUP_BY}")
        self.cleaning.validate()
        self.calendar.validate()
        self.screening.validate()
        self.model.validate()
        self.evaluation.validate()
        if check_paths:
            self.data.validate()

    def snapshot(self) -> dict:
        """Plain-dict snapshot of the whole config, for manifests."""
        snap = dataclasses.asdict(self)
        snap["data"] = {k: str(v) for k, v in snap["data"].items()}
        snap["out_dir"] = str(self.out_dir)
        return snap


def _section(raw: dict, name: str, cls, base=None):
    section = raw.get(name, {})
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError(f"config section '{name}' must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(
            f"unknown keys in config section '{name}': {sorted(unknown)}"
        )
    if base is not None:
        merged = dataclasses.asdict(base)
        merged.update(section)
        section = merged
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"invalid config section '{name}': {exc}") from exc


def load_config(path: str | Path, **overrides) -> PipelineConfig:
    """Load, merge overrides into, and validate a pipeline config file.

    Recognized overrides: mode, group_by, seed, out_dir. ``seed`` replaces
    ``model.seed``; the others replace their ``run`` counterparts.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping: {path}")

    data_raw = raw.get("data")
    if not isinstance(data_raw, dict):
        raise ConfigError("config must have a 'data' section with input paths")
    required = {f.name for f in dataclasses.fields(DataPaths)}
    missing = required - set(data_raw)
    if missing:
        raise ConfigError(f"missing data paths in config: {sorted(missing)}")
    base = path.parent
    paths = DataPaths(
        **{k: (base / v).resolve() for k, v in data_raw.items() if k in required}
    )

    years = raw.get("years", {}) or {}
    run = raw.get("run", {}) or {}

    model = _section(raw, "model", GbdtParams)
    if "seed" in overrides and overrides["seed"] is not None:
        model = dataclasses.replace(model, seed=int(overrides["seed"]))

    out_dir = overrides.get("out_dir") or run.get("out_dir", "runs/default")

    cfg = PipelineConfig(
        data=paths,
        training_year=int(years.get("training", 2016)),
        validation_year=int(years.get("validation", 2017)),
        cleaning=_section(raw, "cleaning", CleaningConfig),
        calendar=_section(raw, "calendar", CalendarConfig),
        screening=_section(raw, "screening", ScreeningConfig),
        model=model,
        evaluation=_section(raw, "evaluation", EvalConfig),
        mode=overrides.get("mode") or run.get("mode", "both"),
        group_by=overrides.get("group_by") or run.get("group_by", "none"),
        out_dir=Path(out_dir),
        allow_partial_years=bool(run.get("allow_partial_years", False)),
    )
    cfg.validate()
    return cfg

"""Shared fixtures: small CSV builders and a session-scoped synthetic corpus."""

import textwrap

import numpy as np
import pandas as pd
import pytest

from trendmeter.config import CalendarConfig, CleaningConfig, ScreeningConfig
from trendmeter.ingest import MeterSeries, MeterType


def write_csv(path, text: str) -> str:
    path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
    return str(path)


def hourly_series(
    start: str,
    readings,
    meter_id: str = "b1_electricity",
    building_id: str = "b1",
    site_id: str = "s0",
    mask=None,
) -> MeterSeries:
    readings = np.asarray(readings, dtype=np.float64)
    timestamps = pd.date_range(start, periods=len(readings), freq="h").to_numpy()
    if mask is None:
        mask = ~np.isnan(readings)
    return MeterSeries(
        meter_id=meter_id,
        building_id=building_id,
        site_id=site_id,
        meter_type=MeterType.ELECTRICITY,
        timestamps=timestamps,
        readings=readings,
        mask=np.asarray(mask, dtype=bool),
    )


@pytest.fixture
def cleaning_cfg():
    return CleaningConfig()


@pytest.fixture
def calendar_cfg():
    return CalendarConfig()


@pytest.fixture
def screening_cfg():
    return ScreeningConfig()


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    """The shipped synthetic corpus, generated once per test session."""
    from trendmeter.synthetic import generate_corpus

    out = tmp_path_factory.mktemp("corpus")
    return generate_corpus(out, seed=42)

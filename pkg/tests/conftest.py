import sys
from datetime import datetime, timedelta
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT / "scripts"))

from oceanquery.core import Resolution, Series, UTC, Variable, canonical_unit
from oceanquery.service import ServiceConfig, build_components


@pytest.fixture(scope="session")
def fixture_dir():
    d = REPO_ROOT / "fixtures"
    assert d.exists(), "run scripts/record_fixtures.py first"
    return d


@pytest.fixture()
def components(fixture_dir, tmp_path):
    cfg = ServiceConfig(
        fixture_dir=str(fixture_dir),
        figure_dir=str(tmp_path / "figures"),
        transport_mode="replay",
    )
    return build_components(cfg)


def make_series(values, variable=Variable.WATER_LEVEL, start=None, step_hours=1.0,
                datum="MSL"):
    """Hourly series helper; ``None`` entries stay masked."""
    start = start or datetime(2020, 1, 1, tzinfo=UTC)
    ts = tuple(start + timedelta(hours=i * step_hours) for i in range(len(values)))
    if variable is Variable.SEA_SURFACE_TEMPERATURE:
        datum = None
    return Series(ts, tuple(values), canonical_unit(variable), variable, datum)

import json
from datetime import datetime

import pytest

from oceanquery.core import (
    BBox,
    EmptyRange,
    FigureRef,
    GridSlice,
    OutOfCoverage,
    Provenance,
    Resolution,
    ResolutionMismatch,
    Series,
    Station,
    SummaryStats,
    TimeRange,
    ToolResponse,
    UTC,
    Variable,
    canonical_unit,
    ts_format,
    ts_parse,
    validate_time_range,
)
from conftest import make_series

COVERAGE = {
    "water_level": {"start": "1996-01-01T00:00:00Z", "end": None},
    "monthly_mean_sea_level": {"start": "1921-01-01T00:00:00Z", "end": None},
    "cora_zeta": {"start": "1979-01-01T00:00:00Z", "end": "2022-12-31T23:59:59Z"},
    "sea_surface_temperature": {"start": "1985-01-01T00:00:00Z", "end": None},
}


def tr(start, end, res=Resolution.HOURLY):
    return TimeRange(ts_parse(start), ts_parse(end), res)


class TestCanonicalUnit:
    def test_water_level_meters(self):
        assert canonical_unit(Variable.WATER_LEVEL) == "m"

    def test_sst_celsius(self):
        assert canonical_unit(Variable.SEA_SURFACE_TEMPERATURE) == "degC"

    def test_zeta_meters(self):
        assert canonical_unit(Variable.CORA_ZETA) == "m"
        assert canonical_unit(Variable.MONTHLY_MEAN_SEA_LEVEL) == "m"


class TestValidateTimeRange:
    def test_well_formed_accepted(self):
        t = tr("2020-05-01", "2020-05-31T23:59")
        out, notes = validate_time_range(t, Variable.WATER_LEVEL, COVERAGE)
        assert out == t and notes == []

    def test_start_equals_end(self):
        with pytest.raises(EmptyRange):
            validate_time_range(tr("2021-01-01", "2021-01-01"), Variable.WATER_LEVEL, COVERAGE)

    def test_resolution_mismatch(self):
        with pytest.raises(ResolutionMismatch):
            validate_time_range(
                tr("2020-01-01", "2020-12-31", Resolution.HOURLY),
                Variable.MONTHLY_MEAN_SEA_LEVEL, COVERAGE,
            )

    def test_sst_1990_within_coverage(self):
        # gridded SST coverage starts 1985, so 1990 is in range
        out, notes = validate_time_range(
            tr("1990-01-01", "1990-12-31", Resolution.DAILY),
            Variable.SEA_SURFACE_TEMPERATURE, COVERAGE,
        )
        assert notes == []

    def test_clamp_records_note(self):
        out, notes = validate_time_range(
            tr("1980-01-01", "1990-12-31", Resolution.DAILY),
            Variable.SEA_SURFACE_TEMPERATURE, COVERAGE,
        )
        assert out.start == ts_parse("1985-01-01T00:00:00Z")
        assert len(notes) == 1 and "clamped" in notes[0]

    def test_no_overlap(self):
        with pytest.raises(OutOfCoverage):
            validate_time_range(
                tr("1950-01-01", "1960-01-01", Resolution.DAILY),
                Variable.SEA_SURFACE_TEMPERATURE, COVERAGE,
            )


class TestInvariants:
    def test_series_requires_ascending_timestamps(self):
        s = make_series([1.0, 2.0])
        with pytest.raises(ValueError):
            Series(tuple(reversed(s.timestamps)), s.values, s.unit, s.variable, s.datum)

    def test_series_length_mismatch(self):
        s = make_series([1.0, 2.0])
        with pytest.raises(ValueError):
            Series(s.timestamps, (1.0,), s.unit, s.variable, s.datum)

    def test_series_unit_must_match_variable(self):
        s = make_series([1.0, 2.0])
        with pytest.raises(ValueError):
            Series(s.timestamps, s.values, "degC", Variable.WATER_LEVEL)

    def test_bbox_ordering(self):
        with pytest.raises(ValueError):
            BBox(10.0, 5.0, 0.0, 1.0)

    def test_station_bounds(self):
        with pytest.raises(ValueError):
            Station("x", "X", 95.0, 0.0)
        with pytest.raises(ValueError):
            Station("", "X", 0.0, 0.0)

    def test_provenance_requires_steps(self):
        with pytest.raises(ValueError):
            Provenance("s", "d", "g", "m", tr("2020-01-01", "2020-02-01"),
                       ts_parse("2024-01-01"), ())

    def test_tool_response_requires_unit_and_span(self):
        with pytest.raises(ValueError):
            ToolResponse("t", (), {"x": 1}, {})

    def test_summary_stats_bounds(self):
        t0 = ts_parse("2020-01-01")
        with pytest.raises(ValueError):
            SummaryStats(2.0, 1.0, 1.5, 0.1, t0, t0, 2)
        with pytest.raises(ValueError):
            SummaryStats(1.0, 2.0, 1.5, -0.1, t0, t0, 2)


class TestRoundTrips:
    def test_series(self):
        s = make_series([1.0, None, -0.25])
        assert Series.from_dict(json.loads(json.dumps(s.to_dict()))) == s

    def test_grid_slice(self):
        g = GridSlice(
            lats=(10.0, 10.5), lons=(-90.0, -89.5, -89.0),
            values=((1.0, None, 3.0), (4.0, 5.0, 6.0)),
            unit="degC", timestamp=ts_parse("2019-12-31"),
            variable=Variable.SEA_SURFACE_TEMPERATURE,
        )
        assert GridSlice.from_dict(json.loads(json.dumps(g.to_dict()))) == g

    def test_time_range(self):
        t = tr("2020-05-01", "2020-05-31T23:59")
        assert TimeRange.from_dict(json.loads(json.dumps(t.to_dict()))) == t

    def test_summary_stats(self):
        st = SummaryStats(1.0, 3.0, 2.0, 0.5, ts_parse("2020-01-01"),
                          ts_parse("2020-01-02"), 10)
        assert SummaryStats.from_dict(json.loads(json.dumps(st.to_dict()))) == st

    def test_provenance(self):
        p = Provenance("NOAA CO-OPS", "coops_hourly_height", "station 8443970", "m",
                       tr("2024-01-01", "2024-12-31"), ts_parse("2025-01-15"),
                       ("fetched", "masked 2"), datum="MSL")
        assert Provenance.from_dict(json.loads(json.dumps(p.to_dict()))) == p

    def test_tool_response(self):
        p = Provenance("src", "ds", "g", "m", tr("2020-01-01", "2020-02-01"),
                       ts_parse("2025-01-15"), ("step",))
        resp = ToolResponse(
            text="answer", images=(FigureRef("/tmp/a.svg", "alt", "timeseries"),),
            json_data={"stats": {"max": 2.79}},
            others={"unit": "m", "datum": "MSL",
                    "time_span": tr("2020-01-01", "2020-02-01").to_dict(),
                    "provenance": [p.to_dict()]},
        )
        assert ToolResponse.from_json(resp.to_json()) == resp

    def test_timestamp_format(self):
        assert ts_format(ts_parse("2024-06-01T12:30:00Z")) == "2024-06-01T12:30:00Z"
        assert ts_parse("2024-06-01T12:30:00+00:00") == ts_parse("2024-06-01T12:30:00Z")

import json
from datetime import datetime

import pytest

from oceanquery.core import UTC, ToolResponse
from oceanquery.dispatcher import (
    ArgValidation,
    DuplicateName,
    FunctionCall,
    FunctionDescriptor,
    Param,
    Registry,
    UnknownFunction,
    UpstreamFailure,
    _coerce_datetime,
)
from oceanquery.intent import parse_query

NOW = datetime(2025, 6, 1, tzinfo=UTC)


def _echo(args):
    return ToolResponse(text="ok", json_data={"echo": {k: str(v) for k, v in args.items()}},
                        others={"unit": "m", "time_span": {"start": "x", "end": "y"}})


def _descriptor(name="probe", params=None):
    params = params if params is not None else (
        Param("station", "station"),
        Param("begin", "datetime"),
        Param("k", "integer", required=False),
    )
    return FunctionDescriptor(name=name, params=params, summary="test fn", handler=_echo)


class TestDescriptor:
    def test_required_after_optional_rejected(self):
        with pytest.raises(ValueError):
            FunctionDescriptor(
                "bad",
                (Param("opt", "string", required=False), Param("req", "string")),
                "", _echo)

    def test_schema_shape(self):
        schema = _descriptor().to_schema()
        assert schema["type"] == "function"
        fn = schema["function"]
        assert fn["name"] == "probe"
        assert fn["parameters"]["required"] == ["station", "begin"]
        assert fn["parameters"]["properties"]["begin"] == {
            "type": "string", "format": "date-time"}

    def test_enum_in_schema(self):
        fd = FunctionDescriptor(
            "e", (Param("datum", "string", enum=("MSL", "NAVD88")),), "", _echo)
        props = fd.to_schema()["function"]["parameters"]["properties"]
        assert props["datum"]["enum"] == ["MSL", "NAVD88"]


class TestFunctionCall:
    def test_arguments_as_json_string(self):
        call = FunctionCall.from_tool_call(
            {"function": {"name": "f", "arguments": '{"a": 1}'}})
        assert call == FunctionCall("f", {"a": 1})

    def test_arguments_as_dict(self):
        call = FunctionCall.from_tool_call({"name": "f", "arguments": {"a": 1}})
        assert call.args == {"a": 1}

    def test_empty_arguments_string(self):
        assert FunctionCall.from_tool_call({"name": "f", "arguments": " "}).args == {}

    def test_bad_json(self):
        with pytest.raises(ArgValidation):
            FunctionCall.from_tool_call({"name": "f", "arguments": "{not json"})

    def test_non_object_arguments(self):
        with pytest.raises(ArgValidation):
            FunctionCall.from_tool_call({"name": "f", "arguments": "[1, 2]"})


class TestRegistry:
    def test_duplicate_rejected(self):
        r = Registry()
        r.register(_descriptor())
        with pytest.raises(DuplicateName):
            r.register(_descriptor())

    def test_unknown_lookup(self):
        with pytest.raises(UnknownFunction):
            Registry().get("nope")

    def test_insertion_order(self):
        r = Registry()
        for name in ("c", "a", "b"):
            r.register(_descriptor(name))
        assert [fd.name for fd in r.list_functions()] == ["c", "a", "b"]


class TestCoerceDatetime:
    @pytest.mark.parametrize("raw", [
        "2020-05-01", "20200501", "2020-05-01T00:00", "2020-05-01 00:00",
        "2020-05-01T00:00:00Z",
    ])
    def test_accepted_formats(self, raw):
        assert _coerce_datetime(raw) == datetime(2020, 5, 1, tzinfo=UTC)

    def test_naive_datetime_upgraded(self):
        assert _coerce_datetime(datetime(2020, 5, 1)).tzinfo is not None

    def test_garbage_raises(self):
        with pytest.raises(ValueError):
            _coerce_datetime("next tuesday-ish")


class TestValidateArgs:
    def _dispatcher(self, components):
        return components["dispatcher"]

    def test_station_name_resolved_to_id(self, components):
        d = self._dispatcher(components)
        fd = _descriptor(params=(Param("station", "station"),))
        assert d.validate_args(fd, {"station": "Boston"}) == {"station": "8443970"}

    def test_raw_station_id_passes_through(self, components):
        d = self._dispatcher(components)
        fd = _descriptor(params=(Param("station", "station"),))
        assert d.validate_args(fd, {"station": "8723214"}) == {"station": "8723214"}

    def test_unknown_parameter(self, components):
        d = self._dispatcher(components)
        fd = _descriptor(params=(Param("a", "string"),))
        with pytest.raises(ArgValidation) as ei:
            d.validate_args(fd, {"a": "x", "bogus": 1})
        assert any("bogus" in v for v in ei.value.violations)

    def test_missing_required(self, components):
        d = self._dispatcher(components)
        fd = _descriptor(params=(Param("a", "string"), Param("b", "number")))
        with pytest.raises(ArgValidation) as ei:
            d.validate_args(fd, {"a": "x"})
        assert any("'b'" in v for v in ei.value.violations)

    def test_violations_accumulate(self, components):
        d = self._dispatcher(components)
        fd = _descriptor(params=(Param("a", "number"), Param("b", "datetime")))
        with pytest.raises(ArgValidation) as ei:
            d.validate_args(fd, {"a": "not-a-number", "b": "not-a-date"})
        assert len(ei.value.violations) == 2

    def test_enum_enforced(self, components):
        d = self._dispatcher(components)
        fd = _descriptor(params=(Param("datum", "string", enum=("MSL",)),))
        with pytest.raises(ArgValidation):
            d.validate_args(fd, {"datum": "NAVD88"})

    def test_number_coercion_from_string(self, components):
        d = self._dispatcher(components)
        fd = _descriptor(params=(Param("lat", "number"), Param("k", "integer")))
        out = d.validate_args(fd, {"lat": "42.35", "k": "7"})
        assert out == {"lat": 42.35, "k": 7}


class TestDispatch:
    def test_unknown_function(self, components):
        with pytest.raises(UnknownFunction):
            components["dispatcher"].dispatch(FunctionCall("no_such", {}))

    def test_default_registry_contents(self, components):
        names = [fd.name for fd in components["registry"].list_functions()]
        assert names == [
            "get_water_level",
            "get_monthly_mean_sea_level",
            "get_cora_series",
            "get_sst",
            "search_documents",
        ]

    def test_response_carries_call_echo(self, components):
        resp = components["dispatcher"].dispatch(FunctionCall(
            "get_water_level",
            {"station": "Boston", "begin": "2020-05-01", "end": "2020-05-31T23:59",
             "datum": "MSL", "interval": "hourly"}))
        assert resp.others["function"] == "get_water_level"
        assert resp.others["arguments"]["station"] == "8443970"
        assert resp.others["arguments"]["begin"] == "2020-05-01T00:00:00Z"

    def test_water_level_payload_shape(self, components):
        resp = components["dispatcher"].dispatch(FunctionCall(
            "get_water_level",
            {"station": "8443970", "begin": "2020-05-01", "end": "2020-05-31T23:59"}))
        assert set(resp.json_data) == {"stats", "series"}
        assert len(resp.images) == 1
        assert resp.others["unit"] == "m"
        prov = resp.others["provenance"]
        assert len(prov) == 1 and prov[0]["dataset_id"] == "coops_hourly_height"
        # round-trips through the four-field JSON envelope
        assert ToolResponse.from_json(resp.to_json()).json_data == resp.json_data

    def test_handler_upstream_wrapping(self, components):
        resp_error = components["dispatcher"]
        with pytest.raises(UpstreamFailure):
            resp_error.dispatch(FunctionCall(
                "get_water_level",
                # no fixture recorded for this station/range in replay mode
                {"station": "9414290", "begin": "2010-01-01", "end": "2010-01-02"}))

    def test_search_documents(self, components):
        resp = components["dispatcher"].dispatch(FunctionCall(
            "search_documents", {"query": "tide gauges", "k": 2}))
        rows = resp.json_data["results"]
        assert len(rows) == 2
        assert all({"doc_id", "score", "snippet", "title"} <= set(r) for r in rows)
        assert resp.others["unit"] == "none"


class TestDispatchStructured:
    def test_compare_merges_locations(self, components):
        gz = components["gazetteer"]
        q = parse_query(
            "Compare monthly mean sea level in Boston and Virginia Key in 2022",
            gz, NOW)
        resp = components["dispatcher"].dispatch_structured(q)
        locs = resp.json_data["locations"]
        assert sorted(locs) == ["Boston", "Virginia Key"]
        for payload in locs.values():
            assert len(payload["series"]["timestamps"]) == 12
        assert len(resp.images) == 1  # one merged comparison figure
        assert len(resp.others["provenance"]) == 2
        assert resp.json_data["errors"] == {}

    def test_single_selector_passthrough(self, components):
        gz = components["gazetteer"]
        q = parse_query("What was the highest water level in Boston in 2024?", gz, NOW)
        resp = components["dispatcher"].dispatch_structured(q)
        assert resp.json_data["stats"]["max"] == pytest.approx(2.79, abs=0.01)

    def test_compare_partial_failure(self, components):
        gz = components["gazetteer"]
        q = parse_query(
            "Compare monthly mean sea level in Boston and Virginia Key in 2022",
            gz, NOW)
        # poison one selector: an unrecorded station id still yields a merged
        # response with the healthy location plus a structured error entry
        from dataclasses import replace
        from oceanquery.core import StationRef
        bad = replace(q, selectors=(q.selectors[0], StationRef("1111111")))
        resp = components["dispatcher"].dispatch_structured(bad)
        assert list(resp.json_data["locations"]) == ["Boston"]
        assert "1111111" in resp.json_data["errors"]
        assert resp.json_data["errors"]["1111111"]["error"] == "UpstreamFailure"

    def test_compare_total_failure(self, components):
        gz = components["gazetteer"]
        q = parse_query(
            "Compare monthly mean sea level in Boston and Virginia Key in 2022",
            gz, NOW)
        from dataclasses import replace
        from oceanquery.core import StationRef
        bad = replace(q, selectors=(StationRef("1111111"), StationRef("2222222")))
        with pytest.raises(UpstreamFailure):
            components["dispatcher"].dispatch_structured(bad)

from datetime import datetime

import pytest

from oceanquery.core import NamedRegion, Point, Resolution, StationRef, UTC, Variable
from oceanquery.intent import (
    AmbiguousTime,
    DatasetHint,
    Stat,
    StructuredQuery,
    UnknownLocation,
    UnsupportedIntent,
    default_gazetteer,
    emit_function_schemas,
    parse_query,
    resolve_time_expression,
)

NOW = datetime(2025, 6, 1, tzinfo=UTC)
GZ = default_gazetteer()

USE_CASE_PROMPTS = [
    "What is the sea level in Boston and Virginia Key in 2022?",
    "What was the water level in Boston in May 2020?",
    "Show Boston's water level from CORA reanalysis in June 1993.",
    "What was the SST in the Gulf of Mexico in 2019?",
]


class TestParseQuery:
    def test_max_water_level_query(self):
        q = parse_query("What is the maximum water level in Boston in 2024?", GZ, NOW)
        assert q.variable is Variable.WATER_LEVEL
        assert q.stat is Stat.MAX
        assert q.selectors == (StationRef("8443970"),)
        assert q.time.start == datetime(2024, 1, 1, tzinfo=UTC)
        assert q.time.end == datetime(2024, 12, 31, 23, 59, tzinfo=UTC)
        assert q.dataset_hint is DatasetHint.COOPS_REALTIME

    def test_cora_query_becomes_point(self):
        q = parse_query("Show Boston's water level from CORA reanalysis in June 1993.", GZ, NOW)
        assert q.variable is Variable.CORA_ZETA
        assert q.stat is Stat.FULL_SERIES
        assert q.selectors == (Point(42.3539, -71.0503),)
        assert q.time.start == datetime(1993, 6, 1, tzinfo=UTC)
        assert q.time.end == datetime(1993, 6, 30, 23, 59, tzinfo=UTC)
        assert q.dataset_hint is DatasetHint.CORA

    def test_compare_two_stations(self):
        q = parse_query("What is the sea level in Boston and Virginia Key in 2022?", GZ, NOW)
        assert q.variable is Variable.MONTHLY_MEAN_SEA_LEVEL
        assert q.stat is Stat.COMPARE
        assert q.selectors == (StationRef("8443970"), StationRef("8723214"))
        assert q.time.resolution is Resolution.MONTHLY

    def test_sst_region(self):
        q = parse_query("What was the SST in the Gulf of Mexico in 2019?", GZ, NOW)
        assert q.variable is Variable.SEA_SURFACE_TEMPERATURE
        assert q.selectors == (NamedRegion("gulf of mexico"),)
        assert q.time.resolution is Resolution.DAILY
        assert q.dataset_hint is DatasetHint.CRW

    def test_unknown_location(self):
        with pytest.raises(UnknownLocation) as exc:
            parse_query("What is the sea level in Atlantis in 2022?", GZ, NOW)
        assert exc.value.token == "Atlantis"

    def test_sea_level_superlative_uses_gauge_record(self):
        q = parse_query("What is the maximum sea level in Boston in 2005?", GZ, NOW)
        assert q.variable is Variable.WATER_LEVEL
        assert q.stat is Stat.MAX

    def test_sea_level_plain_year_uses_monthly_means(self):
        q = parse_query("What is the sea level in Boston in 2021?", GZ, NOW)
        assert q.variable is Variable.MONTHLY_MEAN_SEA_LEVEL

    def test_unsupported_intent(self):
        with pytest.raises(UnsupportedIntent):
            parse_query("How are NOAA satellites used to monitor hurricanes in 2025?", GZ, NOW)

    def test_empty_query(self):
        with pytest.raises(UnsupportedIntent):
            parse_query("   ", GZ, NOW)

    @pytest.mark.parametrize("prompt", USE_CASE_PROMPTS)
    def test_template_coverage(self, prompt):
        parse_query(prompt, GZ, NOW)  # must not fall through to UnsupportedIntent

    @pytest.mark.parametrize("prompt", USE_CASE_PROMPTS)
    def test_determinism(self, prompt):
        assert parse_query(prompt, GZ, NOW) == parse_query(prompt, GZ, NOW)


class TestResolveTimeExpression:
    def test_bare_year(self):
        t = resolve_time_expression("2022", NOW)
        assert t.start == datetime(2022, 1, 1, tzinfo=UTC)
        assert t.end == datetime(2022, 12, 31, 23, 59, tzinfo=UTC)

    def test_year_span(self):
        t = resolve_time_expression("from 2002 to 2010", NOW)
        assert t.start == datetime(2002, 1, 1, tzinfo=UTC)
        assert t.end == datetime(2010, 12, 31, 23, 59, tzinfo=UTC)

    def test_month_year(self):
        t = resolve_time_expression("May 2020", NOW)
        assert t.start == datetime(2020, 5, 1, tzinfo=UTC)
        assert t.end == datetime(2020, 5, 31, 23, 59, tzinfo=UTC)

    def test_iso_date(self):
        t = resolve_time_expression("on 2019-12-31", NOW)
        assert t.start == datetime(2019, 12, 31, tzinfo=UTC)
        assert t.end == datetime(2019, 12, 31, 23, 59, tzinfo=UTC)

    def test_iso_span(self):
        t = resolve_time_expression("from 2020-02-01 to 2020-03-15", NOW)
        assert t.start == datetime(2020, 2, 1, tzinfo=UTC)
        assert t.end == datetime(2020, 3, 15, 23, 59, tzinfo=UTC)

    def test_relative_phrase_is_ambiguous(self):
        with pytest.raises(AmbiguousTime):
            resolve_time_expression("last winter", NOW)

    def test_no_time_is_ambiguous(self):
        with pytest.raises(AmbiguousTime):
            resolve_time_expression("water level in Boston", NOW)


class TestStructuredQueryInvariants:
    def test_compare_requires_two_selectors(self):
        q = parse_query(USE_CASE_PROMPTS[0], GZ, NOW)
        with pytest.raises(ValueError):
            StructuredQuery(q.variable, Stat.COMPARE, q.selectors[:1], q.time, q.dataset_hint)

    def test_single_stat_rejects_two_selectors(self):
        q = parse_query(USE_CASE_PROMPTS[0], GZ, NOW)
        with pytest.raises(ValueError):
            StructuredQuery(q.variable, Stat.MAX, q.selectors, q.time, q.dataset_hint)

    def test_hint_must_match_variable(self):
        q = parse_query(USE_CASE_PROMPTS[1], GZ, NOW)
        with pytest.raises(ValueError):
            StructuredQuery(q.variable, q.stat, q.selectors, q.time, DatasetHint.CRW)


class TestFunctionSchemas:
    def test_default_registry_emits_five(self, components):
        schemas = emit_function_schemas(components["registry"])
        assert len(schemas) == 5
        names = [s["function"]["name"] for s in schemas]
        assert names == ["get_water_level", "get_monthly_mean_sea_level",
                         "get_cora_series", "get_sst", "search_documents"]

    def test_empty_registry(self):
        from oceanquery.dispatcher import Registry

        assert emit_function_schemas(Registry()) == []

    def test_descriptor_shape(self, components):
        schema = emit_function_schemas(components["registry"])[0]
        fn = schema["function"]
        assert schema["type"] == "function"
        assert set(fn["parameters"]["properties"]) == {"station", "begin", "end",
                                                       "datum", "interval"}
        assert fn["parameters"]["required"] == ["station", "begin", "end"]
        assert fn["parameters"]["properties"]["datum"]["enum"]

    def test_parser_dispatcher_round_trip(self, components):
        # every parsed query lowers to calls the dispatcher's validation accepts
        dispatcher = components["dispatcher"]
        for prompt in USE_CASE_PROMPTS + ["What is the maximum water level in Boston in 2024?"]:
            q = parse_query(prompt, GZ, NOW)
            for sel in q.selectors:
                call = dispatcher._lower(q, sel)
                fd = dispatcher.registry.get(call.name)
                dispatcher.validate_args(fd, call.args)  # raises on skew

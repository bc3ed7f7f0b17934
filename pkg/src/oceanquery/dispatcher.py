"""Registry of callable analysis functions with typed parameter schemas.

The dispatcher validates arguments (normalizing human-readable values
like station names and date strings), routes calls to handlers, and
wraps every result in the standardized four-field ToolResponse. Handler
failures become structured errors, never raw crashes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Optional, Sequence

from . import analysis
from .clients import FetchResult, NoaaClients
from .core import (
    BBox,
    NamedRegion,
    OceanQueryError,
    Point,
    Provenance,
    Resolution,
    Series,
    StationRef,
    TimeRange,
    ToolResponse,
    UTC,
    ts_format,
    ts_parse,
    Variable,
)
from .intent import Gazetteer, Stat, StructuredQuery
from .rendering import FigureStore, render_map, render_timeseries
from .retrieval import VectorStore


class DuplicateName(OceanQueryError):
    code = "DuplicateName"


class UnknownFunction(OceanQueryError):
    code = "UnknownFunction"


class ArgValidation(OceanQueryError):
    code = "ArgValidation"

    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)

    def payload(self) -> dict:
        return {"error": self.code, "detail": str(self), "violations": self.violations}


class UpstreamFailure(OceanQueryError):
    code = "UpstreamFailure"

    def __init__(self, msg: str, retryable: bool = False):
        super().__init__(msg)
        self.retryable = retryable

    def payload(self) -> dict:
        return {"error": self.code, "detail": str(self), "retryable": self.retryable}


@dataclass(frozen=True)
class Param:
    name: str
    semantic_type: str  # "string" | "number" | "integer" | "datetime" | "station"
    required: bool = True
    enum: Optional[tuple] = None
    description: str = ""

    def json_schema(self) -> dict:
        base = {
            "string": {"type": "string"},
            "station": {"type": "string"},
            "datetime": {"type": "string", "format": "date-time"},
            "number": {"type": "number"},
            "integer": {"type": "integer"},
        }[self.semantic_type]
        out = dict(base)
        if self.enum:
            out["enum"] = list(self.enum)
        if self.description:
            out["description"] = self.description
        return out


@dataclass(frozen=True)
class FunctionDescriptor:
    name: str
    params: tuple
    summary: str
    handler: Callable

    def __post_init__(self):
        seen_optional = False
        for p in self.params:
            if not p.required:
                seen_optional = True
            elif seen_optional:
                raise ValueError(f"{self.name}: required param {p.name!r} after optional")

    def to_schema(self) -> dict:
        """JSON tool descriptor in the chat-completions tools shape."""
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.summary,
                "parameters": {
                    "type": "object",
                    "properties": {p.name: p.json_schema() for p in self.params},
                    "required": [p.name for p in self.params if p.required],
                },
            },
        }


@dataclass(frozen=True)
class FunctionCall:
    name: str
    args: dict

    @staticmethod
    def from_tool_call(d: dict) -> "FunctionCall":
        """Accepts the wire shape emitted by chat-completions tool calls
        (``arguments`` may be a JSON string)."""
        fn = d.get("function", d)
        args = fn.get("arguments", {})
        if isinstance(args, str):
            try:
                args = json.loads(args) if args.strip() else {}
            except json.JSONDecodeError as e:
                raise ArgValidation([f"arguments is not valid JSON: {e}"]) from e
        if not isinstance(args, dict):
            raise ArgValidation(["arguments must be an object"])
        return FunctionCall(name=fn.get("name", ""), args=args)


_DATE_FORMATS = ("%Y-%m-%d", "%Y%m%d", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M")


def _coerce_datetime(value) -> datetime:
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=UTC)
    s = str(value).strip()
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(s, fmt).replace(tzinfo=UTC)
        except ValueError:
            continue
    return ts_parse(s)  # raises ValueError for garbage


class Registry:
    """Startup-built, immutable-after-wiring function registry."""

    def __init__(self):
        self._functions: dict = {}

    def register(self, fd: FunctionDescriptor):
        if fd.name in self._functions:
            raise DuplicateName(f"function {fd.name!r} already registered")
        self._functions[fd.name] = fd

    def get(self, name: str) -> FunctionDescriptor:
        try:
            return self._functions[name]
        except KeyError:
            raise UnknownFunction(f"no function named {name!r}") from None

    def list_functions(self) -> list:
        return list(self._functions.values())  # insertion order is registration order


class Dispatcher:
    """Validates and routes FunctionCalls / StructuredQueries."""

    def __init__(self, registry: Registry, gazetteer: Gazetteer, figure_store: FigureStore):
        self.registry = registry
        self.gazetteer = gazetteer
        self.figure_store = figure_store

    # -- argument validation -------------------------------------------------

    def validate_args(self, fd: FunctionDescriptor, args: dict) -> dict:
        violations = []
        known = {p.name for p in fd.params}
        for name in args:
            if name not in known:
                violations.append(f"unknown parameter {name!r}")
        normalized = {}
        for p in fd.params:
            if p.name not in args or args[p.name] is None:
                if p.required:
                    violations.append(f"missing required parameter {p.name!r}")
                continue
            raw = args[p.name]
            try:
                if p.semantic_type == "datetime":
                    value = _coerce_datetime(raw)
                elif p.semantic_type == "number":
                    value = float(raw)
                elif p.semantic_type == "integer":
                    value = int(raw)
                elif p.semantic_type == "station":
                    value = self._resolve_station(str(raw))
                else:
                    value = str(raw)
            except (ValueError, TypeError) as e:
                violations.append(f"parameter {p.name!r}: cannot interpret {raw!r} ({e})")
                continue
            if p.enum and value not in p.enum:
                violations.append(
                    f"parameter {p.name!r}: {value!r} not in {sorted(p.enum)}"
                )
                continue
            normalized[p.name] = value
        if violations:
            raise ArgValidation(violations)
        return normalized

    def _resolve_station(self, raw: str) -> str:
        entry = self.gazetteer.lookup(raw)
        if entry is not None and entry.station is not None:
            return entry.station.id
        return raw  # assume it is already a station id; client validates

    # -- dispatch ------------------------------------------------------------

    def dispatch(self, call: FunctionCall) -> ToolResponse:
        fd = self.registry.get(call.name)
        normalized = self.validate_args(fd, call.args)
        try:
            resp = fd.handler(normalized)
        except (ArgValidation, OceanQueryError) as e:
            if isinstance(e, (ArgValidation, UpstreamFailure)):
                raise
            retryable = getattr(e, "retryable", False)
            raise UpstreamFailure(f"{e.code}: {e}", retryable=retryable) from e
        except Exception as e:  # handler bug: still a structured failure
            raise UpstreamFailure(f"handler {call.name} failed: {e}") from e
        others = dict(resp.others)
        others["function"] = call.name
        others["arguments"] = {
            k: ts_format(v) if isinstance(v, datetime) else v for k, v in normalized.items()
        }
        return ToolResponse(resp.text, resp.images, resp.json_data, others)

    def dispatch_structured(self, q: StructuredQuery) -> ToolResponse:
        calls = [(self._label_for(sel), self._lower(q, sel)) for sel in q.selectors]
        if q.stat is not Stat.COMPARE:
            return self.dispatch(calls[0][1])

        merged_data: dict = {"locations": {}, "errors": {}}
        texts, provenance, images = [], [], []
        series_pairs = []
        unit = datum = None
        for label, call in calls:
            try:
                sub = self.dispatch(call)
            except OceanQueryError as e:
                merged_data["errors"][label] = e.payload()
                texts.append(f"{label}: unavailable ({e.code}).")
                continue
            merged_data["locations"][label] = sub.json_data
            texts.append(sub.text)
            provenance.extend(sub.others.get("provenance", []))
            unit = sub.others.get("unit", unit)
            datum = sub.others.get("datum", datum)
            if "series" in sub.json_data:
                series_pairs.append((label, Series.from_dict(sub.json_data["series"])))
        if not merged_data["locations"]:
            raise UpstreamFailure(
                "all compared locations failed: "
                + "; ".join(f"{k}: {v['detail']}" for k, v in merged_data["errors"].items())
            )
        if len(series_pairs) >= 2:
            labels = [lb for lb, _ in series_pairs]
            series = [s for _, s in series_pairs]
            stats = [analysis.summary_stats(s) for s in series]
            fig = render_timeseries(
                series, stats,
                title=f"{q.variable.value.replace('_', ' ')} comparison",
                labels=labels, store=self.figure_store,
            )
            images.append(fig)
        others = {
            "unit": unit,
            "datum": datum,
            "time_span": q.time.to_dict(),
            "provenance": provenance,
        }
        return ToolResponse(
            text=" ".join(texts), images=tuple(images), json_data=merged_data, others=others
        )

    def _label_for(self, sel) -> str:
        if isinstance(sel, StationRef):
            for name in self.gazetteer.names():
                entry = self.gazetteer.lookup(name)
                if entry.station is not None and entry.station.id == sel.station_id:
                    return entry.station.name
            return sel.station_id
        if isinstance(sel, NamedRegion):
            return sel.region_key
        if isinstance(sel, Point):
            return f"({sel.lat:.4f}, {sel.lon:.4f})"
        return "bbox"

    def _lower(self, q: StructuredQuery, sel) -> FunctionCall:
        tr = q.time
        if q.variable is Variable.WATER_LEVEL:
            return FunctionCall(
                "get_water_level",
                {
                    "station": sel.station_id,
                    "begin": ts_format(tr.start),
                    "end": ts_format(tr.end),
                    "datum": "MSL",
                    "interval": tr.resolution.value if tr.resolution is Resolution.SIX_MINUTE else "hourly",
                },
            )
        if q.variable is Variable.MONTHLY_MEAN_SEA_LEVEL:
            return FunctionCall(
                "get_monthly_mean_sea_level",
                {
                    "station": sel.station_id,
                    "begin": ts_format(tr.start),
                    "end": ts_format(tr.end),
                    "datum": "MSL",
                },
            )
        if q.variable is Variable.CORA_ZETA:
            return FunctionCall(
                "get_cora_series",
                {
                    "lat": sel.lat,
                    "lon": sel.lon,
                    "begin": ts_format(tr.start),
                    "end": ts_format(tr.end),
                },
            )
        if q.variable is Variable.SEA_SURFACE_TEMPERATURE:
            args = {"date": tr.end.strftime("%Y-%m-%d")}
            if isinstance(sel, NamedRegion):
                args["region"] = sel.region_key
            else:
                args.update(
                    lat_min=sel.lat_min, lat_max=sel.lat_max,
                    lon_min=sel.lon_min, lon_max=sel.lon_max,
                )
            return FunctionCall("get_sst", args)
        raise UnknownFunction(f"no lowering for variable {q.variable}")


# -- default function set ----------------------------------------------------


def _provenance_dict(source: str, dataset: str, identity: str, fr: FetchResult,
                     unit: str, tr: TimeRange, datum: Optional[str] = None) -> dict:
    return Provenance(
        source_name=source,
        dataset_id=dataset,
        station_or_grid=identity,
        unit=unit,
        datum=datum,
        time_span=tr,
        retrieved_at=fr.retrieved_at,
        processing_steps=tuple(fr.steps),
    ).to_dict()


def build_default_registry(
    clients: NoaaClients,
    figure_store: FigureStore,
    vector_store: VectorStore,
    gazetteer: Gazetteer,
) -> Registry:
    """The five default callables: four dataset functions plus document
    search."""

    def station_name(station_id: str) -> str:
        for name in gazetteer.names():
            entry = gazetteer.lookup(name)
            if entry.station is not None and entry.station.id == station_id:
                return entry.station.name
        return f"station {station_id}"

    def get_water_level(args: dict) -> ToolResponse:
        interval = Resolution.SIX_MINUTE if args.get("interval") == "6min" else Resolution.HOURLY
        tr = TimeRange(args["begin"], args["end"], interval)
        datum = args.get("datum", "MSL")
        fr = clients.fetch_water_level(args["station"], tr, datum, interval)
        fr.steps.append("computed summary statistics (population std) over unmasked values")
        stats = analysis.summary_stats(fr.series)
        name = station_name(args["station"])
        fig = render_timeseries(
            [fr.series], [stats],
            title=f"Water level at {name} ({args['station']})",
            labels=[name], store=figure_store,
        )
        text = (
            f"Between {ts_format(tr.start)} and {ts_format(tr.end)}, the water level at "
            f"{name} (station {args['station']}) ranged from {stats.min:.2f} m to "
            f"{stats.max:.2f} m {datum}, with a mean of {stats.mean:.2f} m. "
            f"The maximum occurred at {ts_format(stats.argmax_time)}. "
            f"Source: NOAA CO-OPS tide gauge records."
        )
        prov = _provenance_dict(
            "NOAA CO-OPS", "coops_hourly_height" if interval is Resolution.HOURLY
            else "coops_water_level",
            f"{name} (station {args['station']})", fr, "m", tr, datum,
        )
        return ToolResponse(
            text=text,
            images=(fig,),
            json_data={"stats": stats.to_dict(), "series": fr.series.to_dict()},
            others={"unit": "m", "datum": datum, "time_span": tr.to_dict(),
                    "provenance": [prov]},
        )

    def get_monthly_mean_sea_level(args: dict) -> ToolResponse:
        tr = TimeRange(args["begin"], args["end"], Resolution.MONTHLY)
        datum = args.get("datum", "MSL")
        fr = clients.fetch_monthly_mean(args["station"], tr, datum)
        fr.steps.append("computed summary statistics (population std) over unmasked values")
        stats = analysis.summary_stats(fr.series)
        json_data = {"stats": stats.to_dict(), "series": fr.series.to_dict()}
        trend_txt = ""
        if stats.count >= 2:
            fr.steps.append("fitted ordinary least squares trend of value against time in years")
            trend = analysis.linear_trend(fr.series)
            json_data["trend"] = {
                "slope_per_year": trend.slope,
                "intercept": trend.intercept,
                "r_squared": trend.r_squared,
                "n": trend.n,
            }
            trend_txt = f" The least-squares change rate is {trend.slope * 1000:.2f} mm/yr."
        name = station_name(args["station"])
        fig = render_timeseries(
            [fr.series], [stats],
            title=f"Monthly mean sea level at {name} ({args['station']})",
            labels=[name], store=figure_store,
        )
        text = (
            f"Monthly mean sea level at {name} (station {args['station']}) from "
            f"{ts_format(tr.start)} to {ts_format(tr.end)} spans {stats.min:.2f} m to "
            f"{stats.max:.2f} m {datum} over {stats.count} months, mean {stats.mean:.2f} m."
            f"{trend_txt} Source: NOAA CO-OPS monthly means."
        )
        prov = _provenance_dict(
            "NOAA CO-OPS", "coops_monthly_mean",
            f"{name} (station {args['station']})", fr, "m", tr, datum,
        )
        return ToolResponse(
            text=text, images=(fig,), json_data=json_data,
            others={"unit": "m", "datum": datum, "time_span": tr.to_dict(),
                    "provenance": [prov]},
        )

    def get_cora_series(args: dict) -> ToolResponse:
        tr = TimeRange(args["begin"], args["end"], Resolution.HOURLY)
        p = Point(args["lat"], args["lon"])
        fr = clients.fetch_cora_series(p, tr)
        fr.steps.append("computed summary statistics (population std) over unmasked values")
        stats = analysis.summary_stats(fr.series)
        node = f"node ({fr.extra['node_lat']:.4f}, {fr.extra['node_lon']:.4f})"
        fig = render_timeseries(
            [fr.series], [stats],
            title=f"Reanalysis water level (zeta) at {node}",
            labels=[node], store=figure_store,
        )
        text = (
            f"Reanalysis water level (zeta) at {node}, "
            f"{fr.extra['node_distance_km']:.2f} km from ({p.lat:.4f}, {p.lon:.4f}), "
            f"from {ts_format(tr.start)} to {ts_format(tr.end)}: max {stats.max:.2f} m, "
            f"min {stats.min:.2f} m, mean {stats.mean:.2f} m, std {stats.std:.2f} m. "
            f"Source: NOAA coastal ocean reanalysis."
        )
        prov = _provenance_dict(
            "NOAA CORA", "cora_zeta_hindcast", node, fr, "m", tr,
        )
        return ToolResponse(
            text=text, images=(fig,),
            json_data={
                "stats": stats.to_dict(),
                "series": fr.series.to_dict(),
                "node": {
                    "lat": fr.extra["node_lat"],
                    "lon": fr.extra["node_lon"],
                    "distance_km": fr.extra["node_distance_km"],
                },
            },
            others={"unit": "m", "datum": None, "time_span": tr.to_dict(),
                    "provenance": [prov]},
        )

    def get_sst(args: dict) -> ToolResponse:
        if "region" in args:
            sel = NamedRegion(args["region"])
        elif all(k in args for k in ("lat_min", "lat_max", "lon_min", "lon_max")):
            try:
                sel = BBox(args["lat_min"], args["lat_max"], args["lon_min"], args["lon_max"])
            except ValueError as e:
                raise ArgValidation([str(e)])
        else:
            raise ArgValidation(
                ["either 'region' or all of lat_min/lat_max/lon_min/lon_max are required"]
            )
        fr = clients.fetch_sst(sel, args["date"])
        grid = fr.grid
        unmasked = grid.unmasked()
        sst_min, sst_max = min(unmasked), max(unmasked)
        sst_mean = sum(unmasked) / len(unmasked)
        fr.steps.append("computed min/max/mean over unmasked grid cells")
        label = fr.extra["region"]
        day = grid.timestamp.strftime("%Y-%m-%d")
        fig = render_map(grid, title=f"Sea surface temperature, {label}, {day}",
                         store=figure_store)
        text = (
            f"On {day}, sea surface temperature across {label} ranged from "
            f"{sst_min:.2f} degC to {sst_max:.2f} degC, with a mean of {sst_mean:.2f} degC "
            f"over {len(unmasked)} unmasked grid cells. "
            f"Source: NOAA coral reef watch gridded SST."
        )
        tr = TimeRange(grid.timestamp, grid.timestamp.replace(hour=23, minute=59),
                       Resolution.DAILY)
        prov = _provenance_dict(
            "NOAA CRW", "crw_analysed_sst",
            f"{label} grid {len(grid.lats)}x{len(grid.lons)}", fr, "degC", tr,
        )
        return ToolResponse(
            text=text, images=(fig,),
            json_data={
                "min": sst_min, "max": sst_max, "mean": sst_mean,
                "count_unmasked": len(unmasked),
                "bbox": fr.extra["bbox"], "date": day,
            },
            others={"unit": "degC", "datum": None, "time_span": tr.to_dict(),
                    "provenance": [prov]},
        )

    def search_documents(args: dict) -> ToolResponse:
        k = args.get("k", 4)
        results = vector_store.search(args["query"], k=k)
        rows = [
            {
                "doc_id": c.doc_id,
                "chunk_index": c.chunk_index,
                "score": s,
                "title": c.title,
                "origin": c.origin,
                "snippet": c.text[:200],
            }
            for c, s in results
        ]
        years = [c.year for c, _ in results if c.year]
        span = TimeRange(
            datetime(min(years) if years else 1970, 1, 1, tzinfo=UTC),
            datetime(max(years) if years else 2026, 12, 31, tzinfo=UTC),
            Resolution.DAILY,
        )
        fr = FetchResult(steps=[f"ranked corpus chunks by cosine similarity, top {k}"],
                         retrieved_at=datetime(1970, 1, 1, tzinfo=UTC))
        prov = _provenance_dict(
            "bundled document corpus", "document_corpus",
            f"{len(vector_store)} chunks", fr, "none", span,
        )
        top = results[0][0] if results else None
        text = (
            f"Top documents: " + "; ".join(f"{r['title'] or r['doc_id']}" for r in rows)
            + (f". Most relevant passage: {top.text[:160]}" if top else "")
        )
        return ToolResponse(
            text=text, images=(),
            json_data={"results": rows},
            others={"unit": "none", "datum": None, "time_span": span.to_dict(),
                    "provenance": [prov]},
        )

    registry = Registry()
    registry.register(FunctionDescriptor(
        name="get_water_level",
        params=(
            Param("station", "station", True, description="tide station id or known place name"),
            Param("begin", "datetime", True, description="range start (UTC)"),
            Param("end", "datetime", True, description="range end (UTC)"),
            Param("datum", "string", False, enum=("MSL", "MLLW", "MHW", "MLW", "NAVD"),
                  description="vertical datum; defaults to MSL"),
            Param("interval", "string", False, enum=("hourly", "6min"),
                  description="observation interval"),
        ),
        summary="Hourly or 6-minute water level observations from a tide gauge",
        handler=get_water_level,
    ))
    registry.register(FunctionDescriptor(
        name="get_monthly_mean_sea_level",
        params=(
            Param("station", "station", True, description="tide station id or known place name"),
            Param("begin", "datetime", True),
            Param("end", "datetime", True),
            Param("datum", "string", False, enum=("MSL", "MLLW", "MHW", "MLW", "NAVD")),
        ),
        summary="Monthly mean sea level record for a tide station, with trend",
        handler=get_monthly_mean_sea_level,
    ))
    registry.register(FunctionDescriptor(
        name="get_cora_series",
        params=(
            Param("lat", "number", True, description="query latitude"),
            Param("lon", "number", True, description="query longitude"),
            Param("begin", "datetime", True),
            Param("end", "datetime", True),
        ),
        summary="Hourly reanalysis water level (zeta) at the nearest model node",
        handler=get_cora_series,
    ))
    registry.register(FunctionDescriptor(
        name="get_sst",
        params=(
            Param("date", "datetime", True, description="calendar day (UTC)"),
            Param("region", "string", False, description="named region key"),
            Param("lat_min", "number", False),
            Param("lat_max", "number", False),
            Param("lon_min", "number", False),
            Param("lon_max", "number", False),
        ),
        summary="Gridded sea surface temperature for a region on one day",
        handler=get_sst,
    ))
    registry.register(FunctionDescriptor(
        name="search_documents",
        params=(
            Param("query", "string", True, description="free-text search"),
            Param("k", "integer", False, description="number of results (default 4)"),
        ),
        summary="Similarity search over the bundled document corpus",
        handler=search_documents,
    ))
    return registry

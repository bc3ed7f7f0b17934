"""Shared domain types: variables, stations, time ranges, series, grids,
provenance, and the standardized four-field tool payload.

All timestamps are UTC. Missing observations are represented by ``None``
entries in value lists (an explicit mask), never by sentinel magnitudes.
Every type is immutable after construction and JSON round-trippable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Optional, Union


class OceanQueryError(Exception):
    """Base class for all structured errors raised by this package."""

    code = "Error"

    def payload(self) -> dict:
        return {"error": self.code, "detail": str(self)}


class EmptyRange(OceanQueryError):
    code = "EmptyRange"


class ResolutionMismatch(OceanQueryError):
    code = "ResolutionMismatch"


class OutOfCoverage(OceanQueryError):
    code = "OutOfCoverage"


class Variable(Enum):
    WATER_LEVEL = "water_level"
    MONTHLY_MEAN_SEA_LEVEL = "monthly_mean_sea_level"
    CORA_ZETA = "cora_zeta"
    SEA_SURFACE_TEMPERATURE = "sea_surface_temperature"


class Resolution(Enum):
    SIX_MINUTE = "6min"
    HOURLY = "hourly"
    DAILY = "daily"
    MONTHLY = "monthly"


#: Unit codes: "m" for the water-level family, "degC" for SST.
_CANONICAL_UNITS = {
    Variable.WATER_LEVEL: "m",
    Variable.MONTHLY_MEAN_SEA_LEVEL: "m",
    Variable.CORA_ZETA: "m",
    Variable.SEA_SURFACE_TEMPERATURE: "degC",
}

#: Resolutions each dataset family can serve.
LEGAL_RESOLUTIONS = {
    Variable.WATER_LEVEL: {Resolution.SIX_MINUTE, Resolution.HOURLY},
    Variable.MONTHLY_MEAN_SEA_LEVEL: {Resolution.MONTHLY},
    Variable.CORA_ZETA: {Resolution.HOURLY},
    Variable.SEA_SURFACE_TEMPERATURE: {Resolution.DAILY},
}


def canonical_unit(v: Variable) -> str:
    """Canonical unit code for a variable (total function)."""
    return _CANONICAL_UNITS[v]


UTC = timezone.utc


def ts_parse(s: str) -> datetime:
    """Parse an ISO-8601 timestamp (``Z`` suffix allowed) as aware UTC."""
    s = s.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC)


def ts_format(dt: datetime) -> str:
    """Render an aware UTC timestamp as ``YYYY-MM-DDTHH:MM:SSZ``."""
    return dt.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Station:
    id: str
    name: str
    lat: float
    lon: float
    supported_datums: frozenset = frozenset()

    def __post_init__(self):
        if not self.id:
            raise ValueError("station id must be non-empty")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of bounds: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of bounds: {self.lon}")


@dataclass(frozen=True)
class StationRef:
    station_id: str

    def to_dict(self) -> dict:
        return {"type": "station", "station_id": self.station_id}


@dataclass(frozen=True)
class Point:
    lat: float
    lon: float

    def to_dict(self) -> dict:
        return {"type": "point", "lat": self.lat, "lon": self.lon}


@dataclass(frozen=True)
class BBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("bbox requires lat_min < lat_max and lon_min < lon_max")

    def to_dict(self) -> dict:
        return {
            "type": "bbox",
            "lat_min": self.lat_min,
            "lat_max": self.lat_max,
            "lon_min": self.lon_min,
            "lon_max": self.lon_max,
        }


@dataclass(frozen=True)
class NamedRegion:
    region_key: str

    def to_dict(self) -> dict:
        return {"type": "region", "region_key": self.region_key}


SpatialSelector = Union[StationRef, Point, BBox, NamedRegion]


def selector_from_dict(d: dict) -> SpatialSelector:
    kind = d.get("type")
    if kind == "station":
        return StationRef(d["station_id"])
    if kind == "point":
        return Point(d["lat"], d["lon"])
    if kind == "bbox":
        return BBox(d["lat_min"], d["lat_max"], d["lon_min"], d["lon_max"])
    if kind == "region":
        return NamedRegion(d["region_key"])
    raise ValueError(f"unknown selector type: {kind!r}")


@dataclass(frozen=True)
class TimeRange:
    start: datetime
    end: datetime
    resolution: Resolution

    def __post_init__(self):
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("timestamps must be timezone-aware UTC")

    def to_dict(self) -> dict:
        return {
            "start": ts_format(self.start),
            "end": ts_format(self.end),
            "resolution": self.resolution.value,
        }

    @staticmethod
    def from_dict(d: dict) -> "TimeRange":
        return TimeRange(ts_parse(d["start"]), ts_parse(d["end"]), Resolution(d["resolution"]))


@dataclass(frozen=True)
class Series:
    """Timestamped 1-D observation sequence; ``None`` values are masked."""

    timestamps: tuple
    values: tuple
    unit: str
    variable: Variable
    datum: Optional[str] = None

    def __post_init__(self):
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values must have equal length")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not a < b:
                raise ValueError("timestamps must be strictly ascending")
        if self.unit != canonical_unit(self.variable):
            raise ValueError(
                f"unit {self.unit!r} inconsistent with {self.variable.value} "
                f"(expected {canonical_unit(self.variable)!r})"
            )

    def __len__(self) -> int:
        return len(self.timestamps)

    def non_missing(self):
        """(timestamp, value) pairs for unmasked entries."""
        return [(t, v) for t, v in zip(self.timestamps, self.values) if v is not None]

    def to_dict(self) -> dict:
        return {
            "timestamps": [ts_format(t) for t in self.timestamps],
            "values": list(self.values),
            "unit": self.unit,
            "datum": self.datum,
            "variable": self.variable.value,
        }

    @staticmethod
    def from_dict(d: dict) -> "Series":
        return Series(
            timestamps=tuple(ts_parse(t) for t in d["timestamps"]),
            values=tuple(d["values"]),
            unit=d["unit"],
            datum=d.get("datum"),
            variable=Variable(d["variable"]),
        )


@dataclass(frozen=True)
class GridSlice:
    """2-D georeferenced field for one timestamp; ``None`` cells are masked."""

    lats: tuple
    lons: tuple
    values: tuple  # tuple of rows (len(lats)), each a tuple of len(lons)
    unit: str
    timestamp: datetime
    variable: Variable

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.lats, self.lats[1:])):
            raise ValueError("lats must be strictly ascending")
        if any(a >= b for a, b in zip(self.lons, self.lons[1:])):
            raise ValueError("lons must be strictly ascending")
        if len(self.values) != len(self.lats) or any(
            len(row) != len(self.lons) for row in self.values
        ):
            raise ValueError("value matrix dimensions must match coordinate lengths")
        if self.unit != canonical_unit(self.variable):
            raise ValueError("unit inconsistent with variable")

    def unmasked(self):
        return [v for row in self.values for v in row if v is not None]

    def to_dict(self) -> dict:
        return {
            "lats": list(self.lats),
            "lons": list(self.lons),
            "values": [list(row) for row in self.values],
            "unit": self.unit,
            "timestamp": ts_format(self.timestamp),
            "variable": self.variable.value,
        }

    @staticmethod
    def from_dict(d: dict) -> "GridSlice":
        return GridSlice(
            lats=tuple(d["lats"]),
            lons=tuple(d["lons"]),
            values=tuple(tuple(row) for row in d["values"]),
            unit=d["unit"],
            timestamp=ts_parse(d["timestamp"]),
            variable=Variable(d["variable"]),
        )


@dataclass(frozen=True)
class SummaryStats:
    min: float
    max: float
    mean: float
    std: float
    argmin_time: datetime
    argmax_time: datetime
    count: int

    def __post_init__(self):
        if not (self.min <= self.mean <= self.max):
            raise ValueError("requires min <= mean <= max")
        if self.std < 0:
            raise ValueError("std must be non-negative")

    def to_dict(self) -> dict:
        return {
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "std": self.std,
            "argmin_time": ts_format(self.argmin_time),
            "argmax_time": ts_format(self.argmax_time),
            "count": self.count,
        }

    @staticmethod
    def from_dict(d: dict) -> "SummaryStats":
        return SummaryStats(
            d["min"], d["max"], d["mean"], d["std"],
            ts_parse(d["argmin_time"]), ts_parse(d["argmax_time"]), d["count"],
        )


@dataclass(frozen=True)
class Provenance:
    source_name: str
    dataset_id: str
    station_or_grid: str
    unit: str
    time_span: TimeRange
    retrieved_at: datetime
    processing_steps: tuple
    datum: Optional[str] = None

    def __post_init__(self):
        if not self.processing_steps:
            raise ValueError("processing_steps must be non-empty")

    def to_dict(self) -> dict:
        return {
            "source_name": self.source_name,
            "dataset_id": self.dataset_id,
            "station_or_grid": self.station_or_grid,
            "unit": self.unit,
            "datum": self.datum,
            "time_span": self.time_span.to_dict(),
            "retrieved_at": ts_format(self.retrieved_at),
            "processing_steps": list(self.processing_steps),
        }

    @staticmethod
    def from_dict(d: dict) -> "Provenance":
        return Provenance(
            source_name=d["source_name"],
            dataset_id=d["dataset_id"],
            station_or_grid=d["station_or_grid"],
            unit=d["unit"],
            datum=d.get("datum"),
            time_span=TimeRange.from_dict(d["time_span"]),
            retrieved_at=ts_parse(d["retrieved_at"]),
            processing_steps=tuple(d["processing_steps"]),
        )


@dataclass(frozen=True)
class FigureRef:
    path: str
    alt_text: str
    kind: str  # "timeseries" | "map"

    def to_dict(self) -> dict:
        return {"path": self.path, "alt_text": self.alt_text, "kind": self.kind}

    @staticmethod
    def from_dict(d: dict) -> "FigureRef":
        return FigureRef(d["path"], d["alt_text"], d["kind"])


@dataclass(frozen=True)
class ToolResponse:
    """Standardized four-field payload returned by every callable function.

    ``others`` always carries a ``provenance`` list (one record per data
    product used) and, whenever ``json_data`` is non-empty, top-level
    ``unit`` and ``time_span`` keys.
    """

    text: str
    images: tuple  # of FigureRef
    json_data: dict
    others: dict

    def __post_init__(self):
        if self.json_data:
            if "unit" not in self.others or "time_span" not in self.others:
                raise ValueError("others.unit and others.time_span required with json_data")

    @property
    def provenance(self) -> list:
        return [Provenance.from_dict(p) for p in self.others.get("provenance", [])]

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "images": [im.to_dict() for im in self.images],
            "json_data": self.json_data,
            "others": self.others,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "ToolResponse":
        return ToolResponse(
            text=d["text"],
            images=tuple(FigureRef.from_dict(i) for i in d["images"]),
            json_data=d["json_data"],
            others=d["others"],
        )

    @staticmethod
    def from_json(s: str) -> "ToolResponse":
        return ToolResponse.from_dict(json.loads(s))


def validate_time_range(tr: TimeRange, v: Variable, coverage: dict) -> tuple:
    """Check a time range against a variable's dataset family.

    ``coverage`` maps variable value -> {"start": iso, "end": iso or None}.
    Returns ``(checked_range, notes)`` where notes record any clamping
    applied to fit the dataset coverage window.
    """
    if tr.start >= tr.end:
        raise EmptyRange(f"start {ts_format(tr.start)} >= end {ts_format(tr.end)}")
    if tr.resolution not in LEGAL_RESOLUTIONS[v]:
        legal = ", ".join(sorted(r.value for r in LEGAL_RESOLUTIONS[v]))
        raise ResolutionMismatch(
            f"{tr.resolution.value} not available for {v.value} (legal: {legal})"
        )
    win = coverage[v.value]
    cov_start = ts_parse(win["start"])
    cov_end = ts_parse(win["end"]) if win.get("end") else None
    if tr.end <= cov_start or (cov_end is not None and tr.start >= cov_end):
        raise OutOfCoverage(
            f"range {ts_format(tr.start)}..{ts_format(tr.end)} outside "
            f"{v.value} coverage starting {win['start']}"
        )
    notes = []
    start, end = tr.start, tr.end
    if start < cov_start:
        start = cov_start
        notes.append(f"clamped range start to dataset coverage start {win['start']}")
    if cov_end is not None and end > cov_end:
        end = cov_end
        notes.append(f"clamped range end to dataset coverage end {win['end']}")
    if (start, end) != (tr.start, tr.end):
        tr = replace(tr, start=start, end=end)
    return tr, notes

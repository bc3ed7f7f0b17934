"""Deterministic template-based parsing of user questions into typed
structured queries, plus the machine-readable function schemas handed to
an external chat-completions model.

The grammar is keyword templates with slot extraction, so the offline
pipeline is a pure function of (text, gazetteer, now). Anything it cannot
parse raises UnsupportedIntent, which signals the orchestrator to defer
to the external-model adapter.
"""

from __future__ import annotations

import calendar
import csv
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional

from .core import (
    BBox,
    NamedRegion,
    OceanQueryError,
    Point,
    Resolution,
    Station,
    StationRef,
    TimeRange,
    UTC,
    Variable,
)


class UnknownLocation(OceanQueryError):
    code = "UnknownLocation"

    def __init__(self, token: str):
        super().__init__(f"unknown location: {token!r}")
        self.token = token


class AmbiguousTime(OceanQueryError):
    code = "AmbiguousTime"


class UnsupportedIntent(OceanQueryError):
    code = "UnsupportedIntent"


class Stat(Enum):
    MAX = "max"
    MIN = "min"
    MEAN = "mean"
    STD = "std"
    FULL_SERIES = "full_series"
    TREND = "trend"
    COMPARE = "compare"


class DatasetHint(Enum):
    COOPS_REALTIME = "coops_realtime"
    COOPS_MONTHLY = "coops_monthly"
    CORA = "cora"
    CRW = "crw"


_HINT_FOR_VARIABLE = {
    Variable.WATER_LEVEL: DatasetHint.COOPS_REALTIME,
    Variable.MONTHLY_MEAN_SEA_LEVEL: DatasetHint.COOPS_MONTHLY,
    Variable.CORA_ZETA: DatasetHint.CORA,
    Variable.SEA_SURFACE_TEMPERATURE: DatasetHint.CRW,
}


@dataclass(frozen=True)
class StructuredQuery:
    variable: Variable
    stat: Stat
    selectors: tuple
    time: TimeRange
    dataset_hint: Optional[DatasetHint] = None

    def __post_init__(self):
        want = 2 if self.stat is Stat.COMPARE else 1
        if len(self.selectors) != want:
            raise ValueError(
                f"{self.stat.value} requires exactly {want} selector(s), "
                f"got {len(self.selectors)}"
            )
        if self.dataset_hint is not None:
            if self.dataset_hint is not _HINT_FOR_VARIABLE[self.variable]:
                raise ValueError("dataset_hint inconsistent with variable")


@dataclass(frozen=True)
class GazetteerEntry:
    name: str
    station: Optional[Station] = None
    region: Optional[BBox] = None


class Gazetteer:
    """Case-insensitive, whitespace-normalized place-name lookup."""

    def __init__(self, entries):
        self._entries = {self._norm(e.name): e for e in entries}

    @staticmethod
    def _norm(name: str) -> str:
        return " ".join(name.lower().split())

    def lookup(self, name: str) -> Optional[GazetteerEntry]:
        return self._entries.get(self._norm(name))

    def names(self):
        # longest first so "gulf of mexico" wins over any shorter overlap
        return sorted(self._entries, key=len, reverse=True)

    @classmethod
    def from_csv(cls, path) -> "Gazetteer":
        entries = []
        with open(path, newline="", encoding="utf-8") as f:
            for row in csv.reader(f):
                if not row or row[0].startswith("#"):
                    continue
                name, kind, id_or_bbox, lat, lon, datums = row
                if kind == "station":
                    entries.append(
                        GazetteerEntry(
                            name=name,
                            station=Station(
                                id=id_or_bbox,
                                name=name.title(),
                                lat=float(lat),
                                lon=float(lon),
                                supported_datums=frozenset(datums.split(";")),
                            ),
                        )
                    )
                elif kind == "region":
                    lat_min, lat_max, lon_min, lon_max = (float(x) for x in id_or_bbox.split(":"))
                    entries.append(
                        GazetteerEntry(name=name, region=BBox(lat_min, lat_max, lon_min, lon_max))
                    )
                else:
                    raise ValueError(f"unknown gazetteer kind {kind!r}")
        return cls(entries)


def default_gazetteer() -> Gazetteer:
    return Gazetteer.from_csv(Path(__file__).parent / "data" / "gazetteer.csv")


_MONTHS = {name.lower(): i for i, name in enumerate(calendar.month_name) if name}
_MONTHS.update({name.lower(): i for i, name in enumerate(calendar.month_abbr) if name})

_VAGUE_TIME = re.compile(
    r"\b(last|this|next)\s+(winter|spring|summer|fall|autumn|year|month|week|decade)\b"
    r"|\b(recently|lately|nowadays)\b"
)


def _year_range(y: int) -> tuple:
    return (
        datetime(y, 1, 1, tzinfo=UTC),
        datetime(y, 12, 31, 23, 59, tzinfo=UTC),
    )


def _month_range(y: int, m: int) -> tuple:
    last = calendar.monthrange(y, m)[1]
    return (
        datetime(y, m, 1, tzinfo=UTC),
        datetime(y, m, last, 23, 59, tzinfo=UTC),
    )


def resolve_time_expression(text: str, now: datetime) -> TimeRange:
    """Resolve a time phrase to a concrete UTC range.

    Supports bare years, month-year, explicit ISO dates, and
    "from X to Y" spans. Deterministic for fixed ``now``; relative or
    seasonal phrasing raises AmbiguousTime. Resolution defaults to hourly
    and is overridden by the caller once the variable is known.
    """
    low = text.lower()
    if _VAGUE_TIME.search(low):
        raise AmbiguousTime(f"cannot resolve relative time phrase in {text!r}")

    m = re.search(r"from\s+(\d{4}-\d{2}-\d{2})\s+to\s+(\d{4}-\d{2}-\d{2})", low)
    if m:
        s = datetime.strptime(m.group(1), "%Y-%m-%d").replace(tzinfo=UTC)
        e = datetime.strptime(m.group(2), "%Y-%m-%d").replace(hour=23, minute=59, tzinfo=UTC)
        return TimeRange(s, e, Resolution.HOURLY)

    m = re.search(r"from\s+(\d{4})\s+to\s+(\d{4})", low)
    if m:
        s, _ = _year_range(int(m.group(1)))
        _, e = _year_range(int(m.group(2)))
        return TimeRange(s, e, Resolution.HOURLY)

    month_names = "|".join(_MONTHS)
    m = re.search(rf"\b({month_names})\.?,?\s+(\d{{4}})\b", low)
    if m:
        s, e = _month_range(int(m.group(2)), _MONTHS[m.group(1)])
        return TimeRange(s, e, Resolution.HOURLY)

    m = re.search(r"\bon\s+(\d{4}-\d{2}-\d{2})\b", low) or re.search(
        r"\b(\d{4}-\d{2}-\d{2})\b", low
    )
    if m:
        s = datetime.strptime(m.group(1), "%Y-%m-%d").replace(tzinfo=UTC)
        return TimeRange(s, s.replace(hour=23, minute=59), Resolution.HOURLY)

    m = re.search(r"\b(19\d{2}|20\d{2})\b", low)
    if m:
        s, e = _year_range(int(m.group(1)))
        return TimeRange(s, e, Resolution.HOURLY)

    raise AmbiguousTime(f"no recognizable time expression in {text!r}")


_RESOLUTION_FOR = {
    Variable.WATER_LEVEL: Resolution.HOURLY,
    Variable.MONTHLY_MEAN_SEA_LEVEL: Resolution.MONTHLY,
    Variable.CORA_ZETA: Resolution.HOURLY,
    Variable.SEA_SURFACE_TEMPERATURE: Resolution.DAILY,
}

_SUPERLATIVE_MAX = re.compile(r"\b(maximum|max|highest|peak)\b")
_SUPERLATIVE_MIN = re.compile(r"\b(minimum|min|lowest)\b")


def _detect_stat(low: str, n_locations: int) -> Stat:
    if n_locations >= 2:
        return Stat.COMPARE
    if _SUPERLATIVE_MAX.search(low):
        return Stat.MAX
    if _SUPERLATIVE_MIN.search(low):
        return Stat.MIN
    if re.search(r"\b(average|mean)\b", low):
        return Stat.MEAN
    if re.search(r"\b(standard deviation|std)\b", low):
        return Stat.STD
    if re.search(r"\b(trend|change rate|rate of change)\b", low):
        return Stat.TREND
    return Stat.FULL_SERIES


def _detect_variable(low: str, time: TimeRange) -> Variable:
    if re.search(r"\b(cora|reanalysis)\b", low):
        return Variable.CORA_ZETA
    if re.search(r"\bsst\b|sea surface temperature|\btemperature\b", low):
        return Variable.SEA_SURFACE_TEMPERATURE
    if "water level" in low:
        return Variable.WATER_LEVEL
    if "sea level" in low:
        # monthly means for multi-month windows without a superlative;
        # otherwise the high-frequency gauge record
        spans_months = (time.end - time.start).days >= 59
        superlative = _SUPERLATIVE_MAX.search(low) or _SUPERLATIVE_MIN.search(low)
        if spans_months and not superlative:
            return Variable.MONTHLY_MEAN_SEA_LEVEL
        return Variable.WATER_LEVEL
    raise UnsupportedIntent(f"no variable template matches {low!r}")


_LOCATION_CANDIDATE = re.compile(r"\b(?:in|at|near|for)\s+([A-Z][A-Za-z]*(?:\s+[A-Z][A-Za-z]*)*)")


def _find_locations(text: str, gz: Gazetteer):
    """Gazetteer hits in order of appearance, plus any unresolved
    capitalized place-like token."""
    low = " ".join(text.lower().replace("'s", " ").split())
    hits = []
    taken = []
    for name in gz.names():
        for m in re.finditer(re.escape(name), low):
            span = (m.start(), m.end())
            if any(s < span[1] and span[0] < e for s, e in taken):
                continue
            taken.append(span)
            hits.append((m.start(), gz.lookup(name)))
    hits.sort(key=lambda h: h[0])

    unresolved = None
    for m in _LOCATION_CANDIDATE.finditer(text):
        token = m.group(1).rstrip("?.,!").strip()
        if not token or token.lower() in _MONTHS:
            continue
        words = [w for w in token.split() if w.lower() not in _MONTHS]
        token = " ".join(words)
        if token and gz.lookup(token) is None and not re.fullmatch(r"\d{4}", token):
            unresolved = token
            break
    return [e for _, e in hits], unresolved


def parse_query(text: str, gz: Gazetteer, now: datetime) -> StructuredQuery:
    """Parse a user question into a StructuredQuery.

    Raises UnknownLocation, AmbiguousTime, or UnsupportedIntent; the last
    signals fallback to the external-model adapter.
    """
    if not text.strip():
        raise UnsupportedIntent("empty query")
    low = " ".join(text.lower().replace("'s", " ").split())

    try:
        time = resolve_time_expression(text, now)
    except AmbiguousTime:
        # a question that names no dataset variable is a deferral, not a
        # time problem; probe with a placeholder range before re-raising
        placeholder = TimeRange(*_year_range(now.year), Resolution.HOURLY)
        _detect_variable(low, placeholder)  # raises UnsupportedIntent if none
        raise
    variable = _detect_variable(low, time)

    locations, unresolved = _find_locations(text, gz)
    if not locations:
        if unresolved is not None:
            raise UnknownLocation(unresolved)
        raise UnsupportedIntent(f"no known location in {text!r}")
    if unresolved is not None:
        raise UnknownLocation(unresolved)

    stat = _detect_stat(low, len(locations))
    if stat is Stat.COMPARE:
        locations = locations[:2]
    else:
        locations = locations[:1]

    selectors = tuple(_selector_for(variable, e) for e in locations)
    from dataclasses import replace as _replace

    time = _replace(time, resolution=_RESOLUTION_FOR[variable])
    return StructuredQuery(
        variable=variable,
        stat=stat,
        selectors=selectors,
        time=time,
        dataset_hint=_HINT_FOR_VARIABLE[variable],
    )


def _selector_for(variable: Variable, entry: GazetteerEntry):
    if variable is Variable.CORA_ZETA:
        if entry.station is not None:
            return Point(entry.station.lat, entry.station.lon)
        b = entry.region
        return Point((b.lat_min + b.lat_max) / 2, (b.lon_min + b.lon_max) / 2)
    if variable is Variable.SEA_SURFACE_TEMPERATURE:
        if entry.region is not None:
            return NamedRegion(entry.name)
        s = entry.station
        return BBox(s.lat - 0.5, s.lat + 0.5, s.lon - 0.5, s.lon + 0.5)
    if entry.station is not None:
        return StationRef(entry.station.id)
    raise UnsupportedIntent(f"{entry.name!r} is a region; station-based variable needs a station")


def emit_function_schemas(registry) -> list:
    """Tool descriptors in the JSON shape consumed by
    chat-completions-with-tools endpoints."""
    return [fd.to_schema() for fd in registry.list_functions()]
